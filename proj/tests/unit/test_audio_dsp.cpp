#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "terrasense/audio_dsp.hpp"
#include "terrasense/common.hpp"

using namespace terrasense;
using namespace terrasense::dsp;

namespace {

AudioClip tone(std::size_t n, double cycles_per_sample, double amp = 1.0) {
  AudioClip c{std::vector<double>(n), 44100.0};
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * cycles_per_sample * i);
  return c;
}

AudioClip noise_clip(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  AudioClip c{std::vector<double>(n), 44100.0};
  for (auto& s : c.samples) s = g(rng);
  return c;
}

double noise_power(const AudioClip& a, const AudioClip& b) {
  double p = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) p += (b.samples[i] - a.samples[i]) * (b.samples[i] - a.samples[i]);
  return p / static_cast<double>(a.samples.size());
}

}  // namespace

TEST_CASE("stft of silence is zero") {
  const AudioClip c{std::vector<double>(1024, 0.0), 44100.0};
  const auto x = stft(c, {256, 128, WindowFn::hann});
  CHECK(x.rows() == 129);
  CHECK(x.cols() == 7);
  CHECK(x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("impulse at frame start has a flat unit spectrum") {
  AudioClip c{std::vector<double>(64, 0.0), 44100.0};
  c.samples[0] = 1.0;
  const auto x = stft(c, {64, 64, WindowFn::rectangular});
  for (Eigen::Index k = 0; k < x.rows(); ++k) CHECK(std::abs(x(k, 0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bin-centred sinusoid matches the direct DFT") {
  const auto c = tone(64, 4.0 / 64.0);
  const auto x = stft(c, {64, 64, WindowFn::rectangular});
  const auto ref = oracle::direct_dft(c.samples);
  double scale = 0.0;
  for (const auto& v : ref) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(x(static_cast<Eigen::Index>(k), 0) - ref[k]) / scale <= 1e-9);
  Eigen::Index peak = 0;
  x.col(0).cwiseAbs().maxCoeff(&peak);
  CHECK(peak == 4);
}

TEST_CASE("hann frames of noise match the direct DFT of the windowed frame") {
  const auto c = noise_clip(1000, 3);
  const StftParams p{128, 50, WindowFn::hann};
  const auto x = stft(c, p);
  CHECK(x.cols() == p.frames(c.samples.size()));
  const auto w = window_coefficients(WindowFn::hann, 128);
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    std::vector<double> frame(128);
    for (int i = 0; i < 128; ++i) frame[i] = c.samples[static_cast<std::size_t>(m * 50 + i)] * w[i];
    const auto ref = oracle::direct_dft(frame);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(std::abs(x(static_cast<Eigen::Index>(k), m) - ref[k]) <= 1e-9 * std::max(1.0, std::abs(ref[k])));
    }
  }
}

TEST_CASE("trailing partial frames are dropped") {
  const AudioClip c{std::vector<double>(300, 0.1), 44100.0};
  CHECK(StftParams{128, 100, WindowFn::hann}.frames(300) == 2);
  CHECK(stft(c, {128, 100, WindowFn::hann}).cols() == 2);
}

TEST_CASE("invalid stft parameters are rejected") {
  const AudioClip c{std::vector<double>(100, 0.0), 44100.0};
  CHECK_THROWS_AS(stft(c, {256, 128, WindowFn::hann}), InputError);
  CHECK_THROWS_AS(stft(c, {64, 65, WindowFn::hann}), InputError);
  CHECK_THROWS_AS(stft(c, {64, 0, WindowFn::hann}), InputError);
}

TEST_CASE("spectrogram homogeneity and non-negativity") {
  const auto c = noise_clip(2048, 5);
  auto scaled = c;
  for (auto& s : scaled.samples) s *= 3.0;
  const auto a = spectrogram(c, {256, 128, WindowFn::hann}).values;
  const auto b = spectrogram(scaled, {256, 128, WindowFn::hann}).values;
  CHECK(a.minCoeff() >= 0.0);
  CHECK((b - 9.0 * a).cwiseAbs().maxCoeff() <= 1e-9 * b.maxCoeff());
}

TEST_CASE("framewise Parseval with rectangular window") {
  const auto c = noise_clip(1024, 7);
  const int n = 128;
  const auto s = spectrogram(c, {n, n, WindowFn::rectangular}).values;
  for (Eigen::Index m = 0; m < s.cols(); ++m) {
    double time_energy = 0.0;
    for (int i = 0; i < n; ++i) time_energy += std::pow(c.samples[static_cast<std::size_t>(m * n + i)], 2);
    double freq = s(0, m) + s(n / 2, m);
    for (int k = 1; k < n / 2; ++k) freq += 2.0 * s(k, m);
    CHECK(std::abs(freq / n - time_energy) <= 1e-9 * time_energy);
  }
}

TEST_CASE("stft is linear") {
  const auto x = noise_clip(1024, 11);
  const auto y = tone(1024, 0.05);
  AudioClip z{std::vector<double>(1024), 44100.0};
  for (std::size_t i = 0; i < 1024; ++i) z.samples[i] = 2.0 * x.samples[i] - 0.5 * y.samples[i];
  const StftParams p{256, 128, WindowFn::hann};
  const Eigen::MatrixXcd lhs = stft(z, p);
  const Eigen::MatrixXcd rhs = 2.0 * stft(x, p) - 0.5 * stft(y, p);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("add_noise without noise returns the input") {
  const auto c = noise_clip(500, 1);
  CHECK(add_noise(c, kNoNoise, 9).samples == c.samples);
}

TEST_CASE("add_noise reaches the requested SNR") {
  const auto c = tone(44100, 440.0 / 44100.0, 0.5);
  const double ps = signal_power(c.samples);
  SUBCASE("0 dB") {
    const auto noisy = add_noise(c, 0.0, 21);
    CHECK(std::abs(noise_power(c, noisy) / ps - 1.0) <= 0.05);
  }
  SUBCASE("20 dB") {
    const auto noisy = add_noise(c, 20.0, 22);
    CHECK(std::abs(10.0 * std::log10(ps / noise_power(c, noisy)) - 20.0) <= 0.5);
  }
}

TEST_CASE("add_noise is deterministic and rejects silent clips") {
  const auto c = noise_clip(1000, 2);
  CHECK(add_noise(c, 10.0, 4).samples == add_noise(c, 10.0, 4).samples);
  CHECK(add_noise(c, 10.0, 4).samples != add_noise(c, 10.0, 5).samples);
  const AudioClip silent{std::vector<double>(100, 0.0), 44100.0};
  CHECK_THROWS_AS(add_noise(silent, 10.0, 1), InputError);
  CHECK(add_noise(silent, kNoNoise, 1).samples == silent.samples);
}

TEST_CASE("average pooling keeps the mean of uniform partitions") {
  Eigen::MatrixXd m(4, 6);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) m(r, c) = r * 6 + c;
  }
  const auto p = average_pool(m, 2, 3);
  CHECK(p(0, 0) == doctest::Approx((0 + 1 + 6 + 7) / 4.0));
  CHECK(p(1, 2) == doctest::Approx((16 + 17 + 22 + 23) / 4.0));
  CHECK(average_pool(m, 1, 1)(0, 0) == doctest::Approx(m.mean()));
}

TEST_CASE("scaler maps the fitting set into [0, 1]") {
  std::vector<Spectrogram> specs;
  for (int i = 0; i < 4; ++i) specs.push_back(spectrogram(noise_clip(4096, 30 + i), {256, 128, WindowFn::hann}));
  const auto s = SpectrogramScaler::fit(specs, 16, 16);
  std::vector<Eigen::MatrixXd> pooled;
  for (const auto& sp : specs) pooled.push_back(s.pooled_log(sp));
  const auto s2 = SpectrogramScaler::fit_pooled(pooled, 16, 16);
  CHECK(s2.log_min == s.log_min);
  CHECK(s2.log_max == s.log_max);
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& sp : specs) {
    const auto v = s.transform(sp);
    CHECK(v.size() == 256);
    lo = std::min(lo, v.minCoeff());
    hi = std::max(hi, v.maxCoeff());
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
}
