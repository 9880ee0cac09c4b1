#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "terrasense/audio_dsp.hpp"
#include "terrasense/common.hpp"

namespace terrasense::dsp {

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFftPlan {
 public:
  explicit RealFftPlan(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFftPlan() {
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFftPlan(const RealFftPlan&) = delete;
  RealFftPlan& operator=(const RealFftPlan&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void execute() { fftw_execute(plan_); }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

WindowFn parse_window(const std::string& name) {
  if (name == "hann") return WindowFn::hann;
  if (name == "rectangular") return WindowFn::rectangular;
  throw ConfigError("unknown window function: " + name);
}

std::string to_string(WindowFn w) { return w == WindowFn::hann ? "hann" : "rectangular"; }

void StftParams::validate(std::size_t clip_length) const {
  if (window_size <= 0 || hop <= 0) throw InputError("STFT window and hop must be positive");
  if (hop > window_size) throw InputError("STFT hop must not exceed the window size");
  if (static_cast<std::size_t>(window_size) > clip_length) {
    throw InputError("STFT window (" + std::to_string(window_size) + ") longer than clip (" +
                     std::to_string(clip_length) + ")");
  }
}

int StftParams::frames(std::size_t clip_length) const {
  if (static_cast<std::size_t>(window_size) > clip_length) return 0;
  return static_cast<int>((clip_length - static_cast<std::size_t>(window_size)) / static_cast<std::size_t>(hop)) + 1;
}

std::vector<double> window_coefficients(WindowFn fn, int n) {
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  if (fn == WindowFn::hann) {
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

Eigen::MatrixXcd stft(const AudioClip& clip, const StftParams& params) {
  params.validate(clip.samples.size());
  const int n = params.window_size;
  const int frames = params.frames(clip.samples.size());
  const auto window = window_coefficients(params.window, n);

  Eigen::MatrixXcd out(params.freq_bins(), frames);
  RealFftPlan plan(n);
  for (int m = 0; m < frames; ++m) {
    const std::size_t start = static_cast<std::size_t>(m) * static_cast<std::size_t>(params.hop);
    double* in = plan.input();
    for (int i = 0; i < n; ++i) in[i] = clip.samples[start + i] * window[i];
    plan.execute();
    const fftw_complex* bins = plan.output();
    for (int k = 0; k < params.freq_bins(); ++k) out(k, m) = {bins[k][0], bins[k][1]};
  }
  return out;
}

Spectrogram spectrogram(const AudioClip& clip, const StftParams& params) {
  return {stft(clip, params).cwiseAbs2(), params};
}

}  // namespace terrasense::dsp
