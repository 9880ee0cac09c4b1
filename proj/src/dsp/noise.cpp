#include <cmath>
#include <random>

#include "terrasense/audio_dsp.hpp"
#include "terrasense/common.hpp"

namespace terrasense::dsp {

double signal_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

AudioClip add_noise(const AudioClip& clip, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return clip;
  if (std::isnan(snr_db)) throw InputError("SNR must not be NaN");
  const double power = signal_power(clip.samples);
  if (power <= 0.0) throw InputError("cannot set an SNR relative to a zero-power clip");

  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  AudioClip out = clip;
  for (auto& s : out.samples) s += noise(rng);
  return out;
}

}  // namespace terrasense::dsp
