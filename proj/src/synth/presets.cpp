#include <cmath>

#include "terrasense/synthgen.hpp"

namespace terrasense::synth {

namespace {

// Grey road, grass, tiled paving, and two close earth tones.
constexpr std::array<std::array<double, 3>, 5> kPalette{{
    {95, 95, 100},
    {80, 125, 65},
    {150, 145, 135},
    {135, 100, 70},
    {120, 105, 80},
}};
constexpr std::array<double, 3> kPavingAlt{105, 95, 90};

}  // namespace

std::vector<ClassParams> make_class_params(int num_classes, double separation_hz, std::uint64_t seed) {
  if (num_classes < 1) throw ConfigError("need at least one class");
  if (!(separation_hz > 0.0)) throw ConfigError("separation must be positive");
  constexpr int kBands = 3;
  constexpr double kLowestBandHz = 600.0;
  Rng rng(derive_seed(seed, 11));
  std::uniform_real_distribution<double> amp_jitter(0.8, 1.2);
  std::uniform_real_distribution<double> channel(40.0, 200.0);

  std::vector<ClassParams> out(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    auto& cp = out[c];
    for (int b = 0; b < kBands; ++b) {
      cp.audio.band_centers_hz.push_back(kLowestBandHz + separation_hz * (c + num_classes * b));
      cp.audio.band_amplitudes.push_back(0.08 * amp_jitter(rng) / (1.0 + 0.5 * b));
    }
    cp.audio.broadband_floor = 0.01;
    cp.audio.speed_gain = 1.0;
    if (c < static_cast<int>(kPalette.size())) {
      cp.visual.base_color = kPalette[c];
      cp.visual.alt_color = kPalette[c];
    } else {
      cp.visual.base_color = {channel(rng), channel(rng), channel(rng)};
      cp.visual.alt_color = cp.visual.base_color;
    }
    cp.visual.noise_amplitude = 22.0;
  }
  if (num_classes > 2) {
    out[2].visual.alt_color = kPavingAlt;
    out[2].visual.tile_size_m = 0.25;
  }
  return out;
}

WorldSpec easy_world_spec(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.num_classes = 5;
  spec.class_params = make_class_params(spec.num_classes, 900.0, seed);
  spec.illumination_amplitude = 0.15;
  return spec;
}

WorldSpec hard_world_spec(std::uint64_t seed) {
  WorldSpec spec = easy_world_spec(seed);
  spec.class_params = make_class_params(spec.num_classes, 15.0, seed);
  return spec;
}

AudioParams default_audio_params() {
  AudioParams p;
  p.band_jitter_hz = 40.0;
  p.hum_base_hz = 180.0;
  p.hum_hz_per_mps = 250.0;
  p.hum_amplitude = 0.1;
  p.ambient_probability = 0.3;
  p.ambient_amplitude = 0.06;
  return p;
}

}  // namespace terrasense::synth
