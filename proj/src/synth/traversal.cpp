#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "terrasense/io.hpp"
#include "terrasense/synthgen.hpp"

namespace terrasense::synth {

namespace {

/* Adds amp * sin(2 pi f t + phase) via a rotating phasor. */
void add_tone(std::vector<double>& out, double freq_hz, double amp, double phase, double sample_rate_hz) {
  if (amp == 0.0) return;
  const std::complex<double> step = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
  std::complex<double> z = std::polar(amp, phase);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += z.imag();
    z *= step;
    if ((i & 1023U) == 1023U) z *= amp / std::abs(z);
  }
}

}  // namespace

dsp::AudioClip synthesize_clip(const World& world, int class_id, double speed_mps, const AudioParams& params,
                               std::uint64_t clip_seed) {
  if (class_id < 0 || class_id >= world.spec().num_classes) throw InputError("class id out of range");
  const auto& sig = world.spec().class_params[class_id].audio;
  const auto n = static_cast<std::size_t>(std::lround(params.sample_rate_hz * params.clip_duration_s));
  dsp::AudioClip clip{std::vector<double>(n, 0.0), params.sample_rate_hz};
  Rng rng(clip_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double nyquist = params.sample_rate_hz / 2.0;

  for (std::size_t b = 0; b < sig.band_centers_hz.size(); ++b) {
    const double f = std::clamp(sig.band_centers_hz[b] + params.band_jitter_hz * gauss(rng), 1.0, nyquist - 1.0);
    const double amp = sig.band_amplitudes[b] * sig.speed_gain * speed_mps;
    add_tone(clip.samples, f, amp, 2.0 * std::numbers::pi * unit(rng), params.sample_rate_hz);
  }
  if (params.hum_amplitude > 0.0) {
    const double f = params.hum_base_hz + params.hum_hz_per_mps * speed_mps;
    add_tone(clip.samples, f, params.hum_amplitude, 2.0 * std::numbers::pi * unit(rng), params.sample_rate_hz);
    if (2.0 * f < nyquist) {
      add_tone(clip.samples, 2.0 * f, 0.5 * params.hum_amplitude, 2.0 * std::numbers::pi * unit(rng),
               params.sample_rate_hz);
    }
  }
  if (params.ambient_probability > 0.0 && unit(rng) < params.ambient_probability) {
    const double f = 300.0 + unit(rng) * (std::min(20000.0, nyquist - 1.0) - 300.0);
    const double amp = params.ambient_amplitude * (0.5 + unit(rng));
    add_tone(clip.samples, f, amp, 2.0 * std::numbers::pi * unit(rng), params.sample_rate_hz);
  }
  if (sig.broadband_floor > 0.0) {
    for (auto& s : clip.samples) s += sig.broadband_floor * gauss(rng);
  }
  for (auto& s : clip.samples) s = io::quantize_pcm16(s);
  return clip;
}

TraversalRecord simulate_traversal(const World& world, std::span<const Eigen::Vector2d> waypoints,
                                   std::span<const double> speed_profile, const TraversalParams& params) {
  if (waypoints.size() < 2) throw InputError("traversal needs at least two waypoints");
  for (const auto& w : waypoints) {
    if (!world.contains(w.x(), w.y())) {
      throw InputError("waypoint (" + std::to_string(w.x()) + ", " + std::to_string(w.y()) + ") outside the world");
    }
  }
  const std::size_t segments = waypoints.size() - 1;
  if (speed_profile.size() != 1 && speed_profile.size() != segments) {
    throw InputError("speed profile needs one entry or one per segment");
  }
  for (double v : speed_profile) {
    if (!(v > 0.0 && v <= 2.0)) throw InputError("speeds must lie in (0, 2] m/s");
  }
  if (!(params.audio.clip_duration_s > 0.0)) throw ConfigError("clip duration must be positive");
  if (params.imaging.image_every_clips < 0) throw ConfigError("image_every_clips must be >= 0");

  std::vector<double> seg_start(segments + 1, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const double speed = speed_profile[speed_profile.size() == 1 ? 0 : s];
    seg_start[s + 1] = seg_start[s] + (waypoints[s + 1] - waypoints[s]).norm() / speed;
  }
  const double tw = params.audio.clip_duration_s;
  auto n_clips = static_cast<std::size_t>(std::floor(seg_start.back() / tw));
  if (params.max_clips > 0) n_clips = std::min(n_clips, params.max_clips);

  TraversalRecord rec;
  rec.clips.reserve(n_clips);
  const double mpp = world.spec().meters_per_pixel;
  std::size_t seg = 0;
  for (std::size_t j = 0; j < n_clips; ++j) {
    const double t = (static_cast<double>(j) + 0.5) * tw;
    while (seg + 1 < segments && t >= seg_start[seg + 1]) ++seg;
    const double speed = speed_profile[speed_profile.size() == 1 ? 0 : seg];
    const Eigen::Vector2d d = waypoints[seg + 1] - waypoints[seg];
    const double len = d.norm();
    const double frac = len > 0.0 ? std::clamp((t - seg_start[seg]) * speed / len, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d p = waypoints[seg] + frac * d;
    const auto pose = geometry::Pose::from_yaw(t, p.x(), p.y(), std::atan2(d.y(), d.x()));
    const int cls = world.class_at(p.x(), p.y());

    rec.poses.push_back(pose);
    rec.speeds.push_back(speed);
    rec.true_class_per_clip.push_back(cls);
    rec.clips.push_back(synthesize_clip(world, cls, speed, params.audio, derive_seed(params.seed, j)));

    const int every = params.imaging.image_every_clips;
    if (every > 0 && j % static_cast<std::size_t>(every) == 0) {
      ImageFrame frame;
      frame.clip_index = static_cast<int>(j);
      frame.frame_pose = snapped_frame_pose(world, pose, mpp);
      frame.image = render_birdseye(world, frame.frame_pose, params.imaging.image_size_px, mpp);
      frame.truth = render_truth(world, frame.frame_pose, params.imaging.image_size_px, mpp);
      rec.images.push_back(std::move(frame));
    }
  }
  return rec;
}

std::vector<Eigen::Vector2d> random_waypoints(const World& world, int count, double margin_m, std::uint64_t seed) {
  if (count < 2) throw ConfigError("need at least two waypoints");
  const double w = world.width_px() * world.spec().meters_per_pixel;
  const double h = world.height_px() * world.spec().meters_per_pixel;
  if (2.0 * margin_m >= w || 2.0 * margin_m >= h) throw ConfigError("waypoint margin leaves no room");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(margin_m, w - margin_m);
  std::uniform_real_distribution<double> uy(margin_m, h - margin_m);
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.emplace_back(ux(rng), uy(rng));
  return out;
}

std::vector<Eigen::Vector2d> class_balanced_waypoints(const World& world, int count, double margin_m,
                                                      std::uint64_t seed) {
  if (count < 2) throw ConfigError("need at least two waypoints");
  const int k = world.spec().num_classes;
  const double w = world.width_px() * world.spec().meters_per_pixel;
  const double h = world.height_px() * world.spec().meters_per_pixel;
  if (2.0 * margin_m >= w || 2.0 * margin_m >= h) throw ConfigError("waypoint margin leaves no room");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(margin_m, w - margin_m);
  std::uniform_real_distribution<double> uy(margin_m, h - margin_m);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(count));
  constexpr int kMaxDraws = 10000;
  for (int i = 0; i < count; ++i) {
    if (i % k == 0) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    const int target = order[static_cast<std::size_t>(i % k)];
    Eigen::Vector2d p(ux(rng), uy(rng));
    // A class missing from the interior falls back to the last uniform draw.
    for (int d = 0; d < kMaxDraws && world.class_at(p.x(), p.y()) != target; ++d) p = {ux(rng), uy(rng)};
    out.push_back(p);
  }
  return out;
}

std::vector<double> random_speeds(std::size_t count, double lo, double hi, std::uint64_t seed) {
  if (!(lo > 0.0 && lo <= hi)) throw ConfigError("speed range must satisfy 0 < lo <= hi");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(count);
  for (auto& v : out) v = u(rng);
  return out;
}

}  // namespace terrasense::synth
