#include <algorithm>
#include <cmath>
#include <set>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

namespace terrasense::pipeline {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",
      "world.preset", "world.num_classes", "world.separation_hz", "world.size_m", "world.meters_per_pixel",
      "world.hue_shift_deg", "world.brightness_shift",
      "traversal.num_clips", "traversal.validation_clips", "traversal.waypoints", "traversal.margin_m",
      "traversal.speed_min", "traversal.speed_max", "traversal.image_every", "traversal.image_size",
      "traversal.camera_height_m",
      "audio.clip_duration_s", "audio.band_jitter_hz", "audio.hum_base_hz", "audio.hum_hz_per_mps",
      "audio.hum_amplitude", "audio.ambient_probability", "audio.ambient_amplitude", "audio.window_size", "audio.hop",
      "audio.window", "audio.pooled_rows", "audio.pooled_cols", "audio.snr_db",
      "triplets.patch_px", "triplets.mechanism", "triplets.count", "triplets.correct_ratio",
      "train.alpha", "train.beta", "train.epochs", "train.batch_size", "train.learning_rate", "train.momentum",
      "train.optimizer", "train.hidden", "train.embedding_dim",
      "cluster.restarts",
      "seg.hidden", "seg.epochs", "seg.batch_size", "seg.pixels_per_image", "seg.learning_rate",
      "experiment.grid", "experiment.seeds",
      "plan.class_costs", "plan.unknown_cost",
  };
  return keys;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += i ? "," : "";
    out += std::isinf(v[i]) ? "inf" : io::format_double(v[i]);
  }
  return out;
}

int as_int(const KeyValueConfig& kv, const std::string& key, int fallback) {
  return static_cast<int>(kv.get_int(key, fallback));
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key: " + key);
  }
  PipelineConfig c;
  c.seed = kv.get_uint("seed", c.seed);
  c.world_preset = kv.get_string("world.preset", c.world_preset);
  c.num_classes = as_int(kv, "world.num_classes", c.num_classes);
  c.separation_hz = kv.get_double("world.separation_hz", c.separation_hz);
  c.world_size_m = kv.get_double("world.size_m", c.world_size_m);
  c.meters_per_pixel = kv.get_double("world.meters_per_pixel", c.meters_per_pixel);
  if (kv.has("world.hue_shift_deg") || kv.has("world.brightness_shift")) {
    c.domain_shift = synth::DomainShift{kv.get_double("world.hue_shift_deg", 0.0),
                                        kv.get_double("world.brightness_shift", 0.0)};
  }
  c.num_clips = kv.get_uint("traversal.num_clips", c.num_clips);
  c.validation_clips = kv.get_uint("traversal.validation_clips", c.validation_clips);
  c.num_waypoints = as_int(kv, "traversal.waypoints", c.num_waypoints);
  c.waypoint_margin_m = kv.get_double("traversal.margin_m", c.waypoint_margin_m);
  c.speed_min_mps = kv.get_double("traversal.speed_min", c.speed_min_mps);
  c.speed_max_mps = kv.get_double("traversal.speed_max", c.speed_max_mps);
  c.imaging.image_every_clips = as_int(kv, "traversal.image_every", c.imaging.image_every_clips);
  c.imaging.image_size_px = as_int(kv, "traversal.image_size", c.imaging.image_size_px);
  c.imaging.camera_height_m = kv.get_double("traversal.camera_height_m", c.imaging.camera_height_m);

  c.audio.clip_duration_s = kv.get_double("audio.clip_duration_s", c.audio.clip_duration_s);
  c.audio.band_jitter_hz = kv.get_double("audio.band_jitter_hz", c.audio.band_jitter_hz);
  c.audio.hum_base_hz = kv.get_double("audio.hum_base_hz", c.audio.hum_base_hz);
  c.audio.hum_hz_per_mps = kv.get_double("audio.hum_hz_per_mps", c.audio.hum_hz_per_mps);
  c.audio.hum_amplitude = kv.get_double("audio.hum_amplitude", c.audio.hum_amplitude);
  c.audio.ambient_probability = kv.get_double("audio.ambient_probability", c.audio.ambient_probability);
  c.audio.ambient_amplitude = kv.get_double("audio.ambient_amplitude", c.audio.ambient_amplitude);
  c.stft.window_size = as_int(kv, "audio.window_size", c.stft.window_size);
  c.stft.hop = as_int(kv, "audio.hop", c.stft.hop);
  c.stft.window = dsp::parse_window(kv.get_string("audio.window", dsp::to_string(c.stft.window)));
  c.pooled_rows = as_int(kv, "audio.pooled_rows", c.pooled_rows);
  c.pooled_cols = as_int(kv, "audio.pooled_cols", c.pooled_cols);
  if (kv.has("audio.snr_db")) {
    const auto v = kv.get_doubles("audio.snr_db", {});
    if (v.size() != 1) throw ConfigError("audio.snr_db takes one value");
    c.snr_db = v.front();
  }

  c.patch_px = as_int(kv, "triplets.patch_px", c.patch_px);
  if (kv.has("triplets.mechanism")) c.mechanism = triplets::SamplingMechanism::parse(kv.get_string("triplets.mechanism", ""));
  c.triplet_count = kv.get_uint("triplets.count", c.triplet_count);
  if (kv.has("triplets.correct_ratio")) c.correct_ratio = kv.get_double("triplets.correct_ratio", 1.0);

  c.train.alpha = kv.get_double("train.alpha", c.train.alpha);
  c.train.beta = kv.get_double("train.beta", c.train.beta);
  c.train.epochs = as_int(kv, "train.epochs", c.train.epochs);
  c.train.batch_size = as_int(kv, "train.batch_size", c.train.batch_size);
  c.train.optimizer.learning_rate = kv.get_double("train.learning_rate", c.train.optimizer.learning_rate);
  c.train.optimizer.momentum = kv.get_double("train.momentum", c.train.optimizer.momentum);
  c.train.optimizer.kind = nn::parse_optimizer(kv.get_string("train.optimizer", nn::to_string(c.train.optimizer.kind)));
  if (kv.has("train.hidden")) {
    c.train.shape.hidden.clear();
    for (double h : kv.get_doubles("train.hidden", {})) c.train.shape.hidden.push_back(static_cast<int>(h));
  }
  c.train.shape.embedding_dim = as_int(kv, "train.embedding_dim", c.train.shape.embedding_dim);
  c.train.shape.input_dim = c.pooled_rows * c.pooled_cols;
  c.kmeans_restarts = as_int(kv, "cluster.restarts", c.kmeans_restarts);

  c.seg.hidden = as_int(kv, "seg.hidden", c.seg.hidden);
  c.seg.epochs = as_int(kv, "seg.epochs", c.seg.epochs);
  c.seg.batch_size = as_int(kv, "seg.batch_size", c.seg.batch_size);
  c.seg.pixels_per_image = kv.get_uint("seg.pixels_per_image", c.seg.pixels_per_image);
  c.seg.optimizer.learning_rate = kv.get_double("seg.learning_rate", c.seg.optimizer.learning_rate);

  c.grid = kv.get_doubles("experiment.grid", c.grid);
  if (kv.has("experiment.seeds")) {
    c.seeds.clear();
    for (double s : kv.get_doubles("experiment.seeds", {})) {
      if (s < 0 || s != std::floor(s)) throw ConfigError("experiment.seeds must be non-negative integers");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  c.class_costs = kv.get_doubles("plan.class_costs", c.class_costs);
  c.unknown_cost = kv.get_double("plan.unknown_cost", c.unknown_cost);
  c.validate();
  return c;
}

KeyValueConfig PipelineConfig::to_kv() const {
  using io::format_double;
  KeyValueConfig kv;
  kv.set("seed", std::to_string(seed));
  kv.set("world.preset", world_preset);
  kv.set("world.num_classes", std::to_string(num_classes));
  kv.set("world.separation_hz", format_double(separation_hz));
  kv.set("world.size_m", format_double(world_size_m));
  kv.set("world.meters_per_pixel", format_double(meters_per_pixel));
  if (domain_shift) {
    kv.set("world.hue_shift_deg", format_double(domain_shift->hue_deg));
    kv.set("world.brightness_shift", format_double(domain_shift->brightness));
  }
  kv.set("traversal.num_clips", std::to_string(num_clips));
  kv.set("traversal.validation_clips", std::to_string(validation_clips));
  kv.set("traversal.waypoints", std::to_string(num_waypoints));
  kv.set("traversal.margin_m", format_double(waypoint_margin_m));
  kv.set("traversal.speed_min", format_double(speed_min_mps));
  kv.set("traversal.speed_max", format_double(speed_max_mps));
  kv.set("traversal.image_every", std::to_string(imaging.image_every_clips));
  kv.set("traversal.image_size", std::to_string(imaging.image_size_px));
  kv.set("traversal.camera_height_m", format_double(imaging.camera_height_m));
  kv.set("audio.clip_duration_s", format_double(audio.clip_duration_s));
  kv.set("audio.band_jitter_hz", format_double(audio.band_jitter_hz));
  kv.set("audio.hum_base_hz", format_double(audio.hum_base_hz));
  kv.set("audio.hum_hz_per_mps", format_double(audio.hum_hz_per_mps));
  kv.set("audio.hum_amplitude", format_double(audio.hum_amplitude));
  kv.set("audio.ambient_probability", format_double(audio.ambient_probability));
  kv.set("audio.ambient_amplitude", format_double(audio.ambient_amplitude));
  kv.set("audio.window_size", std::to_string(stft.window_size));
  kv.set("audio.hop", std::to_string(stft.hop));
  kv.set("audio.window", dsp::to_string(stft.window));
  kv.set("audio.pooled_rows", std::to_string(pooled_rows));
  kv.set("audio.pooled_cols", std::to_string(pooled_cols));
  kv.set("audio.snr_db", join({snr_db}));
  kv.set("triplets.patch_px", std::to_string(patch_px));
  kv.set("triplets.mechanism", mechanism.to_string());
  kv.set("triplets.count", std::to_string(triplet_count));
  if (correct_ratio) kv.set("triplets.correct_ratio", format_double(*correct_ratio));
  kv.set("train.alpha", format_double(train.alpha));
  kv.set("train.beta", format_double(train.beta));
  kv.set("train.epochs", std::to_string(train.epochs));
  kv.set("train.batch_size", std::to_string(train.batch_size));
  kv.set("train.learning_rate", format_double(train.optimizer.learning_rate));
  kv.set("train.momentum", format_double(train.optimizer.momentum));
  kv.set("train.optimizer", nn::to_string(train.optimizer.kind));
  std::vector<double> hidden(train.shape.hidden.begin(), train.shape.hidden.end());
  kv.set("train.hidden", join(hidden));
  kv.set("train.embedding_dim", std::to_string(train.shape.embedding_dim));
  kv.set("cluster.restarts", std::to_string(kmeans_restarts));
  kv.set("seg.hidden", std::to_string(seg.hidden));
  kv.set("seg.epochs", std::to_string(seg.epochs));
  kv.set("seg.batch_size", std::to_string(seg.batch_size));
  kv.set("seg.pixels_per_image", std::to_string(seg.pixels_per_image));
  kv.set("seg.learning_rate", format_double(seg.optimizer.learning_rate));
  if (!grid.empty()) kv.set("experiment.grid", join(grid));
  std::vector<double> s(seeds.begin(), seeds.end());
  kv.set("experiment.seeds", join(s));
  if (!class_costs.empty()) kv.set("plan.class_costs", join(class_costs));
  kv.set("plan.unknown_cost", format_double(unknown_cost));
  return kv;
}

void PipelineConfig::validate() const {
  if (world_preset != "easy" && world_preset != "hard") throw ConfigError("world.preset must be easy or hard");
  if (num_classes < 2) throw ConfigError("world.num_classes must be >= 2");
  if (separation_hz < 0.0) throw ConfigError("world.separation_hz must be >= 0");
  if (!(world_size_m > 0.0) || !(meters_per_pixel > 0.0)) throw ConfigError("world size and resolution must be positive");
  if (num_clips < static_cast<std::size_t>(num_classes) + 1) throw ConfigError("traversal.num_clips too small");
  if (num_waypoints < 2) throw ConfigError("traversal.waypoints must be >= 2");
  if (!(speed_min_mps > 0.0 && speed_min_mps <= speed_max_mps && speed_max_mps <= 2.0)) {
    throw ConfigError("traversal speeds must satisfy 0 < min <= max <= 2");
  }
  if (imaging.image_every_clips < 1 || imaging.image_size_px < 16) {
    throw ConfigError("traversal.image_every must be >= 1 and image_size >= 16");
  }
  if (pooled_rows < 1 || pooled_cols < 1) throw ConfigError("pooled grid must be positive");
  if (pooled_rows * pooled_cols != train.shape.input_dim) {
    throw ConfigError("encoder input must match the pooled grid");
  }
  if (patch_px < 1) throw ConfigError("triplets.patch_px must be >= 1");
  if (triplet_count < 1) throw ConfigError("triplets.count must be >= 1");
  if (correct_ratio && !(*correct_ratio >= 0.0 && *correct_ratio <= 1.0)) {
    throw ConfigError("triplets.correct_ratio must lie in [0, 1]");
  }
  train.validate();
  seg.validate();
  if (kmeans_restarts < 1) throw ConfigError("cluster.restarts must be >= 1");
  for (double c : class_costs) {
    if (!(c > 0.0)) throw ConfigError("plan.class_costs entries must be positive");
  }
  if (!(unknown_cost > 0.0)) throw ConfigError("plan.unknown_cost must be positive");
}

synth::WorldSpec PipelineConfig::world_spec() const {
  synth::WorldSpec spec = world_preset == "hard" ? synth::hard_world_spec(seed) : synth::easy_world_spec(seed);
  const double preset_sep = world_preset == "hard" ? 15.0 : 900.0;
  spec.width_m = world_size_m;
  spec.height_m = world_size_m;
  spec.meters_per_pixel = meters_per_pixel;
  if (num_classes != spec.num_classes || separation_hz > 0.0) {
    spec.num_classes = num_classes;
    spec.class_params = synth::make_class_params(num_classes, separation_hz > 0.0 ? separation_hz : preset_sep, seed);
  }
  spec.domain_shift = domain_shift;
  return spec;
}

synth::TraversalParams PipelineConfig::traversal_params(bool validation) const {
  synth::TraversalParams p;
  p.audio = audio;
  p.imaging = imaging;
  p.max_clips = validation ? validation_clips : num_clips;
  p.seed = stage_seed(validation ? 102 : 101);
  return p;
}

}  // namespace terrasense::pipeline
