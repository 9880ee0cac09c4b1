#include <cmath>
#include <cstdio>
#include <functional>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

namespace terrasense::pipeline {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, i, ext);
  return buf;
}

fs::path stage_dir(const fs::path& out, const char* name) {
  const auto dir = out / name;
  fs::create_directories(dir);
  return dir;
}

const fs::path& require(const fs::path& p, const char* producer) {
  if (!fs::exists(p)) throw ConfigError("missing " + p.string() + " (run " + producer + " first)");
  return p;
}

// Library errors inside a stage become stage failures; configuration errors stay usage errors.
void guarded(const char* name, const std::function<void()>& body) {
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_scaler(const fs::path& path, const dsp::SpectrogramScaler& s) {
  KeyValueConfig kv;
  kv.set("log_min", io::format_double(s.log_min));
  kv.set("log_max", io::format_double(s.log_max));
  kv.set("pooled_rows", std::to_string(s.pooled_rows));
  kv.set("pooled_cols", std::to_string(s.pooled_cols));
  io::write_text(path, kv.to_text());
}

dsp::SpectrogramScaler read_scaler(const fs::path& path) {
  const auto kv = KeyValueConfig::load(path);
  dsp::SpectrogramScaler s;
  s.log_min = kv.get_double("log_min", 0.0);
  s.log_max = kv.get_double("log_max", 1.0);
  s.pooled_rows = static_cast<int>(kv.get_int("pooled_rows", 16));
  s.pooled_cols = static_cast<int>(kv.get_int("pooled_cols", 16));
  return s;
}

void write_int_column(const fs::path& path, const std::string& key, const std::string& name,
                      const std::vector<int>& values, const std::vector<int>* keys = nullptr) {
  io::CsvTable t;
  t.header = {key, name};
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.rows.push_back({std::to_string(keys ? (*keys)[i] : static_cast<int>(i)), std::to_string(values[i])});
  }
  io::write_csv(path, t);
}

std::vector<int> read_int_column(const fs::path& path, const std::string& name, std::vector<int>* keys = nullptr) {
  const auto t = io::read_csv(path);
  const auto col = t.column(name);
  std::vector<int> out;
  for (const auto& r : t.rows) {
    out.push_back(std::stoi(r.at(col)));
    if (keys) keys->push_back(std::stoi(r.at(0)));
  }
  return out;
}

metric::EncoderDecoder read_encoder(const fs::path& path) {
  auto nets = nn::read_checkpoint(path);
  if (nets.empty() || nets.size() > 2) throw InputError("encoder checkpoint holds " + std::to_string(nets.size()) + " networks");
  metric::EncoderDecoder m;
  m.encoder = std::move(nets[0]);
  if (nets.size() == 2) m.decoder = std::move(nets[1]);
  return m;
}

std::vector<LabelImage> read_weak(const fs::path& dir, std::size_t count) {
  std::vector<LabelImage> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(io::read_label_pgm(require(dir / numbered("weak", i, "pgm"), "label")));
  return out;
}

std::vector<double> cost_table(const PipelineConfig& config, int k) {
  if (config.class_costs.empty()) return std::vector<double>(static_cast<std::size_t>(k), 1.0);
  if (static_cast<int>(config.class_costs.size()) != k) {
    throw ConfigError("plan.class_costs needs " + std::to_string(k) + " entries");
  }
  return config.class_costs;
}

}  // namespace

void write_metrics_csv(const fs::path& path, const RunMetrics& m, const SegEvaluation* seg) {
  io::CsvTable t;
  t.header = {"metric", "class", "value"};
  auto add = [&](const std::string& k, const std::string& cls, double v) { t.rows.push_back({k, cls, io::format_double(v)}); };
  add("clustering_accuracy", "all", m.clustering_accuracy);
  add("nmi", "all", m.nmi);
  add("triplet_correctness", "all", m.triplet_correctness);
  add("miou", "all", m.miou);
  add("mean_recall", "all", m.mean_recall);
  if (!std::isnan(m.validation_accuracy)) add("validation_accuracy", "all", m.validation_accuracy);
  if (!std::isnan(m.validation_nmi)) add("validation_nmi", "all", m.validation_nmi);
  if (seg) {
    for (std::size_t c = 0; c < seg->iou.per_class.size(); ++c) add("iou", std::to_string(c), seg->iou.per_class[c]);
    // Recall is measured in label (cluster) space against the weak masks.
    for (std::size_t c = 0; c < seg->recall.per_class.size(); ++c) add("recall", std::to_string(c), seg->recall.per_class[c]);
  }
  io::write_csv(path, t);
}

namespace stages {

void spectrogram(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("spectrogram", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto dir = stage_dir(out, "spectrogram");
    const auto in = audio_inputs(bundle.clips, config);
    io::write_matrix(dir / "inputs.tsmat", in.x);
    write_scaler(dir / "scaler.txt", in.scaler);
    const std::size_t previews = std::min<std::size_t>(bundle.clips.size(), 3);
    for (std::size_t j = 0; j < previews; ++j) {
      dsp::write_spectrogram_pgm(dir / numbered("clip", j, "pgm"), dsp::spectrogram(bundle.clips[j], config.stft));
    }
  });
}

void features(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("features", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto dir = stage_dir(out, "features");
    const auto p = clip_patches(bundle, config);
    io::write_matrix(dir / "features.tsmat", p.features);
    write_int_column(dir / "columns.csv", "column", "clip_index", p.clip_of_column);
    std::string diag;
    for (const auto& d : p.diagnostics) diag += d + "\n";
    io::write_text(dir / "diagnostics.txt", diag);
  });
}

void make_triplets(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("triplets", [&] {
    ClipPatches p;
    p.features = io::read_matrix(require(out / "features" / "features.tsmat", "features"));
    p.clip_of_column = read_int_column(require(out / "features" / "columns.csv", "features"), "clip_index");
    const bool needs_truth = config.correct_ratio || config.mechanism.negative == triplets::NegativeRule::ground_truth_ref;
    std::vector<int> truth;
    if (needs_truth) truth = synth::read_evaluation_truth(bundle_dir).clip_classes;
    const auto t = form_triplets(p, config, needs_truth ? &truth : nullptr);
    triplets::write_triplets_csv(stage_dir(out, "triplets") / "triplets.csv", t);
  });
}

void train_encoder(const fs::path&, const fs::path& out, const PipelineConfig& config) {
  guarded("train-encoder", [&] {
    const auto x = io::read_matrix(require(out / "spectrogram" / "inputs.tsmat", "spectrogram"));
    const auto t = triplets::read_triplets_csv(require(out / "triplets" / "triplets.csv", "triplets"));
    auto cfg = config.train;
    cfg.seed = config.stage_seed(4);
    const auto result = metric::train(x, t, cfg);
    const auto dir = stage_dir(out, "encoder");
    metric::write_loss_trace_csv(dir / "loss_trace.csv", result.trace);
    if (result.diverged) throw StageError("train-encoder", result.diagnostic);
    const std::vector<nn::Mlp> nets{result.model.encoder, result.model.decoder};
    nn::write_checkpoint(dir / "model.ckpt", nets);
  });
}

void cluster(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("cluster", [&] {
    const auto x = io::read_matrix(require(out / "spectrogram" / "inputs.tsmat", "spectrogram"));
    const auto model = read_encoder(require(out / "encoder" / "model.ckpt", "train-encoder"));
    const auto c = cluster_embeddings(model.encode(x), config);
    const auto dir = stage_dir(out, "cluster");
    io::write_matrix(dir / "embeddings.tsmat", c.embeddings);
    io::write_matrix(dir / "centroids.tsmat", c.centroids);
    write_int_column(dir / "clusters.csv", "clip_index", "cluster", c.labels);
    io::write_text(dir / "source.txt", KeyValueConfig::load(bundle_dir / "manifest.txt").get_string("spec_hash", "") + "\n");
  });
}

/*
 * Clips of the bundle the clusters were fitted on keep their cluster ids; any
 * other bundle (a second domain) is labeled by the trained clusterer.
 */
void label(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("label", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto source = io::read_text(require(out / "cluster" / "source.txt", "cluster"));
    std::vector<int> labels;
    if (source == bundle.info.spec_hash + "\n") {
      labels = read_int_column(out / "cluster" / "clusters.csv", "cluster");
    } else {
      AudioClusterer c;
      c.scaler = read_scaler(require(out / "spectrogram" / "scaler.txt", "spectrogram"));
      c.model = read_encoder(require(out / "encoder" / "model.ckpt", "train-encoder"));
      c.centroids = io::read_matrix(require(out / "cluster" / "centroids.tsmat", "cluster"));
      labels = label_clips(c, bundle.clips, config);
    }
    const auto weak = weak_label_images(bundle, labels);
    const auto dir = stage_dir(out, "labels");
    write_int_column(dir / "clip_labels.csv", "clip_index", "label", labels);
    for (std::size_t i = 0; i < weak.size(); ++i) io::write_label_pgm(dir / numbered("weak", i, "pgm"), weak[i]);
  });
}

void train_seg(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("train-seg", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto weak = read_weak(out / "labels", bundle.images.size());
    const auto result = train_weak_segmenter({&bundle}, {&weak}, config);
    const auto dir = stage_dir(out, "seg");
    io::CsvTable t;
    t.header = {"epoch", "loss"};
    for (std::size_t e = 0; e < result.trace.size(); ++e) t.rows.push_back({std::to_string(e), io::format_double(result.trace[e])});
    io::write_csv(dir / "loss_trace.csv", t);
    if (result.diverged) throw StageError("train-seg", result.diagnostic);
    seg::write_seg_model(dir / "model.ckpt", result.model);
  });
}

void evaluate(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  guarded("evaluate", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto truth = synth::read_evaluation_truth(bundle_dir);
    const auto labels = read_int_column(require(out / "cluster" / "clusters.csv", "cluster"), "cluster");
    const auto t = triplets::read_triplets_csv(require(out / "triplets" / "triplets.csv", "triplets"));
    const int k = config.num_classes;
    RunMetrics m;
    m.clustering_accuracy = cluster::clustering_accuracy(labels, truth.clip_classes);
    m.nmi = cluster::nmi(truth.clip_classes, labels);
    m.triplet_correctness = triplets::triplet_correctness(t, truth.clip_classes);
    const auto dir = stage_dir(out, "evaluate");
    cluster::write_confusion_csv(dir / "confusion.csv", cluster::contingency(truth.clip_classes, labels, k, k));

    std::optional<SegEvaluation> ev;
    if (fs::exists(out / "seg" / "model.ckpt")) {
      const auto model = seg::read_seg_model(out / "seg" / "model.ckpt");
      const auto weak = read_weak(out / "labels", bundle.images.size());
      ev = evaluate_segmenter(model, bundle, truth, weak, cluster::best_mapping(labels, truth.clip_classes, k, k));
      m.miou = ev->iou.mean;
      m.mean_recall = ev->recall.mean;
    }
    write_metrics_csv(dir / "metrics.csv", m, ev ? &*ev : nullptr);
  });
}

void map(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  const auto model_path = out / "seg" / "model.ckpt";
  require(model_path, "train-seg");
  guarded("map", [&] {
    const auto bundle = synth::read_training_bundle(bundle_dir);
    const auto model = seg::read_seg_model(model_path);
    const double mpp = bundle.info.meters_per_pixel;
    const int cells = static_cast<int>(std::lround(config.world_size_m / mpp));
    mapplan::SemanticMap sem(cells, cells, model.num_classes(), mpp);
    const auto dir = stage_dir(out, "map");
    std::string diag;
    for (const auto& frame : bundle.images) {
      const auto mask = seg::predict_mask(frame.image, model).mask;
      const auto camera = geometry::CameraModel::birdseye(bundle.info.camera_height_m, mpp, mask.width, mask.height);
      const auto report = mapplan::fuse_observation(sem, mask, frame.frame_pose, camera);
      for (const auto& d : report.diagnostics) diag += d + "\n";
    }
    io::write_label_pgm(dir / "semantic_map.pgm", sem.classes());
    io::write_text(dir / "diagnostics.txt", diag);
  });
}

void plan(const fs::path& out, const PipelineConfig& config, const PlanRequest& request) {
  const auto map_path = out / "map" / "semantic_map.pgm";
  require(map_path, "map");
  guarded("plan", [&] {
    const auto classes = io::read_label_pgm(map_path);
    int k = config.num_classes;
    for (auto v : classes.data) k = std::max(k, v + 1);
    const auto table = cost_table(config, k);
    const auto terrain_costs = mapplan::assign_costs(classes, table, config.unknown_cost);
    const auto uniform_costs = mapplan::assign_costs(classes, std::vector<double>(static_cast<std::size_t>(k), 1.0),
                                                     config.unknown_cost);
    for (const auto& c : {request.start, request.goal}) {
      if (!terrain_costs.contains(c.row, c.col)) {
        throw ConfigError("plan endpoint (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ") outside the map");
      }
    }
    const auto uniform = mapplan::plan(uniform_costs, request.start, request.goal);
    const auto terrain = mapplan::plan(terrain_costs, request.start, request.goal);
    if (!uniform.found || !terrain.found) throw StageError("plan", "goal unreachable");
    const auto dir = stage_dir(out, "plan");
    mapplan::write_trajectory_csv(dir / "uniform.csv", uniform);
    mapplan::write_trajectory_csv(dir / "terrain.csv", terrain);
    io::CsvTable t;
    t.header = {"trajectory", "cells", "cost_uniform", "cost_terrain"};
    for (const auto& [name, tr] : {std::pair{"uniform", &uniform}, std::pair{"terrain", &terrain}}) {
      t.rows.push_back({name, std::to_string(tr->cells.size()), io::format_double(mapplan::path_cost(uniform_costs, tr->cells)),
                        io::format_double(mapplan::path_cost(terrain_costs, tr->cells))});
    }
    io::write_csv(dir / "report.csv", t);
  });
}

void all(const fs::path& bundle_dir, const fs::path& out, const PipelineConfig& config) {
  spectrogram(bundle_dir, out, config);
  features(bundle_dir, out, config);
  make_triplets(bundle_dir, out, config);
  train_encoder(bundle_dir, out, config);
  cluster(bundle_dir, out, config);
  label(bundle_dir, out, config);
  train_seg(bundle_dir, out, config);
  evaluate(bundle_dir, out, config);
}

}  // namespace stages

}  // namespace terrasense::pipeline
