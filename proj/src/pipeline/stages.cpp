#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

namespace terrasense::pipeline {

namespace {

struct Simulation {
  synth::BundleInfo info;
  synth::TraversalRecord record;
};

Simulation simulate(const PipelineConfig& config, bool validation) {
  config.validate();
  const auto spec = config.world_spec();
  const auto world = synth::generate_world(spec);
  const auto params = config.traversal_params(validation);
  const auto waypoints = synth::class_balanced_waypoints(world, config.num_waypoints, config.waypoint_margin_m,
                                                         config.stage_seed(validation ? 112 : 111));
  const auto speeds = synth::random_speeds(waypoints.size() - 1, config.speed_min_mps, config.speed_max_mps,
                                           config.stage_seed(validation ? 114 : 113));
  Simulation sim;
  sim.record = synth::simulate_traversal(world, waypoints, speeds, params);
  if (sim.record.clips.size() < params.max_clips) {
    throw StageError("generate", "path yields only " + std::to_string(sim.record.clips.size()) + " of " +
                                     std::to_string(params.max_clips) + " clips; add waypoints");
  }
  std::string fingerprint = synth::spec_fingerprint(spec, params);
  fingerprint += "waypoints=" + std::to_string(config.num_waypoints) +
                 "\nmargin_m=" + io::format_double(config.waypoint_margin_m) +
                 "\nspeed_min=" + io::format_double(config.speed_min_mps) +
                 "\nspeed_max=" + io::format_double(config.speed_max_mps) +
                 "\nvalidation=" + (validation ? "1" : "0") + "\n";
  sim.info.seed = config.seed;
  sim.info.spec_hash = hex64(fnv1a64(fingerprint));
  sim.info.num_classes = spec.num_classes;
  sim.info.meters_per_pixel = spec.meters_per_pixel;
  sim.info.camera_height_m = params.imaging.camera_height_m;
  sim.info.sample_rate_hz = params.audio.sample_rate_hz;
  sim.info.clip_duration_s = params.audio.clip_duration_s;
  return sim;
}

geometry::CameraModel bundle_camera(const synth::TrainingBundle& bundle, const RgbImage& image) {
  return geometry::CameraModel::birdseye(bundle.info.camera_height_m, bundle.info.meters_per_pixel, image.width,
                                         image.height);
}

// Runs f(i) for i in [0, n) on a few threads; results must go to disjoint slots.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  if (workers == 1 || n < 2 * workers) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    }));
  }
  for (auto& j : jobs) j.get();
}

std::vector<std::int16_t> flatten(const std::vector<LabelImage>& images) {
  std::vector<std::int16_t> out;
  for (const auto& img : images) out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

}  // namespace

Dataset generate_dataset(const PipelineConfig& config, bool validation) {
  const auto sim = simulate(config, validation);
  return {synth::to_training_bundle(sim.info, sim.record), synth::to_evaluation_truth(sim.record)};
}

void write_dataset(const std::filesystem::path& dir, const PipelineConfig& config, bool force) {
  const auto sim = simulate(config, false);
  synth::write_bundle(dir, sim.info, sim.record, force);
}

AudioInputs audio_inputs(const std::vector<dsp::AudioClip>& clips, const PipelineConfig& config,
                         const dsp::SpectrogramScaler* fitted, double snr_db, std::uint64_t noise_seed) {
  if (clips.empty()) throw InputError("no audio clips");
  dsp::SpectrogramScaler pooler;
  pooler.pooled_rows = config.pooled_rows;
  pooler.pooled_cols = config.pooled_cols;
  std::vector<Eigen::MatrixXd> pooled(clips.size());
  parallel_for(clips.size(), [&](std::size_t j) {
    const auto& clip = clips[j];
    const auto spec = std::isinf(snr_db) ? dsp::spectrogram(clip, config.stft)
                                         : dsp::spectrogram(dsp::add_noise(clip, snr_db, derive_seed(noise_seed, j)),
                                                            config.stft);
    pooled[j] = pooler.pooled_log(spec);
  });
  AudioInputs out;
  out.scaler = fitted ? *fitted : dsp::SpectrogramScaler::fit_pooled(pooled, config.pooled_rows, config.pooled_cols);
  out.x.resize(out.scaler.dimension(), static_cast<Eigen::Index>(clips.size()));
  for (std::size_t j = 0; j < clips.size(); ++j) out.x.col(static_cast<Eigen::Index>(j)) = out.scaler.transform_pooled(pooled[j]);
  return out;
}

std::vector<int> image_for_clips(const synth::TrainingBundle& bundle) {
  std::vector<int> out(bundle.clips.size(), -1);
  if (bundle.images.empty()) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    long best = -1;
    int best_gap = 0;
    for (std::size_t i = 0; i < bundle.images.size(); ++i) {
      const int gap = std::abs(bundle.images[i].clip_index - static_cast<int>(j));
      if (best < 0 || gap < best_gap) {
        best = static_cast<long>(i);
        best_gap = gap;
      }
    }
    out[j] = static_cast<int>(best);
  }
  return out;
}

std::vector<geometry::PathSegment> path_segments_in_image(const synth::TrainingBundle& bundle, int image_index,
                                                          const std::vector<int>& class_per_clip) {
  const auto& frame = bundle.images.at(static_cast<std::size_t>(image_index));
  const auto camera = bundle_camera(bundle, frame.image);
  const int hw = geometry::footprint_half_width_px(geometry::kFootprintRadiusM, bundle.info.meters_per_pixel);
  const double lo_c = -hw - 2.0;
  const double hi_c = frame.image.width + hw + 2.0;
  const double lo_r = -hw - 2.0;
  const double hi_r = frame.image.height + hw + 2.0;

  const auto& poses = bundle.poses;
  std::vector<geometry::PathSegment> out;
  auto add = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b, int clip) {
    const auto pa = geometry::project_point(a, camera, frame.frame_pose);
    const auto pb = geometry::project_point(b, camera, frame.frame_pose);
    if (!pa || !pb) return;
    if (std::max(pa->x(), pb->x()) < lo_c || std::min(pa->x(), pb->x()) > hi_c) return;
    if (std::max(pa->y(), pb->y()) < lo_r || std::min(pa->y(), pb->y()) > hi_r) return;
    out.push_back({*pa, *pb, class_per_clip.at(static_cast<std::size_t>(clip)), clip});
  };
  for (std::size_t j = 0; j < poses.size(); ++j) {
    const Eigen::Vector3d p = poses[j].position;
    const int clip = static_cast<int>(j);
    if (poses.size() == 1) add(p, p, clip);
    if (j > 0) add(0.5 * (poses[j - 1].position + p), p, clip);
    if (j + 1 < poses.size()) add(p, 0.5 * (p + poses[j + 1].position), clip);
  }
  return out;
}

ClipPatches clip_patches(const synth::TrainingBundle& bundle, const PipelineConfig& config) {
  const auto owner = image_for_clips(bundle);
  const std::vector<int> path_only(bundle.clips.size(), 0);
  const int hw = geometry::footprint_half_width_px(geometry::kFootprintRadiusM, bundle.info.meters_per_pixel);

  std::vector<geometry::PatchExtraction> per_image(bundle.images.size());
  parallel_for(bundle.images.size(), [&](std::size_t i) {
    const auto& frame = bundle.images[i];
    const auto camera = bundle_camera(bundle, frame.image);
    std::vector<geometry::PathSample> samples;
    for (std::size_t j = 0; j < owner.size(); ++j) {
      if (owner[j] != static_cast<int>(i)) continue;
      const auto px = geometry::project_point(bundle.poses[j].position, camera, frame.frame_pose);
      if (!px) continue;
      samples.push_back({*px, static_cast<int>(j), j});
    }
    if (samples.empty()) return;
    const auto segments = path_segments_in_image(bundle, static_cast<int>(i), path_only);
    auto raster = geometry::rasterize_segments(segments, frame.image.width, frame.image.height, hw);
    const geometry::WeakLabelImage weak{frame.image, std::move(raster.labels), std::move(raster.provenance)};
    per_image[i] = geometry::extract_patches(weak, samples, config.patch_px);
  });

  std::vector<geometry::TerrainPatch> patches;
  ClipPatches out;
  for (auto& ex : per_image) {
    for (auto& p : ex.patches) patches.push_back(std::move(p));
    for (auto& d : ex.diagnostics) out.diagnostics.push_back(std::move(d));
  }
  std::sort(patches.begin(), patches.end(), [](const auto& a, const auto& b) { return a.clip_index < b.clip_index; });
  for (const auto& p : patches) out.clip_of_column.push_back(p.clip_index);
  for (std::size_t j = 0; j < owner.size(); ++j) {
    if (owner[j] < 0) out.diagnostics.push_back("clip " + std::to_string(j) + ": no image");
  }
  if (patches.empty()) throw StageError("features", "no clip produced a terrain patch");
  out.features = triplets::visual_features(patches);
  return out;
}

std::vector<triplets::Triplet> form_triplets(const ClipPatches& patches, const PipelineConfig& config,
                                             const std::vector<int>* truth) {
  const auto mechanism = config.correct_ratio ? triplets::SamplingMechanism::parse("ground_truth") : config.mechanism;
  const bool needs_truth = config.correct_ratio || mechanism.negative == triplets::NegativeRule::ground_truth_ref;
  if (needs_truth && !truth) throw ConfigError("this triplet variant needs the evaluation truth");

  std::vector<int> local_truth;
  if (truth) {
    for (int clip : patches.clip_of_column) local_truth.push_back(truth->at(static_cast<std::size_t>(clip)));
  }
  triplets::SamplingOptions opt;
  opt.k = config.num_classes;
  opt.seed = config.stage_seed(3);
  opt.kmeans_restarts = config.kmeans_restarts;
  if (needs_truth) opt.reference_labels = local_truth;
  auto local = triplets::sample_triplets(patches.features, mechanism, config.triplet_count, opt);
  if (config.correct_ratio) local = triplets::corrupt_triplets(local, local_truth, *config.correct_ratio, config.stage_seed(8));

  std::vector<triplets::Triplet> out;
  out.reserve(local.size());
  const auto& map = patches.clip_of_column;
  for (const auto& t : local) {
    out.push_back({map[static_cast<std::size_t>(t.anchor)], map[static_cast<std::size_t>(t.positive)],
                   map[static_cast<std::size_t>(t.negative)]});
  }
  return out;
}

ClusterOutput cluster_embeddings(const Eigen::MatrixXd& embeddings, const PipelineConfig& config) {
  cluster::KMeansParams p;
  p.k = config.num_classes;
  p.seed = config.stage_seed(5);
  p.restarts = config.kmeans_restarts;
  auto a = cluster::kmeans(embeddings, p);
  return {embeddings, std::move(a.labels), std::move(a.centroids)};
}

std::vector<int> label_clips(const AudioClusterer& clusterer, const std::vector<dsp::AudioClip>& clips,
                             const PipelineConfig& config, double snr_db, std::uint64_t noise_seed) {
  const auto in = audio_inputs(clips, config, &clusterer.scaler, snr_db, noise_seed);
  return cluster::assign_to_centroids(clusterer.model.encode(in.x), clusterer.centroids);
}

std::vector<LabelImage> weak_label_images(const synth::TrainingBundle& bundle, const std::vector<int>& clip_labels) {
  if (clip_labels.size() != bundle.clips.size()) throw InputError("one label per clip expected");
  const int hw = geometry::footprint_half_width_px(geometry::kFootprintRadiusM, bundle.info.meters_per_pixel);
  std::vector<LabelImage> out(bundle.images.size());
  parallel_for(bundle.images.size(), [&](std::size_t i) {
    const auto& img = bundle.images[i].image;
    const auto segments = path_segments_in_image(bundle, static_cast<int>(i), clip_labels);
    auto labels = geometry::rasterize_segments(segments, img.width, img.height, hw).labels;
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (img.data[p] == kVoidColor) labels.data[p] = static_cast<std::int16_t>(kVoid);
    }
    out[i] = std::move(labels);
  });
  return out;
}

seg::SegTrainResult train_weak_segmenter(const std::vector<const synth::TrainingBundle*>& bundles,
                                         const std::vector<const std::vector<LabelImage>*>& weak,
                                         const PipelineConfig& config) {
  if (bundles.size() != weak.size()) throw InputError("one weak label set per bundle expected");
  std::vector<seg::LabeledImage> images;
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    if (weak[b]->size() != bundles[b]->images.size()) throw InputError("one weak mask per image expected");
    for (std::size_t i = 0; i < bundles[b]->images.size(); ++i) {
      images.push_back({&bundles[b]->images[i].image, &(*weak[b])[i]});
    }
  }
  auto cfg = config.seg;
  cfg.num_classes = config.num_classes;
  cfg.seed = config.stage_seed(6);
  return seg::train_segmenter(images, cfg);
}

SegEvaluation evaluate_segmenter(const seg::SegModel& model, const synth::TrainingBundle& bundle,
                                 const synth::EvaluationTruth& truth, const std::vector<LabelImage>& weak,
                                 const std::vector<int>& label_to_class) {
  if (truth.image_truth.size() != bundle.images.size() || weak.size() != bundle.images.size()) {
    throw InputError("truth, weak labels and images must align");
  }
  std::vector<LabelImage> predicted(bundle.images.size());
  parallel_for(bundle.images.size(), [&](std::size_t i) { predicted[i] = seg::predict_mask(bundle.images[i].image, model).mask; });

  auto labels = flatten(predicted);
  const auto weak_flat = flatten(weak);
  const int k = model.num_classes();
  SegEvaluation ev;
  ev.recall = cluster::recall_scores(labels, weak_flat, k);
  for (auto& v : labels) {
    if (v < 0) continue;
    const int c = v < static_cast<int>(label_to_class.size()) ? label_to_class[static_cast<std::size_t>(v)] : -1;
    v = static_cast<std::int16_t>(c >= 0 ? c : kBackground);
  }
  ev.iou = cluster::iou_scores(labels, flatten(truth.image_truth), k);
  return ev;
}

RunOutput run_pipeline(const Dataset& data, const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  const auto& bundle = data.bundle;
  const auto& truth = data.truth.clip_classes;
  if (truth.size() != bundle.clips.size()) throw InputError("clip truth does not match the bundle");

  RunOutput out;
  AudioInputs inputs;
  try {
    inputs = audio_inputs(bundle.clips, config);
  } catch (const InputError& e) {
    throw StageError("spectrogram", e.what());
  }
  ClipPatches patches;
  try {
    patches = clip_patches(bundle, config);
  } catch (const InputError& e) {
    throw StageError("features", e.what());
  }
  try {
    out.triplets = form_triplets(patches, config, &truth);
  } catch (const InputError& e) {
    throw StageError("triplets", e.what());
  }

  auto train_cfg = config.train;
  train_cfg.seed = config.stage_seed(4);
  out.training = metric::train(inputs.x, out.triplets, train_cfg);
  if (out.training.diverged) throw StageError("train-encoder", out.training.diagnostic);

  const auto clusters = cluster_embeddings(out.training.model.encode(inputs.x), config);
  out.clusterer = {inputs.scaler, out.training.model, clusters.centroids};
  out.clip_clusters = clusters.labels;

  const int k = config.num_classes;
  auto& m = out.metrics;
  m.clustering_accuracy = cluster::clustering_accuracy(out.clip_clusters, truth);
  m.nmi = cluster::nmi(truth, out.clip_clusters);
  m.triplet_correctness = triplets::triplet_correctness(out.triplets, truth);
  out.cluster_to_class = cluster::best_mapping(out.clip_clusters, truth, k, k);
  out.confusion = cluster::contingency(truth, out.clip_clusters, k, k);

  if (options.segmentation) {
    out.weak_labels = weak_label_images(bundle, out.clip_clusters);
    try {
      out.segmenter = train_weak_segmenter({&bundle}, {&out.weak_labels}, config);
    } catch (const ConfigError& e) {
      throw StageError("train-seg", e.what());
    }
    if (out.segmenter->diverged) throw StageError("train-seg", out.segmenter->diagnostic);
    const auto ev = evaluate_segmenter(out.segmenter->model, bundle, data.truth, out.weak_labels, out.cluster_to_class);
    m.miou = ev.iou.mean;
    m.mean_recall = ev.recall.mean;
  }

  if (options.validation) {
    const auto val = generate_dataset(config, true);
    const auto labels = label_clips(out.clusterer, val.bundle.clips, config, config.snr_db, config.stage_seed(7));
    m.validation_accuracy = cluster::clustering_accuracy(labels, val.truth.clip_classes);
    m.validation_nmi = cluster::nmi(val.truth.clip_classes, labels);
  }
  return out;
}

}  // namespace terrasense::pipeline
