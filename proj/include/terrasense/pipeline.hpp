#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/audio_dsp.hpp"
#include "terrasense/cluster_eval.hpp"
#include "terrasense/config.hpp"
#include "terrasense/mapplan.hpp"
#include "terrasense/metric_learn.hpp"
#include "terrasense/seglearn.hpp"
#include "terrasense/synthgen.hpp"
#include "terrasense/triplets.hpp"

namespace terrasense::pipeline {

struct PipelineConfig {
  std::uint64_t seed = 1;

  // World and traversal.
  std::string world_preset = "easy";  // easy | hard
  int num_classes = 5;
  double separation_hz = 0.0;  // 0 keeps the preset's spacing
  double world_size_m = 40.0;
  double meters_per_pixel = 0.05;
  std::optional<synth::DomainShift> domain_shift;
  std::size_t num_clips = 1500;
  std::size_t validation_clips = 500;
  int num_waypoints = 120;
  double waypoint_margin_m = 3.5;
  double speed_min_mps = 0.2;
  double speed_max_mps = 1.0;
  synth::AudioParams audio = synth::default_audio_params();
  synth::ImagingParams imaging;

  // Audio features.
  dsp::StftParams stft;
  int pooled_rows = 16;
  int pooled_cols = 16;

  // Triplets.
  int patch_px = geometry::kDefaultPatchPx;
  triplets::SamplingMechanism mechanism;
  std::size_t triplet_count = 3000;
  std::optional<double> correct_ratio;  // corrupt ground-truth triplets to this ratio instead of sampling

  // Encoder and clustering.
  metric::TrainConfig train;
  int kmeans_restarts = 10;

  // Segmenter.
  seg::SegTrainConfig seg;

  // Evaluation noise on the validation traversal.
  double snr_db = dsp::kNoNoise;

  // Experiments.
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds{1};

  // Planning.
  std::vector<double> class_costs;  // empty = all ones
  double unknown_cost = 50.0;

  static PipelineConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  void validate() const;

  synth::WorldSpec world_spec() const;
  synth::TraversalParams traversal_params(bool validation) const;
  std::uint64_t stage_seed(std::uint64_t stream) const { return derive_seed(seed, stream); }
};

struct Dataset {
  synth::TrainingBundle bundle;
  synth::EvaluationTruth truth;
};

Dataset generate_dataset(const PipelineConfig& config, bool validation = false);
void write_dataset(const std::filesystem::path& dir, const PipelineConfig& config, bool force);

/// Encoder inputs: one normalised, pooled log-spectrogram per column.
struct AudioInputs {
  dsp::SpectrogramScaler scaler;
  Eigen::MatrixXd x;
};

/// Fits the scaler unless one is given; noise is added per clip when snr_db is finite.
AudioInputs audio_inputs(const std::vector<dsp::AudioClip>& clips, const PipelineConfig& config,
                         const dsp::SpectrogramScaler* fitted = nullptr, double snr_db = dsp::kNoNoise,
                         std::uint64_t noise_seed = 0);

/// Image index each clip's patch is cut from (nearest image in time).
std::vector<int> image_for_clips(const synth::TrainingBundle& bundle);

/// Robot path in image pixels, split at midpoints so each piece belongs to one clip.
std::vector<geometry::PathSegment> path_segments_in_image(const synth::TrainingBundle& bundle, int image_index,
                                                          const std::vector<int>& class_per_clip);

struct ClipPatches {
  std::vector<int> clip_of_column;
  Eigen::MatrixXd features;  // 28 x columns
  std::vector<std::string> diagnostics;
};

ClipPatches clip_patches(const synth::TrainingBundle& bundle, const PipelineConfig& config);

/// Triplets over clip indices; truth is used only by the ground-truth and correct-ratio variants.
std::vector<triplets::Triplet> form_triplets(const ClipPatches& patches, const PipelineConfig& config,
                                             const std::vector<int>* truth = nullptr);

struct AudioClusterer {
  dsp::SpectrogramScaler scaler;
  metric::EncoderDecoder model;
  Eigen::MatrixXd centroids;  // embedding_dim x K
};

struct ClusterOutput {
  Eigen::MatrixXd embeddings;
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
};

ClusterOutput cluster_embeddings(const Eigen::MatrixXd& embeddings, const PipelineConfig& config);
/// Labels clips with an already trained clusterer (nearest centroid).
std::vector<int> label_clips(const AudioClusterer& clusterer, const std::vector<dsp::AudioClip>& clips,
                             const PipelineConfig& config, double snr_db = dsp::kNoNoise, std::uint64_t noise_seed = 0);

/// Weak label mask per image: the path stroke carries the clip labels, void stays void.
std::vector<LabelImage> weak_label_images(const synth::TrainingBundle& bundle, const std::vector<int>& clip_labels);

seg::SegTrainResult train_weak_segmenter(const std::vector<const synth::TrainingBundle*>& bundles,
                                         const std::vector<const std::vector<LabelImage>*>& weak,
                                         const PipelineConfig& config);

struct SegEvaluation {
  cluster::ClassScores iou;     // predicted labels mapped to classes, against dense truth
  cluster::ClassScores recall;  // against the weak labels, in label space
};

/// `label_to_class` maps the segmenter's label ids to truth classes (-1 = none).
SegEvaluation evaluate_segmenter(const seg::SegModel& model, const synth::TrainingBundle& bundle,
                                 const synth::EvaluationTruth& truth, const std::vector<LabelImage>& weak,
                                 const std::vector<int>& label_to_class);

struct RunMetrics {
  double clustering_accuracy = 0.0;
  double nmi = 0.0;
  double triplet_correctness = 0.0;
  double miou = std::numeric_limits<double>::quiet_NaN();
  double mean_recall = std::numeric_limits<double>::quiet_NaN();
  double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
  double validation_nmi = std::numeric_limits<double>::quiet_NaN();
};

struct RunOptions {
  bool segmentation = true;
  bool validation = false;  // cluster a noisy disjoint traversal with the trained clusterer
};

struct RunOutput {
  RunMetrics metrics;
  AudioClusterer clusterer;
  std::vector<int> clip_clusters;
  std::vector<int> cluster_to_class;
  std::vector<triplets::Triplet> triplets;
  metric::TrainResult training;
  std::vector<LabelImage> weak_labels;
  std::optional<seg::SegTrainResult> segmenter;
  cluster::CountMatrix confusion;
};

RunOutput run_pipeline(const Dataset& data, const PipelineConfig& config, const RunOptions& options = {});

/// Rows of (variable, seed, clustering_accuracy, nmi).
struct ExperimentRow {
  double variable = 0.0;
  std::uint64_t seed = 0;
  double clustering_accuracy = 0.0;
  double nmi = 0.0;
};

std::vector<ExperimentRow> run_experiment(const std::string& name, const PipelineConfig& config);
void write_experiment_csv(const std::filesystem::path& path, const std::string& variable,
                          const std::vector<ExperimentRow>& rows);

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& m, const SegEvaluation* seg = nullptr);

/*
 * On-disk stages. Each reads the bundle and earlier artifacts under `out`
 * and writes its own artifacts there.
 */
namespace stages {
void spectrogram(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void features(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void make_triplets(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void train_encoder(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void cluster(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void label(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void train_seg(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void evaluate(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
void map(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
struct PlanRequest {
  mapplan::Cell start;
  mapplan::Cell goal;
};
void plan(const std::filesystem::path& out, const PipelineConfig& config, const PlanRequest& request);
void all(const std::filesystem::path& bundle, const std::filesystem::path& out, const PipelineConfig& config);
}  // namespace stages

}  // namespace terrasense::pipeline
