#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"
#include "terrasense/nn.hpp"

namespace terrasense::seg {

/// Side of the square neighbourhood that describes a pixel.
inline constexpr int kNeighborhood = 9;
inline constexpr double kProbabilityFloor = 1e-12;

/// Labeled-pixel counts per class; negative labels are ignored.
std::vector<long long> label_histogram(std::span<const LabelImage> labels, int k);

/// w_c = 1 / ln(1.02 + f_c), rescaled to mean 1. Throws ConfigError naming any class without pixels.
std::vector<double> class_weights(std::span<const long long> histogram);

struct CrossEntropy {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // same shape as the input
  std::size_t labeled = 0;
  std::size_t clamped = 0;  // labeled pixels whose probability hit the floor
};

/// Columns are pixels; labels < 0 are background and contribute nothing.
CrossEntropy weighted_ce(const Eigen::MatrixXd& probabilities, std::span<const int> labels,
                         std::span<const double> weights);
/// Same loss through a softmax; gradient w.r.t. the logits.
CrossEntropy weighted_ce_logits(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                std::span<const double> weights);

/// Column-wise softmax; the normaliser is summed in sorted order so class permutations commute with it.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

/// Descriptor of the edge-clamped neighbourhood around (row, col).
Eigen::VectorXd pixel_descriptor(const RgbImage& image, int row, int col);
/// One column per pixel in row-major order.
Eigen::MatrixXd pixel_descriptors(const RgbImage& image);

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_scale;

  static Standardizer fit(const Eigen::MatrixXd& features);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

/// Descriptor -> tanh hidden layer -> softmax over K classes.
struct SegModel {
  nn::Mlp net;
  Standardizer standardizer;

  int num_classes() const { return net.output_dim(); }
  /// Glorot hidden layer; the output layer starts at zero unless `random_output`.
  static SegModel init(int input_dim, int hidden, int k, std::uint64_t seed, bool random_output = false);
  Eigen::MatrixXd logits(const Eigen::MatrixXd& raw_features) const;
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& raw_features) const;
};

struct SegTrainConfig {
  int num_classes = 5;
  int hidden = 32;
  int epochs = 30;
  int batch_size = 128;
  std::size_t pixels_per_image = 400;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::sgd_momentum, 0.05, 0.9, 0.9, 1e-6};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SegTrainResult {
  SegModel model;
  std::vector<double> trace;  // entry 0 is the initial loss, then per-epoch means
  std::vector<double> weights;
  bool diverged = false;
  std::string diagnostic;
};

struct LabeledImage {
  const RgbImage* image = nullptr;
  const LabelImage* labels = nullptr;
};

SegTrainResult train_segmenter(std::span<const LabeledImage> images, const SegTrainConfig& config);
/// Training on precomputed raw descriptors (one column per pixel).
SegTrainResult train_segmenter_on_features(const Eigen::MatrixXd& features, std::span<const int> labels,
                                           const SegTrainConfig& config);

struct Prediction {
  LabelImage mask;                  // kVoid where the input pixel is void
  Eigen::MatrixXd probabilities;    // K x pixels, row-major pixel order
};

Prediction predict_mask(const RgbImage& image, const SegModel& model);
/// Uses descriptors computed earlier by pixel_descriptors().
Prediction predict_mask(const RgbImage& image, const Eigen::MatrixXd& descriptors, const SegModel& model);

struct SegLossGrad {
  double loss = 0.0;
  nn::MlpGradients grad;
};

/// Loss and parameter gradient on standardised features.
SegLossGrad seg_loss(const SegModel& model, const Eigen::MatrixXd& standardized, std::span<const int> labels,
                     std::span<const double> weights, bool with_gradients);

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t coordinates = 200;
  std::uint64_t seed = 1;
  double tamper = 0.0;
};

nn::GradCheckResult grad_check(SegModel model, const Eigen::MatrixXd& standardized, std::span<const int> labels,
                               std::span<const double> weights, const GradCheckOptions& options);

/// Checkpoint plus a standardiser matrix next to it.
void write_seg_model(const std::filesystem::path& path, const SegModel& model);
SegModel read_seg_model(const std::filesystem::path& path);

}  // namespace terrasense::seg
