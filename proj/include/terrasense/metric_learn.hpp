#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/nn.hpp"
#include "terrasense/triplets.hpp"

namespace terrasense::metric {

using triplets::Triplet;

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 0.5;

/// Embeddings are columns; column i of a, p, n forms one triplet.
struct TripletLoss {
  double loss = 0.0;
  Eigen::MatrixXd grad_anchor;
  Eigen::MatrixXd grad_positive;
  Eigen::MatrixXd grad_negative;
  std::size_t active = 0;  // triplets with a strictly positive hinge
};

TripletLoss triplet_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n, double alpha);
/// Per-triplet value of ||a-p||^2 + alpha - ||a-n||^2 (before the hinge).
Eigen::VectorXd triplet_margins(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n,
                                double alpha);

struct ReconstructionLoss {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // w.r.t. x_hat
};

ReconstructionLoss reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat);

double combined_loss(double lt, double lr, double beta);

struct NetworkShape {
  int input_dim = 256;
  std::vector<int> hidden{256, 64};
  int embedding_dim = 16;
};

struct EncoderDecoder {
  nn::Mlp encoder;
  nn::Mlp decoder;  // mirror of the encoder; empty for triplet-only models

  /// Encoder and decoder use separate seeded streams.
  static EncoderDecoder init(const NetworkShape& shape, std::uint64_t seed);
  Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd decode(const Eigen::MatrixXd& z) const;
};

struct TrainConfig {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  int epochs = 80;
  int batch_size = 32;
  nn::OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  NetworkShape shape;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double lt = 0.0;
  double lr = 0.0;
  double total = 0.0;
};

struct TrainResult {
  EncoderDecoder model;
  std::vector<EpochLoss> trace;  // epoch 0 is the untrained model over all triplets
  bool diverged = false;
  std::string diagnostic;
};

/*
 * SE-R training on inputs (one column per clip). Each batch encodes the
 * anchors, positives and negatives; the reconstruction term covers all of them.
 */
TrainResult train(const Eigen::MatrixXd& inputs, std::span<const Triplet> triplets, const TrainConfig& config);
/// Plain SE trainer with no decoder, kept separate from train().
TrainResult train_triplet_only(const Eigen::MatrixXd& inputs, std::span<const Triplet> triplets,
                               const TrainConfig& config);

struct BatchLoss {
  double lt = 0.0;
  double lr = 0.0;
  double total = 0.0;
  nn::MlpGradients encoder_grad;
  nn::MlpGradients decoder_grad;
};

BatchLoss evaluate_batch(const EncoderDecoder& model, const Eigen::MatrixXd& inputs, std::span<const Triplet> batch,
                         double alpha, double beta, bool with_gradients);

struct GradCheckOptions {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double eps = 1e-5;
  std::size_t coordinates = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double hinge_clearance = 1e-3;
  int max_resamples = 100;
  double tamper = 0.0;  // added to the first checked analytic coordinate (negative control)
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  int resamples = 0;
};

/// Batches with a triplet within hinge_clearance of the hinge are redrawn from the pool.
GradCheckReport grad_check(EncoderDecoder model, const Eigen::MatrixXd& inputs, std::span<const Triplet> pool,
                           const GradCheckOptions& options);

void write_loss_trace_csv(const std::filesystem::path& path, std::span<const EpochLoss> trace);

}  // namespace terrasense::metric
