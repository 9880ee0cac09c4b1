#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"

namespace terrasense::nn {

enum class Activation : std::uint8_t { linear = 0, tanh = 1 };

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::linear;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
  double& flat(std::size_t i);
  double flat(std::size_t i) const;
  std::size_t size() const;
};

/// Fully connected network; samples are columns.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialised; `dims` lists input, hidden and output widths.
  Mlp(const std::vector<int>& dims, Activation hidden, Activation output);
  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(const std::vector<int>& dims, Rng& rng, Activation hidden = Activation::tanh,
                    Activation output = Activation::linear);

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input followed by each layer's output
  };

  int input_dim() const;
  int output_dim() const;
  std::vector<int> dims() const;
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;
  /// Accumulates parameter gradients into `grads` and returns the gradient w.r.t. the input.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_output, MlpGradients& grads) const;

  MlpGradients zero_gradients() const;
  std::size_t num_parameters() const;
  /// Flat view: per layer, weights column-major then biases.
  double& parameter(std::size_t i);
  bool all_finite() const;

 private:
  std::vector<Layer> layers_;
};

enum class OptimizerKind { sgd_momentum, adadelta };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double rho = 0.9;  // AdaDelta decay
  double epsilon = 1e-6;
};

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const Mlp& net);
  void step(Mlp& net, const MlpGradients& grads);

 private:
  OptimizerConfig config_;
  MlpGradients velocity_;     // momentum buffer, or AdaDelta running E[g^2]
  MlpGradients delta_sq_;     // AdaDelta running E[dx^2]
};

/// Versioned binary: magic, version, network count, then per network the layer dims, activations and float64 data.
void write_checkpoint(const std::filesystem::path& path, std::span<const Mlp> nets);
std::vector<Mlp> read_checkpoint(const std::filesystem::path& path);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst = 0;  // position within the checked list
};

/*
 * Central differences on the listed parameters: |analytic - fd| / max(1, |analytic|).
 * `loss` is re-evaluated after each perturbation; parameters are restored.
 */
GradCheckResult check_gradient(const std::function<double()>& loss, std::span<double* const> params,
                               std::span<const double> analytic, double eps);

/// `count` distinct flat indices drawn from [0, total), or all of them if count >= total.
std::vector<std::size_t> sample_coordinates(std::size_t total, std::size_t count, std::uint64_t seed);

}  // namespace terrasense::nn
