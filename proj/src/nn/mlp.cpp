#include <cmath>

#include "terrasense/nn.hpp"

namespace terrasense::nn {

namespace {

void apply(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::tanh) z = z.array().tanh().matrix();
}

}  // namespace

void MlpGradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

std::size_t MlpGradients::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) n += static_cast<std::size_t>(weight[l].size() + bias[l].size());
  return n;
}

double& MlpGradients::flat(std::size_t i) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    const auto nw = static_cast<std::size_t>(weight[l].size());
    if (i < nw) return weight[l].data()[i];
    i -= nw;
    const auto nb = static_cast<std::size_t>(bias[l].size());
    if (i < nb) return bias[l](static_cast<Eigen::Index>(i));
    i -= nb;
  }
  throw InputError("gradient index out of range");
}

double MlpGradients::flat(std::size_t i) const { return const_cast<MlpGradients*>(this)->flat(i); }

Mlp::Mlp(const std::vector<int>& dims, Activation hidden, Activation output) {
  if (dims.size() < 2) throw ConfigError("network needs at least an input and an output width");
  for (int d : dims) {
    if (d <= 0) throw ConfigError("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.weight = Eigen::MatrixXd::Zero(dims[l + 1], dims[l]);
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    layer.activation = l + 2 == dims.size() ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::glorot(const std::vector<int>& dims, Rng& rng, Activation hidden, Activation output) {
  Mlp net(dims, hidden, output);
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    // Row-major fill so the draw order does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = u(rng);
    }
  }
  return net;
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> Mlp::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers_) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != input_dim()) {
    throw InputError("network input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(input_dim()));
  }
  cache.activations.clear();
  cache.activations.push_back(x);
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weight * cache.activations.back();
    z.colwise() += layer.bias;
    apply(layer.activation, z);
    cache.activations.push_back(std::move(z));
  }
  return cache.activations.back();
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output, MlpGradients& grads) const {
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (layer.activation == Activation::tanh) {
      delta = (delta.array() * (1.0 - cache.activations[l + 1].array().square())).matrix();
    }
    grads.weight[l].noalias() += delta * cache.activations[l].transpose();
    grads.bias[l] += delta.rowwise().sum();
    delta = layer.weight.transpose() * delta;
  }
  return delta;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& layer : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

double& Mlp::parameter(std::size_t i) {
  for (auto& layer : layers_) {
    const auto nw = static_cast<std::size_t>(layer.weight.size());
    if (i < nw) return layer.weight.data()[i];
    i -= nw;
    const auto nb = static_cast<std::size_t>(layer.bias.size());
    if (i < nb) return layer.bias(static_cast<Eigen::Index>(i));
    i -= nb;
  }
  throw InputError("parameter index out of range");
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

}  // namespace terrasense::nn
