#include <cmath>

#include "terrasense/nn.hpp"

namespace terrasense::nn {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  if (name == "adadelta") return OptimizerKind::adadelta;
  throw ConfigError("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adadelta ? "adadelta" : "sgd_momentum"; }

Optimizer::Optimizer(const OptimizerConfig& config, const Mlp& net)
    : config_(config), velocity_(net.zero_gradients()), delta_sq_(net.zero_gradients()) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (config.momentum < 0.0 || config.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (config.rho <= 0.0 || config.rho >= 1.0) throw ConfigError("rho must lie in (0, 1)");
}

void Optimizer::step(Mlp& net, const MlpGradients& grads) {
  auto& layers = net.layers();
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd_momentum) {
    const double mu = config_.momentum;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      velocity_.weight[l] = mu * velocity_.weight[l] - lr * grads.weight[l];
      velocity_.bias[l] = mu * velocity_.bias[l] - lr * grads.bias[l];
      layers[l].weight += velocity_.weight[l];
      layers[l].bias += velocity_.bias[l];
    }
    return;
  }
  const double rho = config_.rho;
  const double eps = config_.epsilon;
  auto update = [&](Eigen::Ref<Eigen::MatrixXd> param, Eigen::Ref<Eigen::MatrixXd> eg2, Eigen::Ref<Eigen::MatrixXd> edx2,
                    const Eigen::Ref<const Eigen::MatrixXd>& g) {
    eg2 = rho * eg2.array() + (1.0 - rho) * g.array().square();
    const Eigen::ArrayXXd dx = -((edx2.array() + eps).sqrt() / (eg2.array() + eps).sqrt()) * g.array();
    edx2 = rho * edx2.array() + (1.0 - rho) * dx.square();
    param += (lr * dx).matrix();
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, velocity_.weight[l], delta_sq_.weight[l], grads.weight[l]);
    update(layers[l].bias, velocity_.bias[l], delta_sq_.bias[l], grads.bias[l]);
  }
}

}  // namespace terrasense::nn
