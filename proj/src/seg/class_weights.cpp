#include <algorithm>
#include <cmath>

#include "terrasense/seglearn.hpp"

namespace terrasense::seg {

namespace {

/* Order-independent sum so that permuting classes permutes results exactly. */
double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::vector<long long> label_histogram(std::span<const LabelImage> labels, int k) {
  std::vector<long long> h(static_cast<std::size_t>(k), 0);
  for (const auto& img : labels) {
    for (auto l : img.data) {
      if (l < 0) continue;
      if (l >= k) throw InputError("label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
      ++h[l];
    }
  }
  return h;
}

std::vector<double> class_weights(std::span<const long long> histogram) {
  if (histogram.empty()) throw ConfigError("class weights: no classes");
  std::string missing;
  double total = 0.0;
  for (std::size_t c = 0; c < histogram.size(); ++c) {
    if (histogram[c] <= 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    total += static_cast<double>(std::max(0LL, histogram[c]));
  }
  if (!missing.empty()) throw ConfigError("class weights: no labeled pixels for class " + missing);
  std::vector<double> w(histogram.size());
  for (std::size_t c = 0; c < histogram.size(); ++c) {
    w[c] = 1.0 / std::log(1.02 + static_cast<double>(histogram[c]) / total);
  }
  const double mean = sorted_sum(w) / static_cast<double>(w.size());
  for (auto& v : w) v /= mean;
  return w;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  std::vector<double> e(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double m = logits.col(i).maxCoeff();
    for (Eigen::Index c = 0; c < logits.rows(); ++c) e[c] = std::exp(logits(c, i) - m);
    const double z = sorted_sum(e);
    for (Eigen::Index c = 0; c < logits.rows(); ++c) p(c, i) = e[c] / z;
  }
  return p;
}

CrossEntropy weighted_ce(const Eigen::MatrixXd& probabilities, std::span<const int> labels,
                         std::span<const double> weights) {
  if (static_cast<std::size_t>(probabilities.cols()) != labels.size()) throw InputError("weighted_ce: label count");
  if (static_cast<std::size_t>(probabilities.rows()) != weights.size()) throw InputError("weighted_ce: weight count");
  CrossEntropy out;
  out.grad = Eigen::MatrixXd::Zero(probabilities.rows(), probabilities.cols());
  for (int l : labels) out.labeled += l >= 0 ? 1 : 0;
  if (out.labeled == 0) return out;
  const double n = static_cast<double>(out.labeled);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0) continue;
    if (c >= probabilities.rows()) throw InputError("weighted_ce: label out of range");
    const auto col = static_cast<Eigen::Index>(i);
    double p = probabilities(c, col);
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++out.clamped;
    } else {
      out.grad(c, col) = -weights[c] / (p * n);
    }
    out.loss -= weights[c] * std::log(p);
  }
  out.loss /= n;
  return out;
}

CrossEntropy weighted_ce_logits(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                std::span<const double> weights) {
  const Eigen::MatrixXd p = softmax(logits);
  CrossEntropy out = weighted_ce(p, labels, weights);
  out.grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  if (out.labeled == 0) return out;
  const double n = static_cast<double>(out.labeled);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0) continue;
    const auto col = static_cast<Eigen::Index>(i);
    out.grad.col(col) = (weights[c] / n) * p.col(col);
    out.grad(c, col) -= weights[c] / n;
  }
  return out;
}

}  // namespace terrasense::seg
