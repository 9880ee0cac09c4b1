#include <algorithm>
#include <cmath>
#include <numeric>

#include "terrasense/io.hpp"
#include "terrasense/seglearn.hpp"
#include "terrasense/triplets.hpp"

namespace terrasense::seg {

namespace {

enum Stream : std::uint64_t { kHiddenInit = 1, kOutputInit = 2, kPixelSample = 3, kShuffle = 4 };

struct Forward {
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd logits;
};

/*
 * The output layer is evaluated with plain loops and the hidden-layer
 * gradient with sorted sums, so relabeling the classes only permutes rows.
 */
Forward forward(const nn::Mlp& net, const Eigen::MatrixXd& x) {
  const auto& l1 = net.layers()[0];
  const auto& l2 = net.layers()[1];
  Forward f;
  f.hidden = l1.weight * x;
  f.hidden.colwise() += l1.bias;
  f.hidden = f.hidden.array().tanh().matrix();
  const auto k = l2.weight.rows();
  const auto h = l2.weight.cols();
  f.logits.resize(k, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      double s = l2.bias(c);
      for (Eigen::Index j = 0; j < h; ++j) s += l2.weight(c, j) * f.hidden(j, i);
      f.logits(c, i) = s;
    }
  }
  return f;
}

void check_model(const nn::Mlp& net) {
  if (net.layers().size() != 2) throw InputError("segmentation model must have exactly two layers");
}

}  // namespace

Eigen::VectorXd pixel_descriptor(const RgbImage& image, int row, int col) {
  constexpr int half = kNeighborhood / 2;
  RgbImage patch(kNeighborhood, kNeighborhood);
  for (int dr = 0; dr < kNeighborhood; ++dr) {
    const int r = std::clamp(row + dr - half, 0, image.height - 1);
    for (int dc = 0; dc < kNeighborhood; ++dc) {
      const int c = std::clamp(col + dc - half, 0, image.width - 1);
      patch.at(dr, dc) = image.at(r, c);
    }
  }
  return triplets::visual_features(patch);
}

Eigen::MatrixXd pixel_descriptors(const RgbImage& image) {
  if (image.width < 1 || image.height < 1) throw InputError("empty image");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(triplets::kFeatureDim, static_cast<Eigen::Index>(image.size()));
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      if (image.at(r, c) == kVoidColor) continue;
      out.col(static_cast<Eigen::Index>(image.index(r, c))) = pixel_descriptor(image, r, c);
    }
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& features) {
  if (features.cols() == 0) throw InputError("cannot standardise an empty feature set");
  Standardizer s;
  s.mean = features.rowwise().mean();
  const Eigen::MatrixXd centered = features.colwise() - s.mean;
  const Eigen::VectorXd var = centered.rowwise().squaredNorm() / static_cast<double>(features.cols());
  s.inv_scale = var.unaryExpr([](double v) { return 1.0 / std::max(std::sqrt(v), 1e-3); });
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& features) const {
  if (features.rows() != mean.size()) throw InputError("feature dimension does not match the standardiser");
  return (features.colwise() - mean).array().colwise() * inv_scale.array();
}

SegModel SegModel::init(int input_dim, int hidden, int k, std::uint64_t seed, bool random_output) {
  if (k < 1 || hidden < 1 || input_dim < 1) throw ConfigError("segmenter widths must be positive");
  SegModel m;
  m.net = nn::Mlp({input_dim, hidden, k}, nn::Activation::tanh, nn::Activation::linear);
  Rng hidden_rng(derive_seed(seed, kHiddenInit));
  const auto hidden_net = nn::Mlp::glorot({input_dim, hidden}, hidden_rng);
  m.net.layers()[0].weight = hidden_net.layers()[0].weight;
  if (random_output) {
    Rng out_rng(derive_seed(seed, kOutputInit));
    m.net.layers()[1].weight = nn::Mlp::glorot({hidden, k}, out_rng).layers()[0].weight;
  }
  m.standardizer.mean = Eigen::VectorXd::Zero(input_dim);
  m.standardizer.inv_scale = Eigen::VectorXd::Ones(input_dim);
  return m;
}

Eigen::MatrixXd SegModel::logits(const Eigen::MatrixXd& raw_features) const {
  check_model(net);
  return forward(net, standardizer.apply(raw_features)).logits;
}

Eigen::MatrixXd SegModel::probabilities(const Eigen::MatrixXd& raw_features) const {
  return softmax(logits(raw_features));
}

SegLossGrad seg_loss(const SegModel& model, const Eigen::MatrixXd& standardized, std::span<const int> labels,
                     std::span<const double> weights, bool with_gradients) {
  check_model(model.net);
  const Forward f = forward(model.net, standardized);
  const auto ce = weighted_ce_logits(f.logits, labels, weights);
  SegLossGrad out;
  out.loss = ce.loss;
  if (!with_gradients) return out;
  out.grad = model.net.zero_gradients();
  const auto& w2 = model.net.layers()[1].weight;
  const auto k = w2.rows();
  const auto h = w2.cols();
  const auto n = standardized.cols();
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index j = 0; j < h; ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += ce.grad(c, i) * f.hidden(j, i);
      out.grad.weight[1](c, j) = s;
    }
    double sb = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sb += ce.grad(c, i);
    out.grad.bias[1](c) = sb;
  }
  Eigen::MatrixXd dh(h, n);
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < h; ++j) {
      for (Eigen::Index c = 0; c < k; ++c) terms[c] = w2(c, j) * ce.grad(c, i);
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      dh(j, i) = s * (1.0 - f.hidden(j, i) * f.hidden(j, i));
    }
  }
  out.grad.weight[0] = dh * standardized.transpose();
  out.grad.bias[0] = dh.rowwise().sum();
  return out;
}

void SegTrainConfig::validate() const {
  if (num_classes < 1) throw ConfigError("segmenter: num_classes must be >= 1");
  if (hidden < 1) throw ConfigError("segmenter: hidden width must be >= 1");
  if (epochs < 0) throw ConfigError("segmenter: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("segmenter: batch size must be >= 1");
  if (pixels_per_image < 1) throw ConfigError("segmenter: pixels_per_image must be >= 1");
}

SegTrainResult train_segmenter_on_features(const Eigen::MatrixXd& features, std::span<const int> labels,
                                           const SegTrainConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(features.cols()) != labels.size()) throw InputError("one label per feature column");
  std::vector<long long> hist(static_cast<std::size_t>(config.num_classes), 0);
  for (int l : labels) {
    if (l >= config.num_classes) throw InputError("label outside the class range");
    if (l >= 0) ++hist[l];
  }
  SegTrainResult result;
  result.weights = class_weights(hist);
  result.model = SegModel::init(static_cast<int>(features.rows()), config.hidden, config.num_classes, config.seed);
  result.model.standardizer = Standardizer::fit(features);
  const Eigen::MatrixXd x = result.model.standardizer.apply(features);
  result.trace.push_back(seg_loss(result.model, x, labels, result.weights, false).loss);

  nn::Optimizer opt(config.optimizer, result.model.net);
  Rng shuffle_rng(derive_seed(config.seed, kShuffle));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const nn::Mlp snapshot = result.model.net;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Eigen::MatrixXd bx(x.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<int> bl(end - start);
      for (std::size_t i = start; i < end; ++i) {
        bx.col(static_cast<Eigen::Index>(i - start)) = x.col(order[i]);
        bl[i - start] = labels[static_cast<std::size_t>(order[i])];
      }
      auto lg = seg_loss(result.model, bx, bl, result.weights, true);
      if (!std::isfinite(lg.loss)) {
        result.model.net = snapshot;
        result.diverged = true;
        result.diagnostic = "non-finite segmentation loss in epoch " + std::to_string(epoch);
        return result;
      }
      sum += lg.loss;
      ++batches;
      opt.step(result.model.net, lg.grad);
    }
    if (!result.model.net.all_finite()) {
      result.model.net = snapshot;
      result.diverged = true;
      result.diagnostic = "non-finite segmentation parameters after epoch " + std::to_string(epoch);
      return result;
    }
    result.trace.push_back(sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
  }
  return result;
}

SegTrainResult train_segmenter(std::span<const LabeledImage> images, const SegTrainConfig& config) {
  config.validate();
  std::vector<Eigen::VectorXd> cols;
  std::vector<int> labels;
  Rng rng(derive_seed(config.seed, kPixelSample));
  for (const auto& item : images) {
    if (item.image == nullptr || item.labels == nullptr) throw InputError("train_segmenter: missing image or labels");
    const auto& img = *item.image;
    const auto& lab = *item.labels;
    if (img.width != lab.width || img.height != lab.height) throw InputError("image and label sizes differ");
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (lab.data[i] >= 0 && !(img.data[i] == kVoidColor)) labeled.push_back(i);
    }
    const std::size_t take = std::min(labeled.size(), config.pixels_per_image);
    for (std::size_t i = 0; i < take; ++i) std::swap(labeled[i], labeled[i + uniform_index(rng, labeled.size() - i)]);
    labeled.resize(take);
    std::sort(labeled.begin(), labeled.end());
    for (auto idx : labeled) {
      const int r = static_cast<int>(idx / static_cast<std::size_t>(img.width));
      const int c = static_cast<int>(idx % static_cast<std::size_t>(img.width));
      cols.push_back(pixel_descriptor(img, r, c));
      labels.push_back(lab.data[idx]);
    }
  }
  if (cols.empty()) throw ConfigError("train_segmenter: no labeled pixels");
  Eigen::MatrixXd features(triplets::kFeatureDim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) features.col(static_cast<Eigen::Index>(i)) = cols[i];
  return train_segmenter_on_features(features, labels, config);
}

Prediction predict_mask(const RgbImage& image, const SegModel& model) {
  return predict_mask(image, pixel_descriptors(image), model);
}

Prediction predict_mask(const RgbImage& image, const Eigen::MatrixXd& descriptors, const SegModel& model) {
  if (descriptors.cols() != static_cast<Eigen::Index>(image.size())) throw InputError("descriptor count mismatch");
  Prediction out;
  out.probabilities = model.probabilities(descriptors);
  out.mask = LabelImage(image.width, image.height, 0);
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (image.data[i] == kVoidColor) {
      out.mask.data[i] = static_cast<std::int16_t>(kVoid);
      continue;
    }
    Eigen::Index best = 0;
    out.probabilities.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    out.mask.data[i] = static_cast<std::int16_t>(best);
  }
  return out;
}

nn::GradCheckResult grad_check(SegModel model, const Eigen::MatrixXd& standardized, std::span<const int> labels,
                               std::span<const double> weights, const GradCheckOptions& options) {
  const auto lg = seg_loss(model, standardized, labels, weights, true);
  const auto coords = nn::sample_coordinates(model.net.num_parameters(), options.coordinates, options.seed);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (auto c : coords) {
    params.push_back(&model.net.parameter(c));
    analytic.push_back(lg.grad.flat(c));
  }
  if (!analytic.empty()) analytic.front() += options.tamper;
  return nn::check_gradient([&] { return seg_loss(model, standardized, labels, weights, false).loss; }, params,
                            analytic, options.eps);
}

void write_seg_model(const std::filesystem::path& path, const SegModel& model) {
  const nn::Mlp nets[] = {model.net};
  nn::write_checkpoint(path, nets);
  Eigen::MatrixXd s(2, model.standardizer.mean.size());
  s.row(0) = model.standardizer.mean.transpose();
  s.row(1) = model.standardizer.inv_scale.transpose();
  io::write_matrix(std::filesystem::path(path).concat(".std"), s);
}

SegModel read_seg_model(const std::filesystem::path& path) {
  auto nets = nn::read_checkpoint(path);
  if (nets.size() != 1) throw InputError("segmentation checkpoint must hold one network: " + path.string());
  SegModel m;
  m.net = std::move(nets.front());
  check_model(m.net);
  const auto s = io::read_matrix(std::filesystem::path(path).concat(".std"));
  if (s.rows() != 2 || s.cols() != m.net.input_dim()) throw InputError("standardiser does not match the model");
  m.standardizer.mean = s.row(0).transpose();
  m.standardizer.inv_scale = s.row(1).transpose();
  return m;
}

}  // namespace terrasense::seg
