#include <algorithm>
#include <cmath>
#include <numeric>

#include "terrasense/io.hpp"
#include "terrasense/metric_learn.hpp"

namespace terrasense::metric {

namespace {

enum Stream : std::uint64_t { kEncoderInit = 1, kDecoderInit = 2, kShuffle = 3 };

/* Columns [anchors | positives | negatives] of the batch. */
Eigen::MatrixXd gather(const Eigen::MatrixXd& inputs, std::span<const Triplet> batch) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(inputs.rows(), 3 * b);
  for (Eigen::Index i = 0; i < b; ++i) {
    x.col(i) = inputs.col(batch[i].anchor);
    x.col(b + i) = inputs.col(batch[i].positive);
    x.col(2 * b + i) = inputs.col(batch[i].negative);
  }
  return x;
}

void check_triplets(const Eigen::MatrixXd& inputs, std::span<const Triplet> triplets) {
  const auto n = inputs.cols();
  for (const auto& t : triplets) {
    for (int idx : {t.anchor, t.positive, t.negative}) {
      if (idx < 0 || idx >= n) throw InputError("triplet index " + std::to_string(idx) + " outside the dataset");
    }
  }
}

std::vector<int> reversed(std::vector<int> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

struct EpochAccumulator {
  double lt = 0.0;
  double lr = 0.0;
  double total = 0.0;
  std::size_t batches = 0;

  void add(double t, double r, double l) {
    lt += t;
    lr += r;
    total += l;
    ++batches;
  }
  EpochLoss mean(int epoch) const {
    const double n = static_cast<double>(std::max<std::size_t>(batches, 1));
    return {epoch, lt / n, lr / n, total / n};
  }
};

double se_loss(const nn::Mlp& encoder, const Eigen::MatrixXd& x, std::size_t b, double alpha, nn::MlpGradients* grad) {
  nn::Mlp::Cache cache;
  const Eigen::MatrixXd z = encoder.forward(x, cache);
  const auto bb = static_cast<Eigen::Index>(b);
  const auto tl = triplet_loss(z.leftCols(bb), z.middleCols(bb, bb), z.rightCols(bb), alpha);
  if (grad != nullptr) {
    Eigen::MatrixXd dz(z.rows(), z.cols());
    dz << tl.grad_anchor, tl.grad_positive, tl.grad_negative;
    encoder.backward(cache, dz, *grad);
  }
  return tl.loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (shape.input_dim < 1 || shape.embedding_dim < 1) throw ConfigError("network widths must be positive");
}

EncoderDecoder EncoderDecoder::init(const NetworkShape& shape, std::uint64_t seed) {
  std::vector<int> dims{shape.input_dim};
  dims.insert(dims.end(), shape.hidden.begin(), shape.hidden.end());
  dims.push_back(shape.embedding_dim);
  EncoderDecoder m;
  Rng enc_rng(derive_seed(seed, kEncoderInit));
  m.encoder = nn::Mlp::glorot(dims, enc_rng);
  Rng dec_rng(derive_seed(seed, kDecoderInit));
  m.decoder = nn::Mlp::glorot(reversed(dims), dec_rng);
  return m;
}

Eigen::MatrixXd EncoderDecoder::encode(const Eigen::MatrixXd& x) const { return encoder.forward(x); }

Eigen::MatrixXd EncoderDecoder::decode(const Eigen::MatrixXd& z) const {
  if (decoder.layers().empty()) throw InputError("model has no decoder");
  return decoder.forward(z);
}

BatchLoss evaluate_batch(const EncoderDecoder& model, const Eigen::MatrixXd& inputs, std::span<const Triplet> batch,
                         double alpha, double beta, bool with_gradients) {
  const Eigen::MatrixXd x = gather(inputs, batch);
  const auto b = static_cast<Eigen::Index>(batch.size());
  nn::Mlp::Cache enc_cache;
  nn::Mlp::Cache dec_cache;
  const Eigen::MatrixXd z = model.encoder.forward(x, enc_cache);
  const Eigen::MatrixXd x_hat = model.decoder.forward(z, dec_cache);
  const auto tl = triplet_loss(z.leftCols(b), z.middleCols(b, b), z.rightCols(b), alpha);
  const auto rl = reconstruction_loss(x, x_hat);

  BatchLoss out;
  out.lt = tl.loss;
  out.lr = rl.loss;
  out.total = combined_loss(tl.loss, rl.loss, beta);
  if (!with_gradients) return out;
  out.encoder_grad = model.encoder.zero_gradients();
  out.decoder_grad = model.decoder.zero_gradients();
  const Eigen::MatrixXd dz_rec = model.decoder.backward(dec_cache, (1.0 - beta) * rl.grad, out.decoder_grad);
  Eigen::MatrixXd dz_trip(z.rows(), z.cols());
  dz_trip << tl.grad_anchor, tl.grad_positive, tl.grad_negative;
  const Eigen::MatrixXd dz = beta * dz_trip + dz_rec;
  model.encoder.backward(enc_cache, dz, out.encoder_grad);
  return out;
}

TrainResult train(const Eigen::MatrixXd& inputs, std::span<const Triplet> triplets, const TrainConfig& config) {
  config.validate();
  check_triplets(inputs, triplets);
  if (inputs.rows() != config.shape.input_dim) throw InputError("input dimension does not match the network");

  TrainResult result;
  result.model = EncoderDecoder::init(config.shape, config.seed);
  if (triplets.empty()) {
    if (config.epochs > 0) throw InputError("training needs at least one triplet");
    return result;
  }
  {
    const auto all = evaluate_batch(result.model, inputs, triplets, config.alpha, config.beta, false);
    result.trace.push_back({0, all.lt, all.lr, all.total});
  }
  nn::Optimizer enc_opt(config.optimizer, result.model.encoder);
  nn::Optimizer dec_opt(config.optimizer, result.model.decoder);
  Rng shuffle_rng(derive_seed(config.seed, kShuffle));
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triplet> batch;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const EncoderDecoder snapshot = result.model;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(triplets[order[i]]);
      auto bl = evaluate_batch(result.model, inputs, batch, config.alpha, config.beta, true);
      if (!std::isfinite(bl.total)) {
        result.model = snapshot;
        result.diverged = true;
        result.diagnostic = "non-finite loss in epoch " + std::to_string(epoch) + "; restored parameters from epoch " +
                            std::to_string(epoch - 1);
        return result;
      }
      acc.add(bl.lt, bl.lr, bl.total);
      enc_opt.step(result.model.encoder, bl.encoder_grad);
      dec_opt.step(result.model.decoder, bl.decoder_grad);
    }
    if (!result.model.encoder.all_finite() || !result.model.decoder.all_finite()) {
      result.model = snapshot;
      result.diverged = true;
      result.diagnostic = "non-finite parameters after epoch " + std::to_string(epoch) +
                          "; restored parameters from epoch " + std::to_string(epoch - 1);
      return result;
    }
    result.trace.push_back(acc.mean(epoch));
  }
  return result;
}

TrainResult train_triplet_only(const Eigen::MatrixXd& inputs, std::span<const Triplet> triplets,
                               const TrainConfig& config) {
  config.validate();
  check_triplets(inputs, triplets);
  if (inputs.rows() != config.shape.input_dim) throw InputError("input dimension does not match the network");

  std::vector<int> dims{config.shape.input_dim};
  dims.insert(dims.end(), config.shape.hidden.begin(), config.shape.hidden.end());
  dims.push_back(config.shape.embedding_dim);
  TrainResult result;
  Rng enc_rng(derive_seed(config.seed, kEncoderInit));
  result.model.encoder = nn::Mlp::glorot(dims, enc_rng);
  if (triplets.empty()) {
    if (config.epochs > 0) throw InputError("training needs at least one triplet");
    return result;
  }
  {
    const double lt = se_loss(result.model.encoder, gather(inputs, triplets), triplets.size(), config.alpha, nullptr);
    result.trace.push_back({0, lt, 0.0, lt});
  }
  nn::Optimizer opt(config.optimizer, result.model.encoder);
  Rng shuffle_rng(derive_seed(config.seed, kShuffle));
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triplet> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const nn::Mlp snapshot = result.model.encoder;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(triplets[order[i]]);
      auto grad = result.model.encoder.zero_gradients();
      const double lt = se_loss(result.model.encoder, gather(inputs, batch), batch.size(), config.alpha, &grad);
      if (!std::isfinite(lt)) {
        result.model.encoder = snapshot;
        result.diverged = true;
        result.diagnostic = "non-finite loss in epoch " + std::to_string(epoch);
        return result;
      }
      sum += lt;
      ++batches;
      opt.step(result.model.encoder, grad);
    }
    const double mean = sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    result.trace.push_back({epoch, mean, 0.0, mean});
  }
  return result;
}

GradCheckReport grad_check(EncoderDecoder model, const Eigen::MatrixXd& inputs, std::span<const Triplet> pool,
                           const GradCheckOptions& options) {
  if (pool.empty()) throw InputError("grad_check: empty triplet pool");
  check_triplets(inputs, pool);
  Rng rng(derive_seed(options.seed, 17));
  GradCheckReport report;
  std::vector<Triplet> batch;
  for (;; ++report.resamples) {
    if (report.resamples > options.max_resamples) {
      throw StageError("grad_check", "no batch clear of the hinge after " + std::to_string(options.max_resamples) +
                                         " draws");
    }
    batch.clear();
    for (std::size_t i = 0; i < options.batch_size; ++i) batch.push_back(pool[uniform_index(rng, pool.size())]);
    const Eigen::MatrixXd z = model.encode(gather(inputs, batch));
    const auto b = static_cast<Eigen::Index>(batch.size());
    const Eigen::VectorXd m = triplet_margins(z.leftCols(b), z.middleCols(b, b), z.rightCols(b), options.alpha);
    if ((m.array().abs() > options.hinge_clearance).all()) break;
  }

  const auto grads = evaluate_batch(model, inputs, batch, options.alpha, options.beta, true);
  const std::size_t n_enc = model.encoder.num_parameters();
  const std::size_t total = n_enc + model.decoder.num_parameters();
  const auto coords = nn::sample_coordinates(total, options.coordinates, derive_seed(options.seed, 18));
  std::vector<double*> params;
  std::vector<double> analytic;
  for (auto c : coords) {
    if (c < n_enc) {
      params.push_back(&model.encoder.parameter(c));
      analytic.push_back(grads.encoder_grad.flat(c));
    } else {
      params.push_back(&model.decoder.parameter(c - n_enc));
      analytic.push_back(grads.decoder_grad.flat(c - n_enc));
    }
  }
  if (!analytic.empty()) analytic.front() += options.tamper;
  const auto r = nn::check_gradient(
      [&] { return evaluate_batch(model, inputs, batch, options.alpha, options.beta, false).total; }, params, analytic,
      options.eps);
  report.max_relative_error = r.max_relative_error;
  report.coordinates = r.coordinates;
  return report;
}

void write_loss_trace_csv(const std::filesystem::path& path, std::span<const EpochLoss> trace) {
  io::CsvTable t{{"epoch", "Lt", "Lr", "L"}, {}};
  for (const auto& e : trace) {
    t.rows.push_back({std::to_string(e.epoch), io::format_double(e.lt), io::format_double(e.lr),
                      io::format_double(e.total)});
  }
  io::write_csv(path, t);
}

}  // namespace terrasense::metric
