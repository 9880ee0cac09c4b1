#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "terrasense/io.hpp"
#include "terrasense/metric_learn.hpp"

using namespace terrasense;
using namespace terrasense::metric;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Two classes of noisy prototypes, 10 samples each, plus triplets formed from the class split.
struct Fixture {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  std::vector<Triplet> triplets;
};

Fixture two_class_fixture(int dim, std::uint64_t seed) {
  Fixture f;
  const Eigen::MatrixXd protos = random_matrix(dim, 2, seed, 0.5);
  const Eigen::MatrixXd noise = random_matrix(dim, 20, seed + 1, 0.05);
  f.x.resize(dim, 20);
  for (int i = 0; i < 20; ++i) {
    f.labels.push_back(i / 10);
    f.x.col(i) = protos.col(i / 10) + noise.col(i);
  }
  std::mt19937_64 rng(seed + 2);
  std::uniform_int_distribution<int> pick(0, 9);
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    const int a = c * 10 + pick(rng);
    int p = c * 10 + pick(rng);
    while (p == a) p = c * 10 + pick(rng);
    f.triplets.push_back({a, p, (1 - c) * 10 + pick(rng)});
  }
  return f;
}

TrainConfig small_config(int dim) {
  TrainConfig c;
  c.shape.input_dim = dim;
  c.shape.hidden = {16};
  c.shape.embedding_dim = 4;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("triplet loss by hand") {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 1);
  CHECK(triplet_loss(z, z, z, 1.0).loss == doctest::Approx(1.0));

  Eigen::MatrixXd n(2, 1);
  n << 1.0, 0.0;
  const auto boundary = triplet_loss(z, z, n, 1.0);
  CHECK(boundary.loss == doctest::Approx(0.0));
  CHECK(boundary.grad_anchor.norm() == 0.0);
  CHECK(boundary.active == 0);

  Eigen::MatrixXd p(2, 1);
  p << std::sqrt(0.5), 0.0;
  Eigen::MatrixXd n2(2, 1);
  n2 << 0.0, std::sqrt(0.2);
  CHECK(triplet_loss(z, p, n2, 1.0).loss == doctest::Approx(1.3));
  CHECK(triplet_margins(z, p, n2, 1.0)(0) == doctest::Approx(1.3));
}

TEST_CASE("triplet loss is mean over the batch and nonnegative") {
  const auto a = random_matrix(4, 50, 1);
  const auto p = random_matrix(4, 50, 2);
  const auto n = random_matrix(4, 50, 3);
  const auto l = triplet_loss(a, p, n, 1.0);
  const auto m = triplet_margins(a, p, n, 1.0);
  CHECK(l.loss == doctest::Approx(m.cwiseMax(0.0).mean()));
  CHECK(l.loss >= 0.0);
  CHECK(l.active == static_cast<std::size_t>((m.array() > 0).count()));
  // Far negatives satisfy every margin.
  CHECK(triplet_loss(a, a, a.array() + 100.0, 1.0).loss == 0.0);
}

TEST_CASE("triplet loss is invariant to rigid transforms") {
  const auto a = random_matrix(6, 30, 4);
  const auto p = random_matrix(6, 30, 5);
  const auto n = random_matrix(6, 30, 6);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(6, 6, 7));
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::VectorXd t = random_matrix(6, 1, 8, 10.0);
  auto move = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd { return (q * m).colwise() + t; };
  CHECK(std::abs(triplet_loss(a, p, n, 1.0).loss - triplet_loss(move(a), move(p), move(n), 1.0).loss) <= 1e-10);
}

TEST_CASE("triplet loss gradient matches finite differences") {
  auto a = random_matrix(3, 5, 9);
  auto p = random_matrix(3, 5, 10);
  auto n = random_matrix(3, 5, 11);
  const auto l = triplet_loss(a, p, n, 1.0);
  const double eps = 1e-6;
  for (auto* m : {&a, &p, &n}) {
    const Eigen::MatrixXd& g = m == &a ? l.grad_anchor : (m == &p ? l.grad_positive : l.grad_negative);
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const double keep = m->data()[i];
      m->data()[i] = keep + eps;
      const double up = triplet_loss(a, p, n, 1.0).loss;
      m->data()[i] = keep - eps;
      const double down = triplet_loss(a, p, n, 1.0).loss;
      m->data()[i] = keep;
      CHECK(g.data()[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-6));
    }
  }
}

TEST_CASE("reconstruction loss") {
  const auto x = random_matrix(5, 4, 12);
  CHECK(reconstruction_loss(x, x).loss == 0.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(100, 1);
  const Eigen::MatrixXd tenth = Eigen::MatrixXd::Constant(100, 1, 0.1);
  CHECK(reconstruction_loss(zero, tenth).loss == doctest::Approx(1.0));

  auto xh = random_matrix(5, 4, 13);
  const auto r = reconstruction_loss(x, xh);
  CHECK((r.grad - 2.0 * (xh - x) / 4.0).norm() <= 1e-15);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < xh.size(); ++i) {
    const double keep = xh.data()[i];
    xh.data()[i] = keep + eps;
    const double up = reconstruction_loss(x, xh).loss;
    xh.data()[i] = keep - eps;
    const double down = reconstruction_loss(x, xh).loss;
    xh.data()[i] = keep;
    const double fd = (up - down) / (2 * eps);
    CHECK(std::abs(r.grad.data()[i] - fd) / std::max(1.0, std::abs(fd)) <= 1e-7);
  }
  CHECK_THROWS_AS(reconstruction_loss(x, random_matrix(5, 3, 1)), InputError);
}

TEST_CASE("combined loss") {
  CHECK(combined_loss(2.0, 4.0, 1.0) == 2.0);
  CHECK(combined_loss(2.0, 4.0, 0.0) == 4.0);
  CHECK(combined_loss(2.0, 4.0, 0.5) == doctest::Approx(3.0));
  // Affine in beta.
  const double l0 = combined_loss(1.7, 0.3, 0.0);
  const double l1 = combined_loss(1.7, 0.3, 1.0);
  for (double b : {0.1, 0.25, 0.8}) CHECK(combined_loss(1.7, 0.3, b) == doctest::Approx(l0 + b * (l1 - l0)));
}

TEST_CASE("encoder forward pass") {
  NetworkShape shape{8, {6}, 3};
  auto m = EncoderDecoder::init(shape, 1);
  const auto x = random_matrix(8, 4, 14);
  CHECK(m.encode(x) == m.encode(x));
  CHECK(m.decode(m.encode(x)).rows() == 8);
  auto& last = m.encoder.layers().back();
  last.weight.setZero();
  last.bias.setZero();
  CHECK(m.encode(Eigen::MatrixXd::Zero(8, 2)).norm() == 0.0);
  CHECK_THROWS_AS(m.encode(random_matrix(7, 1, 1)), InputError);
}

TEST_CASE("zero epochs leave the initial parameters") {
  const auto f = two_class_fixture(12, 20);
  auto cfg = small_config(12);
  cfg.epochs = 0;
  const auto r = train(f.x, f.triplets, cfg);
  const auto init = EncoderDecoder::init(cfg.shape, cfg.seed);
  CHECK(r.model.encoder.layers()[0].weight == init.encoder.layers()[0].weight);
  CHECK(r.model.decoder.layers()[1].weight == init.decoder.layers()[1].weight);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("training is deterministic and lowers the losses") {
  const auto f = two_class_fixture(12, 21);
  auto cfg = small_config(12);
  cfg.epochs = 100;
  const auto a = train(f.x, f.triplets, cfg);
  const auto b = train(f.x, f.triplets, cfg);
  REQUIRE(a.trace.size() == 101);
  CHECK(!a.diverged);
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].total == b.trace[i].total);
  CHECK(a.trace.back().total < 0.1 * a.trace.front().total);
  CHECK(a.model.encoder.all_finite());
}

TEST_CASE("reconstruction error falls every epoch on a small fixture") {
  const auto f = two_class_fixture(12, 22);
  auto cfg = small_config(12);
  cfg.beta = 0.0;
  cfg.epochs = 30;
  cfg.batch_size = static_cast<int>(f.triplets.size());
  cfg.optimizer.learning_rate = 5e-3;
  cfg.optimizer.momentum = 0.0;
  const auto r = train(f.x, f.triplets, cfg);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].lr < r.trace[i - 1].lr);
}

TEST_CASE("beta = 1 reproduces the triplet-only trainer") {
  const auto f = two_class_fixture(12, 23);
  auto cfg = small_config(12);
  cfg.beta = 1.0;
  cfg.epochs = 15;
  const auto ser = train(f.x, f.triplets, cfg);
  const auto se = train_triplet_only(f.x, f.triplets, cfg);
  REQUIRE(ser.trace.size() == se.trace.size());
  for (std::size_t i = 0; i < se.trace.size(); ++i) CHECK(ser.trace[i].lt == se.trace[i].lt);
  CHECK(ser.model.encoder.layers()[0].weight == se.model.encoder.layers()[0].weight);
}

TEST_CASE("adadelta also trains") {
  const auto f = two_class_fixture(12, 24);
  auto cfg = small_config(12);
  cfg.epochs = 40;
  cfg.optimizer.kind = nn::OptimizerKind::adadelta;
  cfg.optimizer.learning_rate = 1.0;
  const auto r = train(f.x, f.triplets, cfg);
  CHECK(!r.diverged);
  CHECK(r.trace.back().total < r.trace.front().total);
}

TEST_CASE("divergence restores the last finite parameters") {
  const auto f = two_class_fixture(12, 25);
  auto cfg = small_config(12);
  cfg.epochs = 50;
  cfg.optimizer.learning_rate = 1e6;
  const auto r = train(f.x, f.triplets, cfg);
  CHECK(r.diverged);
  CHECK(!r.diagnostic.empty());
  CHECK(r.model.encoder.all_finite());
  CHECK(r.model.decoder.all_finite());
}

TEST_CASE("config and input validation") {
  TrainConfig c;
  c.beta = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto f = two_class_fixture(12, 26);
  auto cfg = small_config(12);
  std::vector<Triplet> bad{{0, 1, 99}};
  CHECK_THROWS_AS(train(f.x, bad, cfg), InputError);
  cfg.shape.input_dim = 13;
  CHECK_THROWS_AS(train(f.x, f.triplets, cfg), InputError);
}

TEST_CASE("gradient check on a linear reconstruction model") {
  const auto f = two_class_fixture(10, 27);
  const auto model = EncoderDecoder::init({10, {}, 4}, 5);
  GradCheckOptions opt;
  opt.beta = 0.0;
  const auto rep = grad_check(model, f.x, f.triplets, opt);
  CHECK(rep.coordinates >= 80);  // all 88 parameters
  CHECK(rep.max_relative_error <= 1e-8);
}

TEST_CASE("gradient check on the full encoder-decoder") {
  const auto f = two_class_fixture(16, 28);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto model = EncoderDecoder::init({16, {12, 8}, 4}, seed);
    GradCheckOptions opt;
    opt.seed = seed;
    const auto rep = grad_check(model, f.x, f.triplets, opt);
    CHECK(rep.coordinates >= 200);
    CHECK(rep.max_relative_error <= 1e-4);
    opt.tamper = 1e-2;
    CHECK(grad_check(model, f.x, f.triplets, opt).max_relative_error > 1e-4);
  }
}

TEST_CASE("checkpoints round trip") {
  const auto m = EncoderDecoder::init({8, {6}, 3}, 9);
  const auto path = std::filesystem::temp_directory_path() / "terrasense_ckpt.bin";
  const std::vector<nn::Mlp> nets{m.encoder, m.decoder};
  nn::write_checkpoint(path, nets);
  const auto back = nn::read_checkpoint(path);
  REQUIRE(back.size() == 2);
  const auto x = random_matrix(8, 3, 15);
  CHECK(back[0].forward(x) == m.encoder.forward(x));
  CHECK(back[1].forward(m.encode(x)) == m.decode(m.encode(x)));
  io::write_text(path, "garbage");
  CHECK_THROWS_AS(nn::read_checkpoint(path), InputError);
  std::filesystem::remove(path);
}
