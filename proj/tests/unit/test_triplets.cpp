#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "terrasense/synthgen.hpp"
#include "terrasense/triplets.hpp"

using namespace terrasense;
using namespace terrasense::triplets;

namespace {

// k well separated Gaussian blobs, `per` points each, in `dim` dimensions.
Eigen::MatrixXd blobs(int k, int per, int dim, double spread, std::uint64_t seed, std::vector<int>* labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, spread);
  Eigen::MatrixXd x(dim, k * per);
  labels->clear();
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per; ++i) {
      for (int d = 0; d < dim; ++d) x(d, c * per + i) = (d == c % dim ? 10.0 * (1 + c / dim) : 0.0) + n(rng);
      labels->push_back(c);
    }
  }
  return x;
}

bool distinct(const Triplet& t) { return t.anchor != t.positive && t.anchor != t.negative && t.positive != t.negative; }

}  // namespace

TEST_CASE("constant patch features") {
  RgbImage p(10, 10, Rgb{40, 100, 250});
  const auto f = visual_features(p);
  REQUIRE(f.size() == kFeatureDim);
  CHECK(f(1) == doctest::Approx(1.0));
  CHECK(f(8 + 3) == doctest::Approx(1.0));
  CHECK(f(16 + 7) == doctest::Approx(1.0));
  CHECK(f.head(24).sum() == doctest::Approx(3.0));
  CHECK(f.tail(4).norm() == doctest::Approx(0.0));
  CHECK(visual_features(p) == f);
}

TEST_CASE("texture statistics by hand") {
  // Vertical stripes: grey alternates 0 and 1 along a row.
  RgbImage p(4, 2);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) p.at(r, c) = c % 2 ? Rgb{255, 255, 255} : Rgb{0, 0, 0};
  }
  const auto f = visual_features(p);
  // Horizontal differences: +1, -1, +1 per row.
  CHECK(f(24) == doctest::Approx(1.0 / 3.0));
  CHECK(f(25) == doctest::Approx(1.0 - 1.0 / 9.0));
  CHECK(f(26) == doctest::Approx(0.0));
  CHECK(f(27) == doctest::Approx(0.0));
}

TEST_CASE("void pixels are excluded") {
  RgbImage p(4, 4, Rgb{10, 10, 10});
  p.at(0, 0) = kVoidColor;
  const auto f = visual_features(p);
  CHECK(f(0) == doctest::Approx(1.0));
  CHECK(f(7) == doctest::Approx(0.0));
  CHECK_THROWS_AS(visual_features(RgbImage(3, 3, kVoidColor)), InputError);
}

TEST_CASE("different textures are further apart than samples of one texture") {
  const auto spec = synth::easy_world_spec(3);
  const auto world = synth::generate_world(spec);
  // Find one interior cell of each of two classes and crop patches around it.
  auto crop = [&](int cls, int which) {
    int found = 0;
    for (int iy = 20; iy < world.height_px() - 20; iy += 7) {
      for (int ix = 20; ix < world.width_px() - 20; ix += 7) {
        bool pure = true;
        for (int dy = -6; dy <= 6 && pure; ++dy) {
          for (int dx = -6; dx <= 6; ++dx) pure = pure && world.class_at_cell(ix + dx, iy + dy) == cls;
        }
        if (pure && found++ == which) {
          RgbImage p(10, 10);
          for (int r = 0; r < 10; ++r) {
            for (int c = 0; c < 10; ++c) p.at(r, c) = world.cell_color(ix - 5 + c, iy - 5 + r);
          }
          return visual_features(p);
        }
      }
    }
    FAIL("no interior patch for class " << cls);
    return Eigen::VectorXd();
  };
  for (int a = 0; a < 5; ++a) {
    for (int b = a + 1; b < 5; ++b) {
      const auto a1 = crop(a, 0);
      const auto a2 = crop(a, 40);
      const auto b1 = crop(b, 0);
      CHECK((a1 - b1).norm() > (a1 - a2).norm());
    }
  }
}

TEST_CASE("visual clustering") {
  std::vector<int> truth;
  const auto x = blobs(2, 30, 4, 0.5, 1, &truth);
  const auto c = cluster_visual(x, 2, 7);
  for (int i = 0; i < 60; ++i) CHECK((c.labels[static_cast<std::size_t>(i)] == c.labels[0]) == (truth[static_cast<std::size_t>(i)] == 0));

  const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(3, 10);
  const auto s = cluster_visual(same, 3, 7);
  CHECK(std::all_of(s.labels.begin(), s.labels.end(), [&](int l) { return l == s.labels[0]; }));
  CHECK(s.empty_clusters.size() == 2);

  // Permuting the input permutes the partition.
  std::vector<int> perm(60);
  for (int i = 0; i < 60; ++i) perm[static_cast<std::size_t>(i)] = (i * 7) % 60;
  Eigen::MatrixXd xp(x.rows(), x.cols());
  for (int i = 0; i < 60; ++i) xp.col(i) = x.col(perm[static_cast<std::size_t>(i)]);
  const auto cp = cluster_visual(xp, 2, 7);
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 60; ++j) {
      const bool together = c.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] ==
                            c.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
      CHECK((cp.labels[static_cast<std::size_t>(i)] == cp.labels[static_cast<std::size_t>(j)]) == together);
    }
  }
}

TEST_CASE("mechanism names") {
  CHECK(SamplingMechanism::parse("distance/cluster").to_string() == "distance/cluster");
  CHECK(SamplingMechanism::parse("random/random").positive == PositiveRule::random);
  CHECK(SamplingMechanism::parse("ground_truth").negative == NegativeRule::ground_truth_ref);
  CHECK_THROWS_AS(SamplingMechanism::parse("nearest/cluster"), ConfigError);
}

TEST_CASE("random sampling on balanced classes") {
  std::vector<int> truth;
  const auto x = blobs(5, 40, 5, 0.5, 2, &truth);
  SamplingOptions opt;
  opt.seed = 3;
  const auto t = sample_triplets(x, SamplingMechanism::parse("random/random"), 10000, opt);
  REQUIRE(t.size() == 10000);
  CHECK(std::all_of(t.begin(), t.end(), distinct));
  // Exact expectation with replacement-free draws of positive and negative.
  const double n = 200;
  const double expected = (39.0 / (n - 1)) * (160.0 / (n - 2));
  const double got = triplet_correctness(t, truth);
  CHECK(std::abs(got - 0.16) <= 0.02);
  CHECK(std::abs(got - expected) <= 0.02);
}

TEST_CASE("informed sampling on separable features") {
  std::vector<int> truth;
  const auto x = blobs(5, 30, 5, 0.3, 4, &truth);
  SamplingOptions opt;
  opt.seed = 5;
  const auto dc = sample_triplets(x, SamplingMechanism::parse("distance/cluster"), 2000, opt);
  CHECK(triplet_correctness(dc, truth) == doctest::Approx(1.0));
  const auto rr = sample_triplets(x, SamplingMechanism::parse("random/random"), 2000, opt);
  for (const auto* name : {"cluster/cluster", "cluster/distance", "distance/distance"}) {
    const auto t = sample_triplets(x, SamplingMechanism::parse(name), 2000, opt);
    CHECK(std::all_of(t.begin(), t.end(), distinct));
    CHECK(triplet_correctness(t, truth) >= triplet_correctness(rr, truth));
  }
  CHECK(triplet_correctness(dc, truth) >= triplet_correctness(rr, truth));
}

TEST_CASE("distance rules pick nearest and farthest") {
  Eigen::MatrixXd x(1, 5);
  x << 0.0, 1.0, 3.0, 7.0, 20.0;
  SamplingOptions opt;
  opt.k = 2;
  opt.seed = 9;
  const auto t = sample_triplets(x, SamplingMechanism::parse("distance/distance"), 200, opt);
  const std::map<int, std::pair<int, int>> expect{{0, {1, 4}}, {1, {0, 4}}, {2, {1, 4}}, {3, {2, 4}}, {4, {3, 0}}};
  for (const auto& tr : t) {
    CHECK(tr.positive == expect.at(tr.anchor).first);
    CHECK(tr.negative == expect.at(tr.anchor).second);
  }
}

TEST_CASE("ground-truth mechanism needs labels and is always correct") {
  std::vector<int> truth;
  const auto x = blobs(3, 20, 3, 2.0, 6, &truth);
  SamplingOptions opt;
  const auto gt = SamplingMechanism::parse("ground_truth");
  CHECK_THROWS(sample_triplets(x, gt, 10, opt));
  opt.reference_labels = truth;
  const auto t = sample_triplets(x, gt, 1000, opt);
  CHECK(triplet_correctness(t, truth) == doctest::Approx(1.0));
}

TEST_CASE("sampling is deterministic and validates input") {
  std::vector<int> truth;
  const auto x = blobs(3, 10, 3, 0.5, 8, &truth);
  SamplingOptions opt;
  opt.k = 3;
  opt.seed = 11;
  const auto m = SamplingMechanism::parse("distance/cluster");
  CHECK(sample_triplets(x, m, 100, opt) == sample_triplets(x, m, 100, opt));
  opt.seed = 12;
  CHECK(sample_triplets(x, m, 100, opt) != sample_triplets(x, m, 100, {.k = 3, .seed = 11}));
  CHECK_THROWS(sample_triplets(x, m, 0, opt));
  CHECK_THROWS(sample_triplets(x.leftCols(3), m, 10, opt));
}

TEST_CASE("correctness by direct count") {
  const std::vector<int> labels{0, 0, 1, 1, 2};
  const std::vector<Triplet> t{{0, 1, 2}, {2, 3, 4}, {1, 0, 3}, {0, 2, 4}};
  CHECK(triplet_correctness(t, labels) == doctest::Approx(0.75));
  const std::vector<int> one(5, 0);
  CHECK(triplet_correctness(t, one) == doctest::Approx(0.0));
}

TEST_CASE("corruption hits the target ratio") {
  std::vector<int> truth;
  const auto x = blobs(5, 40, 5, 1.0, 10, &truth);
  SamplingOptions opt;
  opt.reference_labels = truth;
  opt.seed = 13;
  const auto gt = sample_triplets(x, SamplingMechanism::parse("ground_truth"), 1000, opt);
  CHECK(corrupt_triplets(gt, truth, 1.0, 1) == gt);
  for (double target : {0.0, 0.2, 0.5, 0.8}) {
    const auto c = corrupt_triplets(gt, truth, target, 2);
    CHECK(std::abs(triplet_correctness(c, truth) - target) <= 0.02);
    CHECK(std::all_of(c.begin(), c.end(), distinct));
  }
  // Upwards from random triplets as well.
  const auto rr = sample_triplets(x, SamplingMechanism::parse("random/random"), 1000, opt);
  const auto up = corrupt_triplets(rr, truth, 0.9, 3);
  CHECK(std::abs(triplet_correctness(up, truth) - 0.9) <= 0.02);
  CHECK(std::all_of(up.begin(), up.end(), distinct));

  const std::vector<int> single(200, 0);
  CHECK_THROWS_AS(corrupt_triplets(rr, single, 0.5, 1), InputError);
  CHECK_THROWS_AS(corrupt_triplets(rr, truth, 1.5, 1), InputError);
}

TEST_CASE("triplet csv round trip") {
  const std::vector<Triplet> t{{0, 1, 2}, {5, 3, 9}};
  const auto path = std::filesystem::temp_directory_path() / "terrasense_triplets.csv";
  write_triplets_csv(path, t);
  CHECK(read_triplets_csv(path) == t);
  std::filesystem::remove(path);
}
