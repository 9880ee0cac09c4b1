#include "terrasense/cluster_eval.hpp"
#include "terrasense/triplets.hpp"

namespace terrasense::triplets {

namespace {

constexpr int kBins = 8;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long n = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double variance() const { return n > 0 ? std::max(0.0, sum_sq / static_cast<double>(n) - mean() * mean()) : 0.0; }
};

}  // namespace

Eigen::VectorXd visual_features(const RgbImage& patch) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  Grid<double> grey(patch.width, patch.height, -1.0);
  long long valid = 0;
  for (int r = 0; r < patch.height; ++r) {
    for (int c = 0; c < patch.width; ++c) {
      const Rgb px = patch.at(r, c);
      if (px == kVoidColor) continue;
      ++valid;
      f(px.r / 32) += 1.0;
      f(kBins + px.g / 32) += 1.0;
      f(2 * kBins + px.b / 32) += 1.0;
      grey.at(r, c) = (px.r + px.g + px.b) / (3.0 * 255.0);
    }
  }
  if (valid == 0) throw InputError("visual_features: patch has no valid pixels");
  f.head(3 * kBins) /= static_cast<double>(valid);

  Moments horizontal;
  Moments vertical;
  for (int r = 0; r < patch.height; ++r) {
    for (int c = 0; c < patch.width; ++c) {
      const double g = grey.at(r, c);
      if (g < 0.0) continue;
      if (c + 1 < patch.width && grey.at(r, c + 1) >= 0.0) horizontal.add(grey.at(r, c + 1) - g);
      if (r + 1 < patch.height && grey.at(r + 1, c) >= 0.0) vertical.add(grey.at(r + 1, c) - g);
    }
  }
  f(24) = horizontal.mean();
  f(25) = horizontal.variance();
  f(26) = vertical.mean();
  f(27) = vertical.variance();
  return f;
}

Eigen::MatrixXd visual_features(std::span<const geometry::TerrainPatch> patches) {
  Eigen::MatrixXd out(kFeatureDim, static_cast<Eigen::Index>(patches.size()));
  for (std::size_t i = 0; i < patches.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = visual_features(patches[i].pixels);
  return out;
}

VisualClusters cluster_visual(const Eigen::MatrixXd& features, int k, std::uint64_t seed, int restarts) {
  cluster::KMeansParams p;
  p.k = k;
  p.seed = seed;
  p.restarts = restarts;
  auto result = cluster::kmeans(features, p);
  return {std::move(result.labels), std::move(result.empty_clusters), result.inertia};
}

}  // namespace terrasense::triplets
