#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"
#include "terrasense/geometry.hpp"

namespace terrasense::triplets {

/// 3 channels x 8 histogram bins, plus mean/variance of horizontal and vertical grey differences.
inline constexpr int kFeatureDim = 28;

/// Void pixels are skipped; an all-void patch throws InputError.
Eigen::VectorXd visual_features(const RgbImage& patch);
/// One column per patch.
Eigen::MatrixXd visual_features(std::span<const geometry::TerrainPatch> patches);

struct VisualClusters {
  std::vector<int> labels;
  std::vector<int> empty_clusters;
  double inertia = 0.0;
};

VisualClusters cluster_visual(const Eigen::MatrixXd& features, int k, std::uint64_t seed, int restarts = 10);

enum class PositiveRule { random, distance, cluster };
enum class NegativeRule { random, distance, cluster, ground_truth_ref };

struct SamplingMechanism {
  PositiveRule positive = PositiveRule::distance;
  NegativeRule negative = NegativeRule::cluster;

  /// "positive/negative", e.g. "distance/cluster", "random/random", "ground_truth".
  static SamplingMechanism parse(const std::string& text);
  std::string to_string() const;
};

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;

  bool operator==(const Triplet&) const = default;
};

struct SamplingOptions {
  int k = 5;
  std::uint64_t seed = 1;
  int kmeans_restarts = 10;
  int max_resample = 1000;  // anchor redraws before giving up
  // Truth labels; read only by the ground-truth reference mechanism.
  std::span<const int> reference_labels;
};

/*
 * Anchors are drawn uniformly with replacement. The ground-truth reference
 * mechanism draws both the positive and the negative from the reference labels.
 */
std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& features, const SamplingMechanism& mechanism,
                                     std::size_t n, const SamplingOptions& options);

/// Same, with visual clusters computed beforehand.
std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& features, const SamplingMechanism& mechanism,
                                     std::size_t n, const SamplingOptions& options, std::span<const int> clusters);

bool is_correct(const Triplet& t, std::span<const int> labels);
double triplet_correctness(std::span<const Triplet> triplets, std::span<const int> labels);

/// Flips exactly round(target * n) triplets into the correct state and the rest into the incorrect state.
std::vector<Triplet> corrupt_triplets(std::span<const Triplet> triplets, std::span<const int> labels,
                                      double target_correct_ratio, std::uint64_t seed);

void write_triplets_csv(const std::filesystem::path& path, std::span<const Triplet> triplets);
std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path);

}  // namespace terrasense::triplets
