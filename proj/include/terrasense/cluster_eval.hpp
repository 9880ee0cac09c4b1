#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"

namespace terrasense::cluster {

struct KMeansParams {
  int k = 5;
  std::uint64_t seed = 1;
  int restarts = 10;
  int max_iter = 300;
  double tol = 1e-10;  // relative inertia improvement that ends the Lloyd loop
};

struct ClusterAssignment {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // dim x k
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the returned restart
  std::vector<double> restart_inertias;
  int best_restart = 0;
  std::vector<int> empty_clusters;  // clusters left without members
};

/// Points are the columns of `points`. Throws InputError if k exceeds the point count.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, const KMeansParams& params);
/// Nearest centroid per point; ties go to the lower cluster id.
std::vector<int> assign_to_centroids(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids);

struct Assignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching; among optimal matchings the lexicographically smallest row_to_col is returned.
Assignment hungarian(const Eigen::MatrixXd& cost);

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are truth labels 0..rows-1, columns predicted labels 0..cols-1.
CountMatrix contingency(std::span<const int> truth, std::span<const int> pred, int rows, int cols);

/// Percentage of samples matched under the best one-to-one cluster-to-class mapping.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);
/// Cluster id -> class id under that mapping (-1 for clusters left unmatched).
std::vector<int> best_mapping(std::span<const int> pred, std::span<const int> truth, int num_clusters, int num_classes);
double nmi(std::span<const int> y, std::span<const int> c);

struct ClassScores {
  std::vector<double> per_class;  // NaN where the class is absent
  double mean = 0.0;              // over classes that are present
};

/// Pixels where either mask is negative (background or void) are ignored.
ClassScores iou_scores(std::span<const std::int16_t> pred, std::span<const std::int16_t> truth, int k);
/// Recall over the labeled (non-negative) pixels of the weak mask.
ClassScores recall_scores(std::span<const std::int16_t> pred, std::span<const std::int16_t> weak_truth, int k);

void write_confusion_csv(const std::filesystem::path& path, const CountMatrix& counts);

}  // namespace terrasense::cluster
