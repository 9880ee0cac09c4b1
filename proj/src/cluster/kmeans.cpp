#include <algorithm>
#include <cmath>
#include <limits>

#include "terrasense/cluster_eval.hpp"

namespace terrasense::cluster {

namespace {

struct Run {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> trace;
  std::vector<int> empty;
};

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd c(x.rows(), k);
  c.col(0) = x.col(static_cast<Eigen::Index>(uniform_index(rng, n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.col(i) - c.col(0)).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    c.col(j) = x.col(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.col(i) - c.col(j)).squaredNorm());
  }
  return c;
}

double inertia_of(const Eigen::MatrixXd& x, const std::vector<int>& labels, const Eigen::MatrixXd& c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) s += (x.col(i) - c.col(labels[i])).squaredNorm();
  return s;
}

/* Moves the farthest member of the largest cluster into each empty cluster. */
std::vector<int> repair_empty(const Eigen::MatrixXd& x, std::vector<int>& labels, const Eigen::MatrixXd& c, int k) {
  std::vector<int> still_empty;
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[l];
  for (int e = 0; e < k; ++e) {
    if (counts[e] > 0) continue;
    const int largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    double far = 0.0;
    Eigen::Index far_i = -1;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      if (labels[i] != largest) continue;
      const double d = (x.col(i) - c.col(largest)).squaredNorm();
      if (d > far) {
        far = d;
        far_i = i;
      }
    }
    if (far_i < 0 || counts[largest] < 2) {
      still_empty.push_back(e);
      continue;
    }
    labels[far_i] = e;
    --counts[largest];
    ++counts[e];
  }
  return still_empty;
}

Run lloyd(const Eigen::MatrixXd& x, const KMeansParams& p, Rng& rng) {
  const int k = p.k;
  Run run;
  run.centroids = plus_plus_seeds(x, k, rng);
  run.labels = assign_to_centroids(x, run.centroids);
  for (int it = 0; it < p.max_iter; ++it) {
    run.empty = repair_empty(x, run.labels, run.centroids, k);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(x.rows(), k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      sums.col(run.labels[i]) += x.col(i);
      ++counts[run.labels[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) run.centroids.col(j) = sums.col(j) / counts[j];
    }
    run.inertia = inertia_of(x, run.labels, run.centroids);
    run.trace.push_back(run.inertia);

    auto next = assign_to_centroids(x, run.centroids);
    const bool same = next == run.labels;
    const double next_inertia = inertia_of(x, next, run.centroids);
    run.labels = std::move(next);
    if (same || run.inertia - next_inertia <= p.tol * std::max(run.inertia, 1e-300)) {
      if (!same) {
        run.inertia = next_inertia;
        run.trace.push_back(next_inertia);
      }
      break;
    }
  }
  run.empty.clear();
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : run.labels) ++counts[l];
  for (int j = 0; j < k; ++j) {
    if (counts[j] == 0) run.empty.push_back(j);
  }
  return run;
}

}  // namespace

std::vector<int> assign_to_centroids(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  std::vector<int> labels(static_cast<std::size_t>(points.cols()), 0);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centroids.cols(); ++j) {
      const double d = (points.col(i) - centroids.col(j)).squaredNorm();
      if (d < best) {
        best = d;
        labels[i] = static_cast<int>(j);
      }
    }
  }
  return labels;
}

ClusterAssignment kmeans(const Eigen::MatrixXd& points, const KMeansParams& params) {
  if (params.k < 1) throw InputError("k-means: k must be >= 1");
  if (params.k > points.cols()) {
    throw InputError("k-means: k = " + std::to_string(params.k) + " exceeds " + std::to_string(points.cols()) +
                     " points");
  }
  if (params.restarts < 1 || params.max_iter < 1) throw ConfigError("k-means: restarts and max_iter must be >= 1");
  if (!points.allFinite()) throw InputError("k-means: non-finite input");

  ClusterAssignment best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < params.restarts; ++r) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(r)));
    Run run = lloyd(points, params, rng);
    best.restart_inertias.push_back(run.inertia);
    if (run.inertia < best.inertia) {
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
      best.inertia_trace = std::move(run.trace);
      best.empty_clusters = std::move(run.empty);
      best.best_restart = r;
    }
  }
  return best;
}

}  // namespace terrasense::cluster
