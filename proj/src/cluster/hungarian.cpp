#include <cmath>
#include <limits>

#include "terrasense/cluster_eval.hpp"

namespace terrasense::cluster {

namespace {

/* Shortest augmenting path with potentials (rows <= cols); returns the optimal cost. */
double solve(const Eigen::MatrixXd& a, std::vector<int>* row_to_col) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0);
  std::vector<int> way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  }
  double cost = 0.0;
  for (int i = 0; i < n; ++i) cost += a(i, assign[i]);
  if (row_to_col != nullptr) *row_to_col = std::move(assign);
  return cost;
}

}  // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw InputError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw InputError("hungarian: cost matrix must be finite");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  const double optimum = solve(cost, nullptr);
  const double tol = 1e-9 * std::max(1.0, cost.cwiseAbs().maxCoeff() * n);

  // Fix rows in order, taking the smallest column that still admits an optimal completion.
  std::vector<int> free_cols(n);
  for (int j = 0; j < n; ++j) free_cols[j] = j;
  double prefix = 0.0;
  for (int i = 0; i < n; ++i) {
    const int rest = n - i - 1;
    bool placed = false;
    for (std::size_t idx = 0; idx < free_cols.size() && !placed; ++idx) {
      const int j = free_cols[idx];
      double completion = 0.0;
      if (rest > 0) {
        Eigen::MatrixXd sub(rest, rest);
        int cc = 0;
        for (int col : free_cols) {
          if (col == j) continue;
          for (int r = 0; r < rest; ++r) sub(r, cc) = cost(i + 1 + r, col);
          ++cc;
        }
        completion = solve(sub, nullptr);
      }
      if (prefix + cost(i, j) + completion <= optimum + tol) {
        out.row_to_col.push_back(j);
        prefix += cost(i, j);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(idx));
        placed = true;
      }
    }
    if (!placed) throw StageError("hungarian", "tie resolution lost the optimum");
  }
  out.cost = prefix;
  return out;
}

}  // namespace terrasense::cluster
