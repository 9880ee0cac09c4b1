#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"

namespace oracle {

// O(N^2) DFT of one frame.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

struct BestPermutation {
  std::vector<int> perm;
  double cost = std::numeric_limits<double>::infinity();
};

// Enumerates permutations in lexicographic order; keeps the first strict minimum.
inline BestPermutation brute_force_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> p(static_cast<std::size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  BestPermutation best;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += c(static_cast<Eigen::Index>(i), p[i]);
    if (s < best.cost) {
      best.cost = s;
      best.perm = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Best accuracy (percent) over every injective cluster -> class map, by enumeration.
inline double exhaustive_accuracy(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<int> p(static_cast<std::size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += p[static_cast<std::size_t>(pred[i])] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(p.begin(), p.end()));
  return 100.0 * static_cast<double>(best) / static_cast<double>(pred.size());
}

// NMI from probabilities computed with maps, natural logs.
inline double nmi(const std::vector<int>& y, const std::vector<int>& c) {
  const double n = static_cast<double>(y.size());
  std::map<int, double> py;
  std::map<int, double> pc;
  std::map<std::pair<int, int>, double> pj;
  for (std::size_t i = 0; i < y.size(); ++i) {
    py[y[i]] += 1.0 / n;
    pc[c[i]] += 1.0 / n;
    pj[{y[i], c[i]}] += 1.0 / n;
  }
  double hy = 0.0;
  double hc = 0.0;
  double mi = 0.0;
  for (auto [k, p] : py) hy -= p * std::log(p);
  for (auto [k, p] : pc) hc -= p * std::log(p);
  for (auto [k, p] : pj) mi += p * std::log(p / (py[k.first] * pc[k.second]));
  if (hy + hc == 0.0) return 1.0;
  return 2.0 * mi / (hy + hc);
}

// Node-weighted shortest path by edge relaxation until no change; cost includes the start node.
inline double bellman_ford(const terrasense::Grid<double>& cost, int sr, int sc, int gr, int gc) {
  const int w = cost.width;
  const int h = cost.height;
  std::vector<double> d(static_cast<std::size_t>(w * h), std::numeric_limits<double>::infinity());
  d[static_cast<std::size_t>(sr * w + sc)] = cost.at(sr, sc);
  const int dr[4] = {0, -1, 0, 1};
  const int dc[4] = {1, 0, -1, 0};
  for (int iter = 0; iter < w * h; ++iter) {
    bool changed = false;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double du = d[static_cast<std::size_t>(r * w + c)];
        if (std::isinf(du)) continue;
        for (int k = 0; k < 4; ++k) {
          const int nr = r + dr[k];
          const int nc = c + dc[k];
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          const double cand = du + cost.at(nr, nc);
          double& dv = d[static_cast<std::size_t>(nr * w + nc)];
          if (cand < dv) {
            dv = cand;
            changed = true;
          }
        }
      }
    }
    if (!changed) break;
  }
  return d[static_cast<std::size_t>(gr * w + gc)];
}

}  // namespace oracle
