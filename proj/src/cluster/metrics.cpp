#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "terrasense/cluster_eval.hpp"
#include "terrasense/io.hpp"

namespace terrasense::cluster {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                               std::to_string(b) + ")");
}

/* Dense 0..n-1 relabeling in ascending order of the original values. */
std::vector<int> densify(std::span<const int> v, int* count) {
  std::map<int, int> ids;
  for (int x : v) ids.emplace(x, 0);
  int next = 0;
  for (auto& [key, id] : ids) id = next++;
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = ids[v[i]];
  *count = next;
  return out;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace

CountMatrix contingency(std::span<const int> truth, std::span<const int> pred, int rows, int cols) {
  check_lengths(truth.size(), pred.size(), "contingency");
  CountMatrix m = CountMatrix::Zero(rows, cols);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= rows || pred[i] < 0 || pred[i] >= cols) {
      throw InputError("contingency: label out of range");
    }
    ++m(truth[i], pred[i]);
  }
  return m;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred.size(), truth.size(), "clustering_accuracy");
  if (pred.empty()) throw InputError("clustering_accuracy: empty input");
  int np = 0;
  int nt = 0;
  const auto p = densify(pred, &np);
  const auto t = densify(truth, &nt);
  const int d = std::max(np, nt);
  const auto counts = contingency(p, t, d, d);
  const auto match = hungarian(-counts.cast<double>());
  long long hit = 0;
  for (int i = 0; i < d; ++i) hit += counts(i, match.row_to_col[i]);
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<int> best_mapping(std::span<const int> pred, std::span<const int> truth, int num_clusters,
                              int num_classes) {
  check_lengths(pred.size(), truth.size(), "best_mapping");
  const int d = std::max(num_clusters, num_classes);
  const auto counts = contingency(pred, truth, d, d);
  const auto match = hungarian(-counts.cast<double>());
  std::vector<int> out(static_cast<std::size_t>(num_clusters), -1);
  for (int c = 0; c < num_clusters; ++c) {
    if (match.row_to_col[c] < num_classes) out[c] = match.row_to_col[c];
  }
  return out;
}

double nmi(std::span<const int> y, std::span<const int> c) {
  check_lengths(y.size(), c.size(), "nmi");
  if (y.empty()) throw InputError("nmi: empty input");
  int ny = 0;
  int nc = 0;
  const auto yy = densify(y, &ny);
  const auto cc = densify(c, &nc);
  const auto joint = contingency(yy, cc, ny, nc).cast<double>();
  const double n = static_cast<double>(y.size());
  std::vector<double> py(ny, 0.0);
  std::vector<double> pc(nc, 0.0);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nc; ++j) {
      py[i] += joint(i, j);
      pc[j] += joint(i, j);
    }
  }
  const double hy = entropy(py, n);
  const double hc = entropy(pc, n);
  if (hy + hc == 0.0) return 1.0;
  double mi = 0.0;
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nc; ++j) {
      const double nij = joint(i, j);
      if (nij > 0.0) mi += (nij / n) * std::log(nij * n / (py[i] * pc[j]));
    }
  }
  return std::clamp(2.0 * mi / (hy + hc), 0.0, 1.0);
}

ClassScores iou_scores(std::span<const std::int16_t> pred, std::span<const std::int16_t> truth, int k) {
  check_lengths(pred.size(), truth.size(), "iou_scores");
  std::vector<long long> inter(k, 0);
  std::vector<long long> uni(k, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i];
    const int t = truth[i];
    if (p < 0 || t < 0) continue;
    if (p >= k || t >= k) throw InputError("iou_scores: class id out of range");
    if (p == t) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[t];
    }
  }
  ClassScores out;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    if (uni[c] == 0) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.per_class.push_back(static_cast<double>(inter[c]) / static_cast<double>(uni[c]));
    out.mean += out.per_class.back();
    ++present;
  }
  out.mean = present > 0 ? out.mean / present : 0.0;
  return out;
}

ClassScores recall_scores(std::span<const std::int16_t> pred, std::span<const std::int16_t> weak_truth, int k) {
  check_lengths(pred.size(), weak_truth.size(), "recall_scores");
  std::vector<long long> hit(k, 0);
  std::vector<long long> total(k, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int t = weak_truth[i];
    if (t < 0) continue;
    if (t >= k) throw InputError("recall_scores: class id out of range");
    ++total[t];
    if (pred[i] == t) ++hit[t];
  }
  ClassScores out;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    if (total[c] == 0) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.per_class.push_back(static_cast<double>(hit[c]) / static_cast<double>(total[c]));
    out.mean += out.per_class.back();
    ++present;
  }
  out.mean = present > 0 ? out.mean / present : 0.0;
  return out;
}

void write_confusion_csv(const std::filesystem::path& path, const CountMatrix& counts) {
  io::CsvTable t;
  t.header.push_back("truth");
  for (Eigen::Index j = 0; j < counts.cols(); ++j) t.header.push_back("pred_" + std::to_string(j));
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index j = 0; j < counts.cols(); ++j) row.push_back(std::to_string(counts(i, j)));
    t.rows.push_back(std::move(row));
  }
  io::write_csv(path, t);
}

}  // namespace terrasense::cluster
