#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "terrasense/io.hpp"
#include "terrasense/triplets.hpp"

namespace terrasense::triplets {

namespace {

struct Neighbours {
  std::vector<int> nearest;
  std::vector<int> farthest;
};

/* Exact brute-force search; ties keep the lower index. */
Neighbours neighbours(const Eigen::MatrixXd& x) {
  const auto n = static_cast<int>(x.cols());
  Neighbours out{std::vector<int>(n, -1), std::vector<int>(n, -1)};
  const Eigen::VectorXd sq = x.colwise().squaredNorm();
  const Eigen::MatrixXd gram = x.transpose() * x;
  for (int i = 0; i < n; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -1.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      if (d < lo) {
        lo = d;
        out.nearest[i] = j;
      }
      if (d > hi) {
        hi = d;
        out.farthest[i] = j;
      }
    }
  }
  return out;
}

/* Uniform draw from `pool` skipping the excluded entries; -1 if nothing is left. */
int draw_excluding(Rng& rng, const std::vector<int>& pool, int ex1, int ex2) {
  std::size_t usable = 0;
  for (int v : pool) usable += (v != ex1 && v != ex2) ? 1 : 0;
  if (usable == 0) return -1;
  auto pick = uniform_index(rng, usable);
  for (int v : pool) {
    if (v == ex1 || v == ex2) continue;
    if (pick-- == 0) return v;
  }
  return -1;
}

std::vector<std::vector<int>> members_by_label(std::span<const int> labels, int* num_labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw InputError("negative label in triplet sampling");
    out[labels[i]].push_back(static_cast<int>(i));
  }
  *num_labels = k;
  return out;
}

std::vector<int> complement_members(const std::vector<std::vector<int>>& groups, int excluded) {
  std::vector<int> out;
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    if (g != excluded) out.insert(out.end(), groups[g].begin(), groups[g].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SamplingMechanism SamplingMechanism::parse(const std::string& text) {
  if (text == "ground_truth" || text == "ground_truth_ref") return {PositiveRule::cluster, NegativeRule::ground_truth_ref};
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigError("sampling mechanism must be positive/negative: " + text);
  const auto pos = text.substr(0, slash);
  const auto neg = text.substr(slash + 1);
  SamplingMechanism m;
  if (pos == "random") m.positive = PositiveRule::random;
  else if (pos == "distance") m.positive = PositiveRule::distance;
  else if (pos == "cluster") m.positive = PositiveRule::cluster;
  else throw ConfigError("unknown positive rule: " + pos);
  if (neg == "random") m.negative = NegativeRule::random;
  else if (neg == "distance") m.negative = NegativeRule::distance;
  else if (neg == "cluster") m.negative = NegativeRule::cluster;
  else if (neg == "ground_truth_ref") m.negative = NegativeRule::ground_truth_ref;
  else throw ConfigError("unknown negative rule: " + neg);
  return m;
}

std::string SamplingMechanism::to_string() const {
  if (negative == NegativeRule::ground_truth_ref) return "ground_truth";
  static const char* pos[] = {"random", "distance", "cluster"};
  static const char* neg[] = {"random", "distance", "cluster", "ground_truth_ref"};
  return std::string(pos[static_cast<int>(positive)]) + "/" + neg[static_cast<int>(negative)];
}

std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& features, const SamplingMechanism& mechanism,
                                     std::size_t n, const SamplingOptions& options) {
  const bool needs_clusters = mechanism.negative != NegativeRule::ground_truth_ref &&
                              (mechanism.positive == PositiveRule::cluster || mechanism.negative == NegativeRule::cluster);
  std::vector<int> clusters;
  if (needs_clusters) {
    clusters = cluster_visual(features, options.k, derive_seed(options.seed, 1), options.kmeans_restarts).labels;
  }
  return sample_triplets(features, mechanism, n, options, clusters);
}

std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& features, const SamplingMechanism& mechanism,
                                     std::size_t n, const SamplingOptions& options, std::span<const int> clusters) {
  const auto count = static_cast<std::size_t>(features.cols());
  if (n == 0) throw InputError("sample_triplets: n must be >= 1");
  if (count < static_cast<std::size_t>(options.k) + 1 || count < 3) {
    throw InputError("sample_triplets: need at least K+1 samples, got " + std::to_string(count));
  }
  const bool truth_ref = mechanism.negative == NegativeRule::ground_truth_ref;
  if (truth_ref && options.reference_labels.size() != count) {
    throw InputError("sample_triplets: ground-truth reference needs one label per sample");
  }
  const bool uses_clusters = !truth_ref && (mechanism.positive == PositiveRule::cluster ||
                                            mechanism.negative == NegativeRule::cluster);
  if (uses_clusters && clusters.size() != count) throw InputError("sample_triplets: cluster labels missing");

  int num_groups = 0;
  std::vector<std::vector<int>> groups;
  std::span<const int> group_of;
  if (truth_ref) {
    group_of = options.reference_labels;
  } else if (uses_clusters) {
    group_of = clusters;
  }
  if (!group_of.empty()) groups = members_by_label(group_of, &num_groups);
  std::vector<std::vector<int>> others(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) others[g] = complement_members(groups, static_cast<int>(g));

  Neighbours nb;
  if (!truth_ref && (mechanism.positive == PositiveRule::distance || mechanism.negative == NegativeRule::distance)) {
    nb = neighbours(features);
  }
  std::vector<int> everyone(count);
  std::iota(everyone.begin(), everyone.end(), 0);

  Rng rng(derive_seed(options.seed, 2));
  std::vector<Triplet> out;
  out.reserve(n);
  int failures = 0;
  while (out.size() < n) {
    const int a = static_cast<int>(uniform_index(rng, count));
    int p = -1;
    int q = -1;
    if (truth_ref) {
      p = draw_excluding(rng, groups[group_of[a]], a, -1);
      q = draw_excluding(rng, others[group_of[a]], a, -1);
    } else {
      switch (mechanism.positive) {
        case PositiveRule::random: p = draw_excluding(rng, everyone, a, -1); break;
        case PositiveRule::distance: p = nb.nearest[a]; break;
        case PositiveRule::cluster: p = draw_excluding(rng, groups[group_of[a]], a, -1); break;
      }
      if (p >= 0) {
        switch (mechanism.negative) {
          case NegativeRule::random: q = draw_excluding(rng, everyone, a, p); break;
          case NegativeRule::distance: q = nb.farthest[a]; break;
          case NegativeRule::cluster: q = draw_excluding(rng, others[group_of[a]], a, p); break;
          case NegativeRule::ground_truth_ref: break;
        }
      }
    }
    if (p < 0 || q < 0 || p == q || p == a || q == a) {
      if (++failures > options.max_resample) {
        throw InputError("sample_triplets: gave up after " + std::to_string(options.max_resample) +
                         " anchor redraws (singleton clusters?)");
      }
      continue;
    }
    out.push_back({a, p, q});
  }
  return out;
}

bool is_correct(const Triplet& t, std::span<const int> labels) {
  return labels[t.anchor] == labels[t.positive] && labels[t.anchor] != labels[t.negative];
}

double triplet_correctness(std::span<const Triplet> triplets, std::span<const int> labels) {
  if (triplets.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& t : triplets) {
    for (int idx : {t.anchor, t.positive, t.negative}) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size()) throw InputError("triplet index out of range");
    }
    ok += is_correct(t, labels) ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(triplets.size());
}

std::vector<Triplet> corrupt_triplets(std::span<const Triplet> triplets, std::span<const int> labels,
                                      double target_correct_ratio, std::uint64_t seed) {
  if (!(target_correct_ratio >= 0.0 && target_correct_ratio <= 1.0)) {
    throw InputError("corrupt_triplets: target must lie in [0, 1]");
  }
  std::vector<Triplet> out(triplets.begin(), triplets.end());
  if (out.empty()) return out;
  (void)triplet_correctness(out, labels);

  int num_groups = 0;
  const auto groups = members_by_label(labels, &num_groups);
  std::vector<std::vector<int>> others(groups.size());
  int nonempty = 0;
  bool has_pair = false;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    others[g] = complement_members(groups, static_cast<int>(g));
    nonempty += groups[g].empty() ? 0 : 1;
    has_pair = has_pair || groups[g].size() >= 2;
  }
  const auto n = out.size();
  const auto want = static_cast<std::size_t>(std::llround(target_correct_ratio * static_cast<double>(n)));
  if (want > 0 && (nonempty < 2 || !has_pair)) {
    throw InputError("corrupt_triplets: no correct triplet can be formed from these labels");
  }

  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i) (is_correct(out[i], labels) ? good : bad).push_back(i);
  Rng rng(seed);

  if (good.size() > want) {
    std::shuffle(good.begin(), good.end(), rng);
    for (std::size_t idx = 0; idx < good.size() - want; ++idx) {
      auto& t = out[good[idx]];
      const int g = labels[t.anchor];
      const bool swap_positive = std::bernoulli_distribution(0.5)(rng);
      // Either a positive from another class or a negative from the anchor's class.
      const int new_pos = draw_excluding(rng, others[g], t.negative, -1);
      const int new_neg = draw_excluding(rng, groups[g], t.anchor, t.positive);
      if ((swap_positive || new_neg < 0) && new_pos >= 0) {
        t.positive = new_pos;
      } else if (new_neg >= 0) {
        t.negative = new_neg;
      } else {
        std::swap(t.positive, t.negative);
      }
    }
  } else if (good.size() < want) {
    std::shuffle(bad.begin(), bad.end(), rng);
    for (std::size_t idx = 0; idx < want - good.size(); ++idx) {
      auto& t = out[bad[idx]];
      int g = labels[t.anchor];
      if (groups[g].size() < 2) {
        std::vector<int> pool;
        for (std::size_t h = 0; h < groups.size(); ++h) {
          if (groups[h].size() >= 2) pool.insert(pool.end(), groups[h].begin(), groups[h].end());
        }
        t.anchor = pool[uniform_index(rng, pool.size())];
        g = labels[t.anchor];
      }
      t.positive = draw_excluding(rng, groups[g], t.anchor, -1);
      t.negative = draw_excluding(rng, others[g], -1, -1);
    }
  }
  return out;
}

void write_triplets_csv(const std::filesystem::path& path, std::span<const Triplet> triplets) {
  io::CsvTable t{{"anchor", "positive", "negative"}, {}};
  for (const auto& tr : triplets) {
    t.rows.push_back({std::to_string(tr.anchor), std::to_string(tr.positive), std::to_string(tr.negative)});
  }
  io::write_csv(path, t);
}

std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path) {
  const auto t = io::read_csv(path);
  const auto a = t.column("anchor");
  const auto p = t.column("positive");
  const auto n = t.column("negative");
  std::vector<Triplet> out;
  for (const auto& row : t.rows) out.push_back({std::stoi(row.at(a)), std::stoi(row.at(p)), std::stoi(row.at(n))});
  return out;
}

}  // namespace terrasense::triplets
