#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "terrasense/io.hpp"
#include "terrasense/mapplan.hpp"

namespace terrasense::mapplan {

namespace {

void check_costs(std::span<const double> class_costs, double unknown_cost) {
  for (std::size_t c = 0; c < class_costs.size(); ++c) {
    if (!(class_costs[c] > 0.0)) throw ConfigError("cost of class " + std::to_string(c) + " must be positive");
  }
  if (!(unknown_cost > 0.0)) throw ConfigError("unknown cost must be positive");
}

}  // namespace

CostMap assign_costs(const LabelImage& classes, std::span<const double> class_costs, double unknown_cost) {
  check_costs(class_costs, unknown_cost);
  CostMap out(classes.width, classes.height, unknown_cost);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int c = classes.data[i];
    if (c < 0) continue;
    if (static_cast<std::size_t>(c) >= class_costs.size()) {
      throw ConfigError("no cost configured for class " + std::to_string(c));
    }
    out.data[i] = class_costs[c];
  }
  return out;
}

CostMap assign_costs(const SemanticMap& map, std::span<const double> class_costs, double unknown_cost) {
  return assign_costs(map.classes(), class_costs, unknown_cost);
}

std::vector<double> parse_cost_table(const KeyValueConfig& table, int num_classes, double fallback) {
  std::vector<double> costs(static_cast<std::size_t>(num_classes), fallback);
  for (const auto& [key, value] : table.values()) {
    int cls = 0;
    try {
      std::size_t pos = 0;
      cls = std::stoi(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError("cost table key is not a class id: " + key);
    }
    if (cls < 0 || cls >= num_classes) throw ConfigError("cost table class out of range: " + key);
    costs[cls] = table.get_double(key, fallback);
  }
  check_costs(costs, 1.0);
  return costs;
}

Trajectory plan(const CostMap& costs, Cell start, Cell goal) {
  if (!costs.contains(start.row, start.col) || !costs.contains(goal.row, goal.col)) {
    throw InputError("start or goal outside the cost map");
  }
  for (double c : costs.data) {
    if (!(c > 0.0)) throw InputError("cost map entries must be positive");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Trajectory t;
  if (std::isinf(costs.at(start.row, start.col)) || std::isinf(costs.at(goal.row, goal.col))) return t;

  const auto n = costs.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<char> done(n, 0);
  struct Entry {
    double d;
    std::uint64_t seq;
    std::size_t node;
    bool operator>(const Entry& o) const { return d != o.d ? d > o.d : seq > o.seq; }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t seq = 0;
  const auto s = costs.index(start.row, start.col);
  const auto g = costs.index(goal.row, goal.col);
  dist[s] = costs.data[s];
  open.push({dist[s], seq++, s});
  constexpr int kDr[4] = {0, -1, 0, 1};  // E, N, W, S
  constexpr int kDc[4] = {1, 0, -1, 0};
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (done[e.node]) continue;
    done[e.node] = 1;
    if (e.node == g) break;
    const int r = static_cast<int>(e.node / static_cast<std::size_t>(costs.width));
    const int c = static_cast<int>(e.node % static_cast<std::size_t>(costs.width));
    for (int k = 0; k < 4; ++k) {
      const int nr = r + kDr[k];
      const int nc = c + kDc[k];
      if (!costs.contains(nr, nc)) continue;
      const auto m = costs.index(nr, nc);
      if (done[m] || std::isinf(costs.data[m])) continue;
      const double nd = e.d + costs.data[m];
      if (nd < dist[m]) {
        dist[m] = nd;
        parent[m] = static_cast<std::int64_t>(e.node);
        open.push({nd, seq++, m});
      }
    }
  }
  if (std::isinf(dist[g])) return t;
  t.found = true;
  t.cost = dist[g];
  for (auto v = static_cast<std::int64_t>(g); v >= 0; v = parent[v]) {
    t.cells.push_back({static_cast<int>(v / costs.width), static_cast<int>(v % costs.width)});
  }
  std::reverse(t.cells.begin(), t.cells.end());
  return t;
}

double path_cost(const CostMap& costs, std::span<const Cell> cells) {
  double total = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!costs.contains(cells[i].row, cells[i].col)) throw InputError("path leaves the cost map");
    if (i > 0 && std::abs(cells[i].row - cells[i - 1].row) + std::abs(cells[i].col - cells[i - 1].col) != 1) {
      throw InputError("path cells are not 4-adjacent");
    }
    total += costs.at(cells[i].row, cells[i].col);
  }
  return total;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  io::CsvTable table{{"row", "col"}, {}};
  for (const auto& c : t.cells) table.rows.push_back({std::to_string(c.row), std::to_string(c.col)});
  io::write_csv(path, table);
}

}  // namespace terrasense::mapplan
