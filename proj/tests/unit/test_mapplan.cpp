#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "terrasense/mapplan.hpp"

using namespace terrasense;
using namespace terrasense::mapplan;

namespace {

constexpr double kMpp = 0.05;

LabelImage striped_mask(int size, int offset) {
  LabelImage m(size, size, static_cast<std::int16_t>(kBackground));
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if ((r + c) % 5 != 4) m.at(r, c) = static_cast<std::int16_t>((c + offset) / 3 % 3);
    }
  }
  return m;
}

Grid<double> random_costs(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(1, 9);
  Grid<double> g(w, h, 1.0);
  for (auto& v : g.data) v = u(rng);
  return g;
}

bool adjacent(const Cell& a, const Cell& b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

}  // namespace

TEST_CASE("map cell geometry is north up") {
  SemanticMap map(20, 10, 3, kMpp);
  Cell c;
  REQUIRE(map.cell_of(0.01, 0.01, &c));
  CHECK(c == Cell{9, 0});
  REQUIRE(map.cell_of(0.99, 0.49, &c));
  CHECK(c == Cell{0, 19});
  CHECK(!map.cell_of(1.01, 0.2, &c));
  CHECK(!map.cell_of(-0.01, 0.2, &c));
  CHECK(map.class_at(3, 3) == kVoid);
}

TEST_CASE("one observation reproduces the mask") {
  SemanticMap map(20, 20, 3, kMpp);
  const auto mask = striped_mask(10, 0);
  const auto cam = geometry::CameraModel::birdseye(2.0, kMpp, 10, 10);
  const auto rep = fuse_observation(map, mask, geometry::Pose::from_yaw(0, 0.5, 0.5, 0), cam);
  CHECK(rep.clipped == 0);
  std::size_t labeled = 0;
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      // Pixel (r, c) lands on map cell (5 + r, 5 + c).
      const int expect = mask.at(r, c) >= 0 ? mask.at(r, c) : kVoid;
      CHECK(map.class_at(5 + r, 5 + c) == expect);
      labeled += mask.at(r, c) >= 0;
    }
  }
  CHECK(rep.votes_added == labeled);
  CHECK(map.class_at(0, 0) == kVoid);
}

TEST_CASE("majority vote and ties") {
  SemanticMap map(4, 4, 3, kMpp);
  map.add_vote(1, 1, 1);
  map.add_vote(1, 1, 1);
  map.add_vote(1, 1, 2);
  CHECK(map.class_at(1, 1) == 1);
  map.add_vote(2, 2, 2);
  map.add_vote(2, 2, 1);
  CHECK(map.class_at(2, 2) == 1);
  CHECK(map.votes(2, 2, 2) == 1);
}

TEST_CASE("fusion is order invariant and clips outside the map") {
  const auto cam = geometry::CameraModel::birdseye(2.0, kMpp, 10, 10);
  std::vector<std::pair<LabelImage, geometry::Pose>> obs;
  for (int i = 0; i < 6; ++i) obs.emplace_back(striped_mask(10, i), geometry::Pose::from_yaw(0, 0.1 + 0.07 * i, 0.5, 0));
  SemanticMap a(20, 20, 3, kMpp);
  SemanticMap b(20, 20, 3, kMpp);
  for (const auto& [m, p] : obs) fuse_observation(a, m, p, cam);
  std::reverse(obs.begin(), obs.end());
  std::size_t clipped = 0;
  for (const auto& [m, p] : obs) clipped += fuse_observation(b, m, p, cam).clipped;
  CHECK(std::equal(a.raw_votes().begin(), a.raw_votes().end(), b.raw_votes().begin(), b.raw_votes().end()));
  CHECK(a.classes() == b.classes());
  CHECK(clipped > 0);  // the first views reach past the west edge
}

TEST_CASE("cost assignment") {
  LabelImage classes(6, 2, 0);
  for (int c = 0; c < 6; c += 2) classes.at(0, c) = classes.at(1, c) = 1;
  classes.at(1, 5) = static_cast<std::int16_t>(kVoid);
  const std::vector<double> costs{1.0, 100.0};
  const auto g = assign_costs(classes, costs, 50.0);
  CHECK(g.at(0, 0) == 100.0);
  CHECK(g.at(0, 1) == 1.0);
  CHECK(g.at(1, 5) == 50.0);
  const std::vector<double> ones{1.0, 1.0};
  const auto u = assign_costs(classes, ones, 1.0);
  CHECK(std::all_of(u.data.begin(), u.data.end(), [](double v) { return v == 1.0; }));
  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(assign_costs(classes, bad, 1.0), ConfigError);
  CHECK_THROWS_AS(assign_costs(classes, ones, -1.0), ConfigError);
}

TEST_CASE("cost table parsing") {
  auto kv = KeyValueConfig::parse("0=1\n2=100\n");
  CHECK(parse_cost_table(kv, 3) == std::vector<double>{1.0, 1.0, 100.0});
  CHECK(parse_cost_table(kv, 3, 7.0)[1] == 7.0);
  kv.set("9", "3");
  CHECK_THROWS_AS(parse_cost_table(kv, 3), ConfigError);
}

TEST_CASE("uniform costs give Manhattan paths") {
  const Grid<double> g(15, 10, 1.0);
  const auto t = plan(g, {1, 2}, {8, 13});
  REQUIRE(t.found);
  CHECK(t.cells.size() == 7 + 11 + 1);
  CHECK(t.cost == 19.0);
  CHECK(t.cells.front() == Cell{1, 2});
  CHECK(t.cells.back() == Cell{8, 13});
  for (std::size_t i = 1; i < t.cells.size(); ++i) CHECK(adjacent(t.cells[i - 1], t.cells[i]));
  // East moves are expanded first, so the path leaves the start eastwards.
  CHECK(t.cells[1] == Cell{1, 3});
}

TEST_CASE("start equals goal") {
  Grid<double> g(5, 5, 1.0);
  g.at(2, 2) = 4.5;
  const auto t = plan(g, {2, 2}, {2, 2});
  CHECK(t.cells.size() == 1);
  CHECK(t.cost == 4.5);
}

TEST_CASE("wall with one gap") {
  Grid<double> g(20, 20, 1.0);
  for (int r = 0; r < 20; ++r) g.at(r, 10) = r == 15 ? 1.0 : 1000.0;
  const auto t = plan(g, {2, 2}, {2, 17});
  REQUIRE(t.found);
  CHECK(std::find(t.cells.begin(), t.cells.end(), Cell{15, 10}) != t.cells.end());
  CHECK(t.cost == oracle::bellman_ford(g, 2, 2, 2, 17));
  CHECK(path_cost(g, t.cells) == t.cost);
}

TEST_CASE("planner matches Bellman-Ford on random grids") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> cell(0, 19);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_costs(20, 20, rng);
    const Cell s{cell(rng), cell(rng)};
    const Cell e{cell(rng), cell(rng)};
    const auto t = plan(g, s, e);
    REQUIRE(t.found);
    CHECK(t.cost == oracle::bellman_ford(g, s.row, s.col, e.row, e.col));
    CHECK(path_cost(g, t.cells) == t.cost);
  }
}

TEST_CASE("expensive terrain is avoided when a detour exists") {
  // Class 1 band across the middle with a class 0 corridor at the east edge.
  LabelImage classes(30, 30, 0);
  for (int r = 12; r < 18; ++r) {
    for (int c = 0; c < 27; ++c) classes.at(r, c) = 1;
  }
  const std::vector<double> costs{1.0, 100.0};
  const auto g = assign_costs(classes, costs, 50.0);
  const auto t = plan(g, {2, 3}, {27, 3});
  REQUIRE(t.found);
  for (const auto& c : t.cells) CHECK(classes.at(c.row, c.col) == 0);
  const auto uniform = plan(Grid<double>(30, 30, 1.0), {2, 3}, {27, 3});
  CHECK(uniform.cells.size() == 26);
}

TEST_CASE("raising a class cost never lowers the optimum") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cls(0, 2);
  LabelImage classes(15, 15, 0);
  for (auto& v : classes.data) v = static_cast<std::int16_t>(cls(rng));
  double last = 0.0;
  for (double c1 : {1.0, 2.0, 5.0, 20.0, 100.0}) {
    const std::vector<double> costs{1.0, c1, 3.0};
    const auto t = plan(assign_costs(classes, costs, 1.0), {0, 0}, {14, 14});
    CHECK(t.cost >= last);
    last = t.cost;
  }
}

TEST_CASE("unreachable goal and bad endpoints") {
  Grid<double> g(5, 5, 1.0);
  for (int r = 0; r < 5; ++r) g.at(r, 2) = std::numeric_limits<double>::infinity();
  const auto t = plan(g, {0, 0}, {0, 4});
  CHECK(!t.found);
  CHECK(t.cells.empty());
  CHECK_THROWS_AS(plan(g, {0, 0}, {5, 0}), InputError);
}
