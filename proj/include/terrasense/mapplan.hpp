#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"
#include "terrasense/config.hpp"
#include "terrasense/geometry.hpp"

namespace terrasense::mapplan {

struct Cell {
  int row = 0;
  int col = 0;

  bool operator==(const Cell&) const = default;
};

/*
 * North-up global grid: cell (row, col) covers world x in
 * [origin.x + col * mpp, +mpp) and y in [origin.y + (height - 1 - row) * mpp, +mpp).
 */
class SemanticMap {
 public:
  SemanticMap(int width, int height, int num_classes, double meters_per_pixel,
              Eigen::Vector2d origin = Eigen::Vector2d::Zero());

  int width() const { return width_; }
  int height() const { return height_; }
  int num_classes() const { return k_; }
  double meters_per_pixel() const { return mpp_; }

  bool cell_of(double x_m, double y_m, Cell* cell) const;
  int votes(int row, int col, int cls) const;
  void add_vote(int row, int col, int cls, int count = 1);
  /// Argmax of the votes, ties to the lowest id; kVoid where nothing was observed.
  int class_at(int row, int col) const;
  LabelImage classes() const;
  std::span<const std::int32_t> raw_votes() const { return votes_; }

 private:
  int width_;
  int height_;
  int k_;
  double mpp_;
  Eigen::Vector2d origin_;
  std::vector<std::int32_t> votes_;
};

struct FuseReport {
  std::size_t votes_added = 0;
  std::size_t clipped = 0;
  std::vector<std::string> diagnostics;
};

/// One vote per labeled mask pixel at the ground point under its centre.
FuseReport fuse_observation(SemanticMap& map, const LabelImage& mask, const geometry::Pose& frame_pose,
                            const geometry::CameraModel& camera);

using CostMap = Grid<double>;

/// Cost per class id; every entry must be positive (infinity marks impassable terrain).
CostMap assign_costs(const SemanticMap& map, std::span<const double> class_costs, double unknown_cost);
CostMap assign_costs(const LabelImage& classes, std::span<const double> class_costs, double unknown_cost);

/// "class_id=cost" lines; missing classes default to `fallback`.
std::vector<double> parse_cost_table(const KeyValueConfig& table, int num_classes, double fallback = 1.0);

struct Trajectory {
  bool found = false;
  std::vector<Cell> cells;
  double cost = 0.0;  // sum of entered-node costs, start included
};

/// Dijkstra on the 4-connected grid, expanding E, N, W, S.
Trajectory plan(const CostMap& costs, Cell start, Cell goal);

/// Cost of an arbitrary path under a cost map.
double path_cost(const CostMap& costs, std::span<const Cell> cells);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t);

}  // namespace terrasense::mapplan
