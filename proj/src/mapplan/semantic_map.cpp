#include <cmath>

#include "terrasense/mapplan.hpp"

namespace terrasense::mapplan {

SemanticMap::SemanticMap(int width, int height, int num_classes, double meters_per_pixel, Eigen::Vector2d origin)
    : width_(width), height_(height), k_(num_classes), mpp_(meters_per_pixel), origin_(std::move(origin)) {
  if (width < 1 || height < 1) throw ConfigError("map dimensions must be positive");
  if (num_classes < 1) throw ConfigError("map needs at least one class");
  if (!(meters_per_pixel > 0.0)) throw ConfigError("map resolution must be positive");
  votes_.assign(static_cast<std::size_t>(width) * height * num_classes, 0);
}

bool SemanticMap::cell_of(double x_m, double y_m, Cell* cell) const {
  const double fx = std::floor((x_m - origin_.x()) / mpp_);
  const double fy = std::floor((y_m - origin_.y()) / mpp_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_ && fy < height_)) return false;
  cell->col = static_cast<int>(fx);
  cell->row = height_ - 1 - static_cast<int>(fy);
  return true;
}

int SemanticMap::votes(int row, int col, int cls) const {
  return votes_[(static_cast<std::size_t>(row) * width_ + col) * k_ + cls];
}

void SemanticMap::add_vote(int row, int col, int cls, int count) {
  if (row < 0 || col < 0 || row >= height_ || col >= width_) throw InputError("map cell out of range");
  if (cls < 0 || cls >= k_) throw InputError("vote for class outside the map's class range");
  votes_[(static_cast<std::size_t>(row) * width_ + col) * k_ + cls] += count;
}

int SemanticMap::class_at(int row, int col) const {
  int best = kVoid;
  int best_votes = 0;
  for (int c = 0; c < k_; ++c) {
    const int v = votes(row, col, c);
    if (v > best_votes) {
      best_votes = v;
      best = c;
    }
  }
  return best;
}

LabelImage SemanticMap::classes() const {
  LabelImage out(width_, height_, static_cast<std::int16_t>(kVoid));
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) out.at(r, c) = static_cast<std::int16_t>(class_at(r, c));
  }
  return out;
}

FuseReport fuse_observation(SemanticMap& map, const LabelImage& mask, const geometry::Pose& frame_pose,
                            const geometry::CameraModel& camera) {
  FuseReport report;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const int cls = mask.at(r, c);
      if (cls < 0) continue;
      const auto ground = geometry::backproject_to_ground({c + 0.5, r + 0.5}, camera, frame_pose);
      Cell cell;
      if (!ground || !map.cell_of(ground->x(), ground->y(), &cell)) {
        ++report.clipped;
        continue;
      }
      map.add_vote(cell.row, cell.col, cls);
      ++report.votes_added;
    }
  }
  if (report.clipped > 0) {
    report.diagnostics.push_back(std::to_string(report.clipped) + " mask pixels fell outside the map and were clipped");
  }
  return report;
}

}  // namespace terrasense::mapplan
