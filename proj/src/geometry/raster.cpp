#include <algorithm>
#include <cmath>
#include <limits>

#include "terrasense/geometry.hpp"

namespace terrasense::geometry {

namespace {

double squared_distance_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).squaredNorm();
}

}  // namespace

int footprint_half_width_px(double radius_m, double meters_per_pixel) {
  if (meters_per_pixel <= 0) throw InputError("meters_per_pixel must be positive");
  if (radius_m < 0) throw InputError("footprint radius must be non-negative");
  return static_cast<int>(std::lround(radius_m / meters_per_pixel));
}

PathRaster rasterize_segments(std::span<const PathSegment> segments, int width, int height, int half_width_px) {
  PathRaster out{LabelImage(width, height, static_cast<std::int16_t>(kBackground)),
                 Grid<std::int32_t>(width, height, -1)};
  Grid<double> best(width, height, std::numeric_limits<double>::infinity());
  const double r2 = static_cast<double>(half_width_px) * half_width_px;

  for (const auto& seg : segments) {
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.x(), seg.b.x()) - half_width_px)) - 1);
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(seg.a.x(), seg.b.x()) + half_width_px)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.y(), seg.b.y()) - half_width_px)) - 1);
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(seg.a.y(), seg.b.y()) + half_width_px)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d2 = squared_distance_to_segment({c + 0.5, r + 0.5}, seg.a, seg.b);
        if (d2 <= r2 && d2 < best.at(r, c)) {
          best.at(r, c) = d2;
          out.labels.at(r, c) = static_cast<std::int16_t>(seg.class_id);
          out.provenance.at(r, c) = seg.provenance;
        }
      }
    }
  }
  return out;
}

PathRaster rasterize_path(std::span<const Eigen::Vector2d> curve, std::span<const int> class_per_segment, int width,
                          int height, double meters_per_pixel, double radius_m,
                          std::span<const int> provenance_per_segment) {
  const int half_width = footprint_half_width_px(radius_m, meters_per_pixel);
  if (curve.empty()) return rasterize_segments({}, width, height, half_width);

  const std::size_t n_segments = std::max<std::size_t>(1, curve.size() - 1);
  if (class_per_segment.size() != n_segments) {
    throw InputError("rasterize_path: expected " + std::to_string(n_segments) + " segment classes, got " +
                     std::to_string(class_per_segment.size()));
  }
  if (!provenance_per_segment.empty() && provenance_per_segment.size() != n_segments) {
    throw InputError("rasterize_path: provenance size mismatch");
  }
  std::vector<PathSegment> segments;
  segments.reserve(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i) {
    PathSegment s;
    s.a = curve[i];
    s.b = curve.size() == 1 ? curve[0] : curve[i + 1];
    s.class_id = class_per_segment[i];
    s.provenance = provenance_per_segment.empty() ? -1 : provenance_per_segment[i];
    segments.push_back(s);
  }
  return rasterize_segments(segments, width, height, half_width);
}

}  // namespace terrasense::geometry
