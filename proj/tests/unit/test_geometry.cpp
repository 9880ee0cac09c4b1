#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "terrasense/geometry.hpp"

using namespace terrasense;
using namespace terrasense::geometry;

namespace {

// Full scan over all segments for every pixel.
LabelImage brute_force_raster(const std::vector<PathSegment>& segs, int w, int h, int hw) {
  LabelImage out(w, h, static_cast<std::int16_t>(kBackground));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Vector2d p(c + 0.5, r + 0.5);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : segs) {
        const Eigen::Vector2d ab = s.b - s.a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0 ? std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d2 = (p - (s.a + t * ab)).squaredNorm();
        if (d2 <= hw * hw && d2 < best) {
          best = d2;
          out.at(r, c) = static_cast<std::int16_t>(s.class_id);
        }
      }
    }
  }
  return out;
}

std::size_t labeled(const LabelImage& img) {
  return static_cast<std::size_t>(std::count_if(img.data.begin(), img.data.end(), [](auto v) { return v >= 0; }));
}

}  // namespace

TEST_CASE("optical axis projects to the origin") {
  CameraModel cam;
  const auto px = project_point({0, 0, 1}, cam, Pose{});
  REQUIRE(px);
  CHECK(px->norm() == doctest::Approx(0.0));
}

TEST_CASE("pinhole projection by hand") {
  CameraModel cam;
  cam.intrinsics << 100, 0, 50, 0, 100, 50, 0, 0, 1;
  const auto px = project_point({1, 0, 2}, cam, Pose{});
  REQUIRE(px);
  CHECK(px->x() == doctest::Approx(100.0));
  CHECK(px->y() == doctest::Approx(50.0));
}

TEST_CASE("points behind the camera are dropped with a diagnostic") {
  CameraModel cam;
  std::vector<Pose> poses(3);
  poses[0].position = {0, 0, 1};
  poses[1].position = {0, 0, -1};
  poses[2].position = {1, 1, 2};
  const auto res = project_trajectory(poses, cam, Pose{});
  CHECK(res.pixels.size() == 2);
  CHECK(res.source_indices == std::vector<std::size_t>{0, 2});
  CHECK(res.dropped == std::vector<std::size_t>{1});
  CHECK(res.diagnostics.size() == 1);
}

TEST_CASE("degenerate homogeneous coordinate drops the point") {
  CameraModel cam;
  cam.perspective << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  std::vector<Pose> poses(1);
  poses[0].position = {0, 0, 1};
  const auto res = project_trajectory(poses, cam, Pose{});
  CHECK(res.pixels.empty());
  CHECK(res.dropped.size() == 1);
}

TEST_CASE("perspective round trip") {
  Eigen::Matrix3d p;
  p << 1.1, 0.05, 3, -0.02, 0.95, -2, 1e-4, 2e-4, 1;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 128);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const auto y = apply_homography(p, x);
    REQUIRE(y);
    const auto back = apply_homography(p.inverse(), *y);
    REQUIRE(back);
    CHECK((*back - x).norm() <= 1e-6);
  }
}

TEST_CASE("integer warp and unwarp is the identity on interior pixels") {
  RgbImage img(32, 32);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) img.at(r, c) = Rgb{static_cast<std::uint8_t>(r * 7), static_cast<std::uint8_t>(c * 5), 9};
  }
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = 3;
  t(1, 2) = -2;
  const auto back = warp_perspective(warp_perspective(img, t, 32, 32), t.inverse(), 32, 32);
  for (int r = 2; r < 30; ++r) {
    for (int c = 0; c < 29; ++c) CHECK(back.at(r, c) == img.at(r, c));
  }
  CHECK(back.at(0, 0) == kVoidColor);
}

TEST_CASE("birds-eye camera maps the robot to the image centre") {
  const auto cam = CameraModel::birdseye(2.0, 0.05, 128, 128);
  cam.validate();
  const auto frame = Pose::from_yaw(0, 10, 20, 0);
  const auto c = project_point({10, 20, 0}, cam, frame);
  REQUIRE(c);
  CHECK(c->x() == doctest::Approx(64.0));
  CHECK(c->y() == doctest::Approx(64.0));
  // One metre east is 20 px right, one metre north is 20 px up.
  const auto e = project_point({11, 21, 0}, cam, frame);
  REQUIRE(e);
  CHECK(e->x() == doctest::Approx(84.0));
  CHECK(e->y() == doctest::Approx(44.0));
  const auto g = backproject_to_ground(*e, cam, frame);
  REQUIRE(g);
  CHECK((*g - Eigen::Vector3d(11, 21, 0)).norm() < 1e-9);
}

TEST_CASE("camera and pose validation") {
  CameraModel cam;
  cam.intrinsics(1, 0) = 0.5;
  CHECK_THROWS_AS(cam.validate(), InputError);
  cam = CameraModel{};
  cam.intrinsics(0, 0) = -1;
  CHECK_THROWS_AS(cam.validate(), InputError);
  cam = CameraModel{};
  cam.perspective.setZero();
  CHECK_THROWS_AS(cam.validate(), InputError);
  Pose p;
  p.orientation.coeffs() << 0, 0, 0, 1.001;
  CHECK_THROWS_AS(p.validate(), InputError);
  CHECK_NOTHROW(Pose::from_yaw(0, 1, 2, 0.7).validate());
}

TEST_CASE("footprint half-width") {
  CHECK(footprint_half_width_px(0.4, 0.05) == 8);
  CHECK(footprint_half_width_px(0.4, 0.1) == 4);
  CHECK_THROWS_AS(footprint_half_width_px(0.4, 0.0), InputError);
}

TEST_CASE("single point gives a disc") {
  const std::vector<Eigen::Vector2d> curve{{32.0, 32.0}};
  const std::vector<int> cls{2};
  const auto r = rasterize_path(curve, cls, 64, 64, 0.05);
  std::size_t inside = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double d2 = (x + 0.5 - 32) * (x + 0.5 - 32) + (y + 0.5 - 32) * (y + 0.5 - 32);
      CHECK((r.labels.at(y, x) == 2) == (d2 <= 64.0));
      inside += d2 <= 64.0;
    }
  }
  CHECK(labeled(r.labels) == inside);
}

TEST_CASE("empty curve is all background") {
  const auto r = rasterize_path({}, {}, 16, 16, 0.05);
  CHECK(labeled(r.labels) == 0);
  CHECK(std::all_of(r.provenance.data.begin(), r.provenance.data.end(), [](int p) { return p == -1; }));
}

TEST_CASE("straight stroke area matches the analytic area") {
  const std::vector<Eigen::Vector2d> curve{{20.0, 50.0}, {180.0, 50.0}};
  const std::vector<int> cls{0};
  const auto r = rasterize_path(curve, cls, 200, 100, 0.05);
  const double expected = 160.0 * 16.0 + std::numbers::pi * 64.0;
  CHECK(std::abs(static_cast<double>(labeled(r.labels)) - expected) <= 0.05 * expected);
}

TEST_CASE("nearest-segment labels agree with a full scan") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 80);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<PathSegment> segs;
    for (int i = 0; i < 6; ++i) segs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}, i % 3, i});
    const auto fast = rasterize_segments(segs, 80, 80, 6);
    CHECK(fast.labels == brute_force_raster(segs, 80, 80, 6));
    for (std::size_t i = 0; i < fast.labels.size(); ++i) CHECK((fast.labels.data[i] < 0) == (fast.provenance.data[i] < 0));
  }
}

TEST_CASE("ties go to the lower segment index") {
  // Two coincident segments with different classes.
  const std::vector<PathSegment> segs{{{10, 10}, {30, 10}, 1, 0}, {{10, 10}, {30, 10}, 2, 1}};
  const auto r = rasterize_segments(segs, 40, 20, 4);
  CHECK(r.labels.at(10, 20) == 1);
  CHECK(r.provenance.at(10, 20) == 0);
}

TEST_CASE("disjoint segments are order independent") {
  std::vector<PathSegment> segs{{{5, 5}, {25, 5}, 0, 0}, {{5, 40}, {25, 45}, 1, 1}, {{50, 10}, {55, 50}, 2, 2}};
  const auto a = rasterize_segments(segs, 64, 64, 4);
  std::reverse(segs.begin(), segs.end());
  const auto b = rasterize_segments(segs, 64, 64, 4);
  CHECK(a.labels == b.labels);
  CHECK(a.provenance == b.provenance);
}

TEST_CASE("path segment class count is checked") {
  const std::vector<Eigen::Vector2d> curve{{1, 1}, {5, 5}, {9, 1}};
  const std::vector<int> cls{0};
  CHECK_THROWS_AS(rasterize_path(curve, cls, 16, 16, 0.05), InputError);
}

TEST_CASE("patches along a straight path") {
  const int w = 400;
  const int h = 60;
  const std::vector<Eigen::Vector2d> curve{{10.0, 30.0}, {390.0, 30.0}};
  const std::vector<int> cls{3};
  const auto raster = rasterize_path(curve, cls, w, h, 0.05);
  WeakLabelImage weak{RgbImage(w, h, Rgb{10, 20, 30}), raster.labels, raster.provenance};

  std::vector<PathSample> samples;
  for (int j = 0; j < 20; ++j) samples.push_back({{20.0 + 18.0 * j, 30.0}, j, static_cast<std::size_t>(j)});
  const auto out = extract_patches(weak, samples, 10);
  REQUIRE(out.patches.size() == 20);
  for (std::size_t j = 0; j < out.patches.size(); ++j) {
    const auto& p = out.patches[j];
    CHECK(p.clip_index == static_cast<int>(j));
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) CHECK(weak.labels.at(p.row0 + r, p.col0 + c) >= 0);
    }
    if (j > 0) CHECK(p.col0 >= out.patches[j - 1].col0 + 10);  // no overlap
  }
}

TEST_CASE("short path or thin stroke yields no patches") {
  const std::vector<Eigen::Vector2d> pt{{30.0, 30.0}};
  const std::vector<int> cls{0};
  // Radius 0.1 m at 0.05 m/px is a 2 px stroke.
  const auto thin = rasterize_path(pt, cls, 60, 60, 0.05, 0.1);
  WeakLabelImage weak{RgbImage(60, 60), thin.labels, thin.provenance};
  const std::vector<PathSample> samples{{{30.0, 30.0}, 0, 0}};
  const auto out = extract_patches(weak, samples, 10);
  CHECK(out.patches.empty());
  CHECK(out.diagnostics.size() == 1);

  const auto none = extract_patches(weak, {}, 10);
  CHECK(none.patches.empty());
}

TEST_CASE("patches over void pixels are skipped") {
  const std::vector<Eigen::Vector2d> pt{{30.0, 30.0}};
  const std::vector<int> cls{0};
  const auto disc = rasterize_path(pt, cls, 60, 60, 0.05);
  WeakLabelImage weak{RgbImage(60, 60), disc.labels, disc.provenance};
  weak.image.at(30, 30) = kVoidColor;
  const std::vector<PathSample> samples{{{30.0, 30.0}, 0, 0}};
  CHECK(extract_patches(weak, samples, 10).patches.empty());
}
