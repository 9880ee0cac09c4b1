#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "terrasense/common.hpp"

namespace terrasense::geometry {

struct Pose {
  double timestamp_s = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  /// Throws InputError unless the quaternion norm is 1 +- 1e-9.
  void validate() const;
  /// Robot frame -> world frame.
  Eigen::Isometry3d world_from_robot() const;

  static Pose from_yaw(double t, double x, double y, double yaw);
};

/*
 * Pinhole camera with an additional perspective (birds-eye) homography:
 * u = dehomogenize(P * K * T * x), where T maps world points into the camera
 * frame via the robot pose at the frame timestamp.
 */
struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d perspective = Eigen::Matrix3d::Identity();
  Eigen::Isometry3d camera_from_robot = Eigen::Isometry3d::Identity();

  void validate() const;
  Eigen::Isometry3d camera_from_world(const Pose& frame_pose) const;

  /*
   * Nadir camera `height_m` above the robot looking straight down with the
   * image rows pointing south, so one pixel spans `meters_per_pixel` on the
   * ground and the image centre sits on the robot position.
   */
  static CameraModel birdseye(double height_m, double meters_per_pixel, int width_px, int height_px);
};

inline constexpr double kMinHomogeneousW = 1e-12;

struct ProjectionResult {
  std::vector<Eigen::Vector2d> pixels;
  std::vector<std::size_t> source_indices;  // pose index per pixel
  std::vector<std::size_t> dropped;
  std::vector<std::string> diagnostics;
};

/// Projects pose positions into the image of `frame_pose`; points behind the camera are dropped.
ProjectionResult project_trajectory(std::span<const Pose> poses, const CameraModel& camera, const Pose& frame_pose);
std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& world_point, const CameraModel& camera,
                                             const Pose& frame_pose);
/// Intersects the viewing ray of `pixel` with the plane z = ground_z.
std::optional<Eigen::Vector3d> backproject_to_ground(const Eigen::Vector2d& pixel, const CameraModel& camera,
                                                     const Pose& frame_pose, double ground_z = 0.0);

std::optional<Eigen::Vector2d> apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);
/// out(p) = in(h^-1 p), nearest-neighbour sampling, void colour outside the source.
RgbImage warp_perspective(const RgbImage& image, const Eigen::Matrix3d& h, int out_width, int out_height);

/// Footprint radius of the robot in metres.
inline constexpr double kFootprintRadiusM = 0.4;

int footprint_half_width_px(double radius_m, double meters_per_pixel);

struct PathSegment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
  int class_id = 0;
  int provenance = -1;
};

struct PathRaster {
  LabelImage labels;             // class id on the stroke, kBackground elsewhere
  Grid<std::int32_t> provenance;  // source clip per labeled pixel, -1 elsewhere
};

/*
 * Constant-width stroke with round caps around each segment. Pixel centres are
 * at (col + 0.5, row + 0.5). A pixel takes the label of its nearest segment;
 * equal distances keep the lower segment index.
 */
PathRaster rasterize_segments(std::span<const PathSegment> segments, int width, int height, int half_width_px);

/*
 * Polyline version: class_per_segment holds one entry per segment
 * (max(1, curve.size() - 1)); a single point yields a disc.
 */
PathRaster rasterize_path(std::span<const Eigen::Vector2d> curve, std::span<const int> class_per_segment, int width,
                          int height, double meters_per_pixel, double radius_m = kFootprintRadiusM,
                          std::span<const int> provenance_per_segment = {});

struct WeakLabelImage {
  RgbImage image;
  LabelImage labels;
  Grid<std::int32_t> provenance;
};

struct TerrainPatch {
  RgbImage pixels;
  std::size_t center_pose_index = 0;
  int clip_index = -1;
  int row0 = 0;
  int col0 = 0;
};

struct PathSample {
  Eigen::Vector2d pixel;
  int clip_index = -1;
  std::size_t pose_index = 0;
};

struct PatchExtraction {
  std::vector<TerrainPatch> patches;
  std::vector<std::string> diagnostics;
};

inline constexpr int kDefaultPatchPx = 10;

/*
 * One square patch per path sample, centred on the sample, kept only if every
 * pixel lies on the labeled stroke.
 */
PatchExtraction extract_patches(const WeakLabelImage& weak, std::span<const PathSample> samples,
                                int patch_px = kDefaultPatchPx);

}  // namespace terrasense::geometry
