#include <cmath>

#include <Eigen/LU>

#include "terrasense/geometry.hpp"

namespace terrasense::geometry {

void Pose::validate() const {
  const double n = orientation.coeffs().norm();
  if (std::abs(n - 1.0) > 1e-9) throw InputError("pose quaternion is not unit norm (" + std::to_string(n) + ")");
  if (!position.allFinite()) throw InputError("pose position is not finite");
}

Eigen::Isometry3d Pose::world_from_robot() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = orientation.toRotationMatrix();
  t.translation() = position;
  return t;
}

Pose Pose::from_yaw(double t, double x, double y, double yaw) {
  Pose p;
  p.timestamp_s = t;
  p.position = {x, y, 0.0};
  p.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  return p;
}

void CameraModel::validate() const {
  if (std::abs(intrinsics(1, 0)) > 0 || std::abs(intrinsics(2, 0)) > 0 || std::abs(intrinsics(2, 1)) > 0) {
    throw InputError("camera intrinsics must be upper triangular");
  }
  if (intrinsics(0, 0) <= 0 || intrinsics(1, 1) <= 0) throw InputError("camera focal lengths must be positive");
  if (std::abs(perspective.determinant()) < 1e-12) throw InputError("perspective matrix is singular");
}

Eigen::Isometry3d CameraModel::camera_from_world(const Pose& frame_pose) const {
  return camera_from_robot * frame_pose.world_from_robot().inverse();
}

CameraModel CameraModel::birdseye(double height_m, double meters_per_pixel, int width_px, int height_px) {
  if (height_m <= 0 || meters_per_pixel <= 0) throw InputError("birds-eye camera needs positive height and scale");
  CameraModel cam;
  const double f = height_m / meters_per_pixel;
  cam.intrinsics << f, 0, width_px / 2.0,  //
      0, f, height_px / 2.0,               //
      0, 0, 1;
  cam.camera_from_robot = Eigen::Isometry3d::Identity();
  cam.camera_from_robot.linear() = Eigen::Vector3d(1, -1, -1).asDiagonal();
  cam.camera_from_robot.translation() = Eigen::Vector3d(0, 0, height_m);
  return cam;
}

std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& world_point, const CameraModel& camera,
                                             const Pose& frame_pose) {
  const Eigen::Vector3d in_camera = camera.camera_from_world(frame_pose) * world_point;
  if (in_camera.z() <= 0) return std::nullopt;
  const Eigen::Vector3d h = camera.perspective * camera.intrinsics * in_camera;
  if (std::abs(h.z()) < kMinHomogeneousW) return std::nullopt;
  return Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
}

ProjectionResult project_trajectory(std::span<const Pose> poses, const CameraModel& camera, const Pose& frame_pose) {
  ProjectionResult result;
  const Eigen::Isometry3d to_camera = camera.camera_from_world(frame_pose);
  const Eigen::Matrix3d pk = camera.perspective * camera.intrinsics;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Vector3d in_camera = to_camera * poses[i].position;
    if (in_camera.z() <= 0) {
      result.dropped.push_back(i);
      result.diagnostics.push_back("pose " + std::to_string(i) + " behind camera");
      continue;
    }
    const Eigen::Vector3d h = pk * in_camera;
    if (std::abs(h.z()) < kMinHomogeneousW) {
      result.dropped.push_back(i);
      result.diagnostics.push_back("pose " + std::to_string(i) + " degenerate homogeneous coordinate");
      continue;
    }
    result.pixels.emplace_back(h.x() / h.z(), h.y() / h.z());
    result.source_indices.push_back(i);
  }
  return result;
}

std::optional<Eigen::Vector3d> backproject_to_ground(const Eigen::Vector2d& pixel, const CameraModel& camera,
                                                     const Pose& frame_pose, double ground_z) {
  const Eigen::Matrix3d pk = camera.perspective * camera.intrinsics;
  const Eigen::Vector3d ray_camera = pk.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  const Eigen::Isometry3d world_from_camera = camera.camera_from_world(frame_pose).inverse();
  const Eigen::Vector3d origin = world_from_camera.translation();
  const Eigen::Vector3d dir = world_from_camera.linear() * ray_camera;
  if (std::abs(dir.z()) < kMinHomogeneousW) return std::nullopt;
  const double t = (ground_z - origin.z()) / dir.z();
  if (t <= 0) return std::nullopt;
  return origin + t * dir;
}

std::optional<Eigen::Vector2d> apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < kMinHomogeneousW) return std::nullopt;
  return Eigen::Vector2d(q.x() / q.z(), q.y() / q.z());
}

RgbImage warp_perspective(const RgbImage& image, const Eigen::Matrix3d& h, int out_width, int out_height) {
  const Eigen::Matrix3d inv = h.inverse();
  RgbImage out(out_width, out_height, kVoidColor);
  for (int r = 0; r < out_height; ++r) {
    for (int c = 0; c < out_width; ++c) {
      const auto src = apply_homography(inv, {c + 0.5, r + 0.5});
      if (!src) continue;
      const int sc = static_cast<int>(std::floor(src->x()));
      const int sr = static_cast<int>(std::floor(src->y()));
      if (image.contains(sr, sc)) out.at(r, c) = image.at(sr, sc);
    }
  }
  return out;
}

}  // namespace terrasense::geometry
