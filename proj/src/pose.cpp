#include "synthloc/geom/pose.hpp"

#include <algorithm>
#include <cmath>

namespace synthloc {

Pose Pose::from_tum(double tx, double ty, double tz, double qx, double qy, double qz, double qw) {
  return Pose(Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Pose(inv, -(inv * translation_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

double rotation_angle(const Eigen::Quaterniond& q) {
  // atan2 form is accurate near zero, unlike acos(w).
  const double w = std::abs(q.w());
  return 2.0 * std::atan2(q.vec().norm(), w);
}

Pose horizontal_camera_pose(const Eigen::Vector3d& position, double yaw) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  const Eigen::Vector3d right = down.cross(forward);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(r, position);
}

double camera_yaw(const Pose& camera_to_world) {
  const Eigen::Vector3d forward = camera_to_world.rotation() * Eigen::Vector3d::UnitZ();
  return std::atan2(forward.y(), forward.x());
}

}  // namespace synthloc
