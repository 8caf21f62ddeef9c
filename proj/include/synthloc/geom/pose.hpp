#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace synthloc {

// Rigid transform T_AB mapping points from frame B into frame A:
// p_A = R * p_B + t. Rotation is a Hamilton unit quaternion.
class Pose {
 public:
  Pose() : rotation_(Eigen::Quaterniond::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
      : rotation_(unit(rotation)), translation_(translation) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(Eigen::Quaterniond(rotation).normalized()), translation_(translation) {}

  static Pose identity() { return Pose(); }
  // Components in on-disk order (x, y, z, w).
  static Pose from_tum(double tx, double ty, double tz, double qx, double qy, double qz, double qw);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

 private:
  // Quaternions already unit to rounding are kept bit for bit, so poses survive a text round trip.
  static Eigen::Quaterniond unit(const Eigen::Quaterniond& q) {
    return std::abs(q.squaredNorm() - 1.0) <= 8 * std::numeric_limits<double>::epsilon() ? q : q.normalized();
  }

  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose invert(const Pose& a) { return a.inverse(); }
inline Eigen::Vector3d transform(const Pose& a, const Eigen::Vector3d& p) { return a * p; }

// Geodesic angle of a rotation, radians in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);

// Camera-to-world pose for a camera at `position` whose optical axis is
// horizontal with heading `yaw` (radians, about world +z, 0 = world +x).
// Camera frame is x right, y down, z forward; world z is up.
Pose horizontal_camera_pose(const Eigen::Vector3d& position, double yaw);

// Heading of a horizontal camera pose (inverse of horizontal_camera_pose).
double camera_yaw(const Pose& camera_to_world);

}  // namespace synthloc
