#pragma once

#include <optional>

#include <Eigen/Core>

namespace synthloc {

// Pinhole intrinsics plus image resolution. No distortion.
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws DataError unless fx, fy > 0 and the principal point is inside the image.
  void validate() const;

  bool operator==(const CameraModel&) const = default;
};

struct Projection {
  double u;
  double v;
  double z;
};

// std::nullopt is the behind-camera marker (pz <= 0).
std::optional<Projection> project(const Eigen::Vector3d& p, const CameraModel& cam);

// Inverse of project for z > 0; throws std::invalid_argument otherwise.
Eigen::Vector3d backproject(double u, double v, double z, const CameraModel& cam);

}  // namespace synthloc
