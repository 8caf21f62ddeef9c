#include "synthloc/geom/camera.hpp"

#include <stdexcept>
#include <string>

#include "synthloc/error.hpp"

namespace synthloc {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DataError("camera resolution must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw DataError("camera principal point (" + std::to_string(cx) + ", " + std::to_string(cy) +
                    ") outside the image");
  }
}

std::optional<Projection> project(const Eigen::Vector3d& p, const CameraModel& cam) {
  if (!(p.z() > 0.0)) return std::nullopt;
  return Projection{cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy, p.z()};
}

Eigen::Vector3d backproject(double u, double v, double z, const CameraModel& cam) {
  if (!(z > 0.0)) throw std::invalid_argument("backproject requires z > 0");
  return {(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z};
}

}  // namespace synthloc
