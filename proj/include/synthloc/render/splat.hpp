#pragma once

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/cloud.hpp"
#include "synthloc/geom/image.hpp"

namespace synthloc {

// Image coordinates are continuous with pixel x covering [x, x + 1).

struct SplatConfig {
  int rho_max = 4;  // pixels
  int rho_min = 1;  // pixels
  Rgb background{0, 0, 0};
  double near = 0.1;  // meters
  double far = 100.0;

  // Throws std::invalid_argument unless 1 <= rho_min <= rho_max and 0 < near < far.
  void validate() const;
};

// Inverse-depth splat size: round(min(max(rho_max / z, rho_min), rho_max)).
// Throws std::invalid_argument for z <= 0.
int point_size(double z, const SplatConfig& cfg);

// Renders every point with near <= z <= far as a rho x rho square whose
// top-left pixel is floor(u - rho / 2 + 0.5). Per pixel the smallest depth
// wins; depths within 1e-9 go to the lower point index. Uncovered pixels get
// the background colour and depth 0. `camera_to_world` is T_WC.
RenderedPair render_cloud(const ColorPointCloud& cloud, const Pose& camera_to_world, const CameraModel& cam,
                          const SplatConfig& cfg);

// Same image as render_cloud, produced by one fixed-size pass per distinct
// splat size merged through a shared depth buffer.
RenderedPair render_cloud_grouped(const ColorPointCloud& cloud, const Pose& camera_to_world, const CameraModel& cam,
                                  const SplatConfig& cfg);

}  // namespace synthloc
