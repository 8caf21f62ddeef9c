#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/pose.hpp"

namespace synthloc {

// Grunert's P3P: poses T_CW (world-to-camera) that map the three world points
// onto the three unit bearing vectors. Up to four solutions.
std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& world,
                            const std::array<Eigen::Vector3d, 3>& bearings);

// Real roots of a4 x^4 + a3 x^3 + a2 x^2 + a1 x + a0 (companion-matrix eigenvalues,
// Newton polished). Degenerate leading coefficients fall back to lower degree.
std::vector<double> real_quartic_roots(double a4, double a3, double a2, double a1, double a0);

struct RansacOptions {
  double threshold_px = 4.0;
  int max_iterations = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
  int refine_iterations = 10;
};

struct PnpResult {
  bool ok = false;
  Pose pose;  // T_CW: points -> camera
  std::vector<int> inliers;
  double mean_error_px = 0.0;
  int iterations = 0;
};

// Squared pixel error of one correspondence, infinity when the point is behind the camera.
double reprojection_error_sq(const Pose& camera_from_points, const Eigen::Vector3d& p, const Eigen::Vector2d& uv,
                             const CameraModel& cam);

// Minimizes the summed squared reprojection error over `subset` by damped
// Gauss-Newton on SE(3) (left perturbation).
Pose refine_pose(const Pose& initial, const std::vector<Eigen::Vector3d>& points,
                 const std::vector<Eigen::Vector2d>& pixels, const std::vector<int>& subset, const CameraModel& cam,
                 int iterations = 10);

// P3P-minimal RANSAC with adaptive iteration count, then refinement over the
// inliers and a final inlier recount. Deterministic for a given seed.
PnpResult solve_pnp_ransac(const std::vector<Eigen::Vector3d>& points, const std::vector<Eigen::Vector2d>& pixels,
                           const CameraModel& cam, const RansacOptions& options);

}  // namespace synthloc
