#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "synthloc/geom/pose.hpp"

namespace synthloc::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("synthloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Pose random_pose(std::mt19937_64& rng, double max_translation = 5.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return Pose(q.normalized(), Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

inline double translation_gap(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

inline double rotation_gap_deg(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation().conjugate() * b.rotation()) * 180.0 / M_PI;
}

}  // namespace synthloc::test
