#pragma once

#include <filesystem>
#include <vector>

#include "synthloc/geom/pose.hpp"

namespace synthloc {

struct StampedPose {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

using Trajectory = std::vector<StampedPose>;

// TUM format: "timestamp tx ty tz qx qy qz qw" per line, '#' starts a comment.
// Quaternions are renormalized. Throws DataError naming the line on malformed
// input, or when timestamps are not strictly increasing.
Trajectory load_trajectory(const std::filesystem::path& path);
Trajectory parse_trajectory(const std::string& text);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
std::string format_tum_line(const StampedPose& stamped);

}  // namespace synthloc
