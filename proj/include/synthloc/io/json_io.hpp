#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/pose.hpp"

namespace synthloc {

// Poses as {"t": [x, y, z], "q": [x, y, z, w]}; cameras as {fx, fy, cx, cy, width, height}.
nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& j);

// Parses a JSON file, raising DataError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; deterministic for identical content.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace synthloc
