#include "synthloc/io/json_io.hpp"

#include <fstream>

#include "synthloc/error.hpp"

namespace synthloc {

nlohmann::json pose_to_json(const Pose& pose) {
  const auto& t = pose.translation();
  const auto& q = pose.rotation();
  return {{"t", {t.x(), t.y(), t.z()}}, {"q", {q.x(), q.y(), q.z(), q.w()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  const auto t = j.at("t").get<std::array<double, 3>>();
  const auto q = j.at("q").get<std::array<double, 4>>();
  return Pose::from_tum(t[0], t[1], t[2], q[0], q[1], q[2], q[3]);
}

nlohmann::json camera_to_json(const CameraModel& cam) {
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

CameraModel camera_from_json(const nlohmann::json& j) {
  CameraModel cam{j.at("fx").get<double>(),  j.at("fy").get<double>(),    j.at("cx").get<double>(),
                  j.at("cy").get<double>(),  j.at("width").get<int>(), j.at("height").get<int>()};
  cam.validate();
  return cam;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw DataError("failed writing " + path.string());
}

}  // namespace synthloc
