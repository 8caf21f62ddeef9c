#include "synthloc/geom/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "synthloc/error.hpp"

namespace synthloc {

Trajectory parse_trajectory(const std::string& text) {
  Trajectory out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double v[8];
    int n = 0;
    double tmp;
    while (ls >> tmp) {
      if (n < 8) v[n] = tmp;
      ++n;
    }
    if (n == 0 && (ls.eof())) continue;
    if (n != 8 || !ls.eof()) {
      throw DataError("trajectory line " + std::to_string(line_no) + ": expected 8 numeric fields");
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw DataError("trajectory line " + std::to_string(line_no) + ": non-finite value");
    }
    const double qnorm = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
    if (!(qnorm > 0.0)) throw DataError("trajectory line " + std::to_string(line_no) + ": zero quaternion");
    if (!out.empty() && !(v[0] > out.back().timestamp)) {
      throw DataError("trajectory line " + std::to_string(line_no) + ": timestamps not strictly increasing");
    }
    out.push_back({v[0], Pose::from_tum(v[1], v[2], v[3], v[4], v[5], v[6], v[7])});
  }
  return out;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_trajectory(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_tum_line(const StampedPose& stamped) {
  const auto& t = stamped.pose.translation();
  const auto& q = stamped.pose.rotation();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g", stamped.timestamp, t.x(), t.y(),
                t.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trajectory " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& s : trajectory) out << format_tum_line(s) << '\n';
}

}  // namespace synthloc
