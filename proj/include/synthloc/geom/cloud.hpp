#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/image.hpp"

namespace synthloc {

struct ColorPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Rgb> colors;
  // Empty when the cloud carries no normals; otherwise one unit vector per point.
  std::vector<Eigen::Vector3d> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  // Throws DataError on length mismatch or non-unit normals.
  void validate() const;
};

enum class PlyFormat { kBinaryLittleEndian, kAscii };

// Reads the vertex element of a PLY file (ascii or binary_little_endian).
// Recognised properties: x y z, nx ny nz, red green blue (uchar or float in [0, 1]).
ColorPointCloud read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const ColorPointCloud& cloud,
               PlyFormat format = PlyFormat::kBinaryLittleEndian);

}  // namespace synthloc
