#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/image.hpp"

namespace synthloc {

// Texels over a facet's affine parameterization P(s, t) = V0 + s (V1 - V0) + t (V2 - V0),
// s, t >= 0, s + t <= 1. Texel (i, j) sits at s = i / (res_s - 1), t = j / (res_t - 1).
struct TexturePatch {
  int res_s = 0;
  int res_t = 0;
  std::vector<Rgb> texels;  // row-major in t, i.e. index j * res_s + i

  Rgb texel(int i, int j) const { return texels[static_cast<std::size_t>(j) * res_s + i]; }
  // Bilinear lookup at parameter (s, t).
  Eigen::Vector3d sample(double s, double t) const;
};

struct TexturedMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Rgb> colors;  // per vertex
  // Either empty or one entry per face; std::nullopt marks an untextured facet.
  std::vector<std::optional<TexturePatch>> textures;

  bool empty() const { return faces.empty(); }
  // Throws DataError on out-of-range indices or length mismatches.
  void validate() const;
  // Drops faces whose area is at most 1e-12 m^2 (and their textures). Returns the number removed.
  std::size_t remove_degenerate_faces();
};

double face_area(const TexturedMesh& mesh, std::size_t face);

// OBJ with optional vertex colors as "v x y z r g b" (channels in [0, 1]).
// Polygons are fan-triangulated; degenerate faces are removed after loading.
TexturedMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TexturedMesh& mesh);

}  // namespace synthloc
