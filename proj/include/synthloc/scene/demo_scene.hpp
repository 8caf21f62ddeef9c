#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/cloud.hpp"
#include "synthloc/geom/mesh.hpp"

namespace synthloc {

// Coloured rectangle in a surface's (a, b) coordinates, meters, turned by
// `angle` radians about its centre.
struct Patch {
  double a0, b0, a1, b1;
  Rgb color;
  double angle = 0.0;
  bool contains(double a, double b) const;
};

// Planar rectangle P(a, b) = origin + a * axis_a + b * axis_b, a in [0, size_a], b in [0, size_b].
// Later patches paint over earlier ones.
struct Surface {
  Eigen::Vector3d origin;
  Eigen::Vector3d axis_a;
  Eigen::Vector3d axis_b;
  double size_a = 0.0;
  double size_b = 0.0;
  Eigen::Vector3d normal;  // unit, facing the free space
  Rgb base;
  std::vector<Patch> patches;

  Rgb color_at(double a, double b) const;
};

struct Scene {
  std::vector<Surface> surfaces;

  // Lattice samples with `spacing` meters between neighbours, coloured and with surface normals.
  ColorPointCloud sample_cloud(double spacing) const;
  // Regular triangulation of each surface with per-vertex colours.
  TexturedMesh build_mesh(double spacing) const;
  // Nearest surface hit along a ray (t > 0); returns false on a miss.
  bool raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double* t, Rgb* color,
               Eigen::Vector3d* normal) const;
};

struct RoomParams {
  double length = 10.0;  // x extent, meters
  double width = 6.0;    // y extent
  double height = 3.0;
  std::uint32_t seed = 1;
  double patch_density = 5.0;  // decorative patches per square meter of wall
};

// Closed box room with floor at z = 0 and randomly decorated walls, floor, and ceiling.
Scene make_room(const RoomParams& params);

// L-shaped room used by the demos: a 12 x 5 m arm along x and a 5 x 7 m arm
// along y meeting at the far end, 3 m high. Each wall carries a few large
// panels under the small decorative patches so distant views differ.
// Sampled at 0.025 m it holds about 530k points.
struct DemoSceneParams {
  double height = 3.0;
  std::uint32_t seed = 7;
  double patch_density = 2.0;
  double panels_per_meter = 1.0;  // large high-contrast panels along each wall
  double detail_contrast = 70.0;  // luminance step of the small wall patches; 0 = vivid
  double floor_contrast = 40.0;   // same for floor and ceiling patches
  bool floor_checker = false;
  double cabinets_per_meter = 0.4;  // boxes standing against the walls
};
Scene make_demo_scene(const DemoSceneParams& params = {});

// Straight corridor [0, length] x [0, width] decorated like the demo room.
Scene make_straight_corridor(double length, double width, const DemoSceneParams& params = {});

}  // namespace synthloc
