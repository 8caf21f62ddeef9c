#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/cloud.hpp"
#include "synthloc/geom/pose.hpp"

namespace synthloc {

// Row-major boolean raster (1 = set). Row index grows with world y, column with world x.
struct Raster {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  Raster() = default;
  Raster(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, 0) {}
  std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && c >= 0 && r < rows && c < cols; }
  std::size_t count() const;
};

// Top-down raster of floor-supported free space for one floor level.
struct OccupancyGrid {
  double resolution = 0.05;          // meters per cell
  Eigen::Vector2d origin{0.0, 0.0};  // world xy of the corner of cell (0, 0)
  double floor_height = 0.0;
  Raster cells;

  Eigen::Vector2d cell_center(int row, int col) const {
    return origin + Eigen::Vector2d((col + 0.5) * resolution, (row + 0.5) * resolution);
  }
};

// Per-point unit normals from the k nearest neighbours (PCA, smallest eigenvector).
// Sign is chosen so normals face up (n.z >= 0); horizontal normals keep PCA sign.
std::vector<Eigen::Vector3d> estimate_normals(const ColorPointCloud& cloud, int k = 16);

// Heights of floor levels: peaks of the histogram of upward-facing points
// (n . z > up_cos) binned by height. Peaks are local maxima holding at least
// 20% of the largest bin; heights are the mean z of the peak bin and its two
// neighbours, sorted ascending. Throws DataError("no floor detected").
std::vector<double> extract_floor_levels(const ColorPointCloud& cloud, double bin = 0.10,
                                         double up_cos = 0.8660254037844387);

// Rasterizes upward-facing points within `tolerance` of `floor_height`. The
// grid is padded by `pad_cells` on every side. Throws DataError when no cell is set.
OccupancyGrid rasterize_floor(const ColorPointCloud& cloud, double floor_height, double resolution = 0.05,
                              double tolerance = 0.15, double up_cos = 0.8660254037844387, int pad_cells = 8);

struct CorridorStages {
  Raster closed;                    // after morphological closing
  std::vector<float> distance;      // normalized distance transform, same layout as `closed`
  Raster mask;                      // final corridor mask
};

// close (dilate then erode, square kernel of radius close_radius) -> exact
// Euclidean distance transform -> normalize by max -> threshold -> Gaussian
// blur -> re-threshold at half the blurred maximum. The result is intersected
// with the thresholded band, so it is a subset of the closed free space.
// Throws DataError("empty corridor").
Raster compute_corridor_mask(const OccupancyGrid& grid, int close_radius = 3, double blur_sigma = 2.0,
                             double threshold = 0.5, CorridorStages* stages = nullptr);

// One-pixel-wide skeleton via Zhang-Suen thinning.
Raster zhang_suen_thin(const Raster& mask);

enum class ViewDirection : std::uint8_t { kForward = 0, kBack = 1, kLeft = 2, kRight = 3 };

struct RenderPose {
  Pose pose;  // camera-to-world
  int position = 0;
  ViewDirection view = ViewDirection::kForward;
};

struct RenderPoseSet {
  std::vector<RenderPose> poses;
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector2i> position_cells;  // (row, col) in the corridor mask
  double spacing = 2.0;
  double camera_height = 1.5;

  std::vector<Pose> pose_list() const;
};

struct SkeletonBranch {
  std::vector<Eigen::Vector2i> cells;  // (row, col), start to end
  double length = 0.0;                 // meters
  bool start_is_junction = false;
  bool end_is_junction = false;
};

// Splits a skeleton into branches between endpoints/junctions. Branches run
// from their lexicographically smaller (row, col) endpoint and are ordered by
// (start, end). Uses m-adjacency so diagonal staircases do not count as forks.
std::vector<SkeletonBranch> skeleton_branches(const Raster& skeleton, double resolution);

// Removes leaf branches shorter than `min_length` meters (one pass).
Raster prune_spurs(const Raster& skeleton, double resolution, double min_length);

struct SamplingOptions {
  double spacing = 2.0;
  double camera_height = 1.5;
  double spur_length = 1.0;  // leaf branches shorter than this are pruned; <= 0 disables
  bool four_views = true;    // false emits forward views only
  int tangent_window = 5;    // cells on each side for the central-difference tangent
};

// Thins the mask, walks each branch emitting a position every `spacing` meters
// of arc length (plus every junction), and produces 4 horizontal views per
// position: tangent, tangent + 180, tangent + 90, tangent - 90 degrees.
// Throws DataError("corridor too thin") when the skeleton is empty.
RenderPoseSet sample_render_poses(const Raster& mask, const OccupancyGrid& grid, const SamplingOptions& options,
                                  Raster* skeleton_out = nullptr);

struct CorridorParams {
  double resolution = 0.05;
  int close_radius = 3;
  double blur_sigma = 2.0;
  double threshold = 0.5;
  double floor_bin = 0.10;
  double up_cos = 0.8660254037844387;
  SamplingOptions sampling;
};

// Whole pipeline over every detected floor. When `debug_dir` is non-empty,
// writes per-floor top-down, distance-transform, mask, and skeleton PNGs.
RenderPoseSet plan_render_poses(const ColorPointCloud& cloud, const CorridorParams& params,
                                const std::filesystem::path& debug_dir = {});

}  // namespace synthloc
