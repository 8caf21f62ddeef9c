#include "synthloc/corridor/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "synthloc/error.hpp"
#include "synthloc/locdb/kdtree.hpp"

namespace synthloc {

std::size_t Raster::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t v) { return v != 0; }));
}

std::vector<Pose> RenderPoseSet::pose_list() const {
  std::vector<Pose> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.pose);
  return out;
}

std::vector<Eigen::Vector3d> estimate_normals(const ColorPointCloud& cloud, int k) {
  std::vector<float> rows;
  rows.reserve(cloud.size() * 3);
  for (const auto& p : cloud.points) {
    rows.push_back(static_cast<float>(p.x()));
    rows.push_back(static_cast<float>(p.y()));
    rows.push_back(static_cast<float>(p.z()));
  }
  const KdTree tree(rows, 3, 16);
  std::vector<Eigen::Vector3d> normals(cloud.size(), Eigen::Vector3d::UnitZ());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nn = tree.knn(tree.row(i), static_cast<std::size_t>(k));
    if (nn.size() < 3) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : nn) mean += cloud.points[n.id];
    mean /= static_cast<double>(nn.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& n : nn) {
      const Eigen::Vector3d d = cloud.points[n.id] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d normal = eig.eigenvectors().col(0).normalized();
    if (normal.z() < 0.0) normal = -normal;
    normals[i] = normal;
  }
  return normals;
}

namespace {

const std::vector<Eigen::Vector3d>& normals_or_estimate(const ColorPointCloud& cloud,
                                                        std::vector<Eigen::Vector3d>& storage) {
  if (cloud.has_normals()) return cloud.normals;
  storage = estimate_normals(cloud);
  return storage;
}

}  // namespace

std::vector<double> extract_floor_levels(const ColorPointCloud& cloud, double bin, double up_cos) {
  if (!(bin > 0.0)) throw std::invalid_argument("floor histogram bin must be positive");
  if (!(up_cos > 0.0 && up_cos < 1.0)) throw std::invalid_argument("up_cos must lie in (0, 1)");
  if (cloud.empty()) throw DataError("no floor detected: empty cloud");

  std::vector<Eigen::Vector3d> storage;
  const auto& normals = normals_or_estimate(cloud, storage);
  std::vector<double> heights;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (normals[i].z() > up_cos) heights.push_back(cloud.points[i].z());
  }
  if (heights.empty()) throw DataError("no floor detected: no upward-facing points");

  const double lo = *std::min_element(heights.begin(), heights.end());
  const double hi = *std::max_element(heights.begin(), heights.end());
  // Offset by half a bin so a perfectly flat floor lands in the middle of a bin.
  const double base = lo - 0.5 * bin;
  const int nbins = static_cast<int>(std::floor((hi - base) / bin)) + 1;
  std::vector<std::size_t> count(nbins, 0);
  std::vector<double> sum(nbins, 0.0);
  for (double z : heights) {
    const int b = std::clamp(static_cast<int>(std::floor((z - base) / bin)), 0, nbins - 1);
    ++count[b];
    sum[b] += z;
  }
  const std::size_t peak = *std::max_element(count.begin(), count.end());
  std::vector<double> levels;
  for (int b = 0; b < nbins; ++b) {
    if (count[b] == 0 || 5 * count[b] < peak) continue;
    const std::size_t left = b > 0 ? count[b - 1] : 0;
    const std::size_t right = b + 1 < nbins ? count[b + 1] : 0;
    // Plateaus resolve to their first bin.
    if (!(count[b] > left && count[b] >= right)) continue;
    double s = 0.0;
    std::size_t n = 0;
    for (int nb = std::max(0, b - 1); nb <= std::min(nbins - 1, b + 1); ++nb) {
      s += sum[nb];
      n += count[nb];
    }
    levels.push_back(s / static_cast<double>(n));
  }
  std::sort(levels.begin(), levels.end());
  return levels;
}

OccupancyGrid rasterize_floor(const ColorPointCloud& cloud, double floor_height, double resolution, double tolerance,
                              double up_cos, int pad_cells) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  std::vector<Eigen::Vector3d> storage;
  const auto& normals = normals_or_estimate(cloud, storage);

  std::vector<Eigen::Vector2d> xy;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (normals[i].z() > up_cos && std::abs(cloud.points[i].z() - floor_height) <= tolerance) {
      xy.push_back(cloud.points[i].head<2>());
    }
  }
  if (xy.empty()) throw DataError("floor at height " + std::to_string(floor_height) + " has no supporting points");

  Eigen::Vector2d lo = xy.front(), hi = xy.front();
  for (const auto& p : xy) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.floor_height = floor_height;
  // The lowest point sits at a cell centre, so lattice-sampled floors fill every cell.
  grid.origin = lo - Eigen::Vector2d::Constant((pad_cells + 0.5) * resolution);
  const int cols = static_cast<int>(std::floor((hi.x() - lo.x()) / resolution + 0.5)) + 1 + 2 * pad_cells;
  const int rows = static_cast<int>(std::floor((hi.y() - lo.y()) / resolution + 0.5)) + 1 + 2 * pad_cells;
  grid.cells = Raster(rows, cols);
  for (const auto& p : xy) {
    const int c = std::clamp(static_cast<int>(std::floor((p.x() - grid.origin.x()) / resolution)), 0, cols - 1);
    const int r = std::clamp(static_cast<int>(std::floor((p.y() - grid.origin.y()) / resolution)), 0, rows - 1);
    grid.cells.at(r, c) = 1;
  }
  return grid;
}

namespace {

cv::Mat to_mat(const Raster& r) {
  cv::Mat m(r.rows, r.cols, CV_8UC1);
  std::copy(r.cells.begin(), r.cells.end(), m.ptr<std::uint8_t>(0));
  return m;
}

Raster from_mat(const cv::Mat& m) {
  Raster r(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) r.at(y, x) = row[x] ? 1 : 0;
  }
  return r;
}

}  // namespace

Raster compute_corridor_mask(const OccupancyGrid& grid, int close_radius, double blur_sigma, double threshold,
                             CorridorStages* stages) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("corridor threshold must lie in (0, 1)");
  if (grid.cells.count() == 0) throw DataError("empty corridor: occupancy grid has no free cells");

  // Pad so closing and the distance transform see free space bounded by occupied cells.
  const int pad = std::max(close_radius, 0) + 2;
  cv::Mat free_space = cv::Mat::zeros(grid.cells.rows + 2 * pad, grid.cells.cols + 2 * pad, CV_8UC1);
  to_mat(grid.cells).copyTo(free_space(cv::Rect(pad, pad, grid.cells.cols, grid.cells.rows)));

  cv::Mat closed = free_space.clone();
  if (close_radius > 0) {
    const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2 * close_radius + 1, 2 * close_radius + 1));
    cv::dilate(free_space, closed, kernel, cv::Point(-1, -1), 1, cv::BORDER_CONSTANT, cv::Scalar(0));
    cv::erode(closed, closed, kernel, cv::Point(-1, -1), 1, cv::BORDER_CONSTANT, cv::Scalar(0));
  }

  cv::Mat dist;
  cv::distanceTransform(closed, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_32F);
  double max_dist = 0.0;
  cv::minMaxLoc(dist, nullptr, &max_dist);
  if (!(max_dist > 0.0)) throw DataError("empty corridor: no free space after closing");
  dist /= max_dist;

  const cv::Mat band = dist >= static_cast<float>(threshold);
  cv::Mat smooth;
  band.convertTo(smooth, CV_32F, 1.0 / 255.0);
  if (blur_sigma > 0.0) {
    cv::GaussianBlur(smooth, smooth, cv::Size(0, 0), blur_sigma, blur_sigma, cv::BORDER_CONSTANT);
  }
  double max_blur = 0.0;
  cv::minMaxLoc(smooth, nullptr, &max_blur);
  cv::Mat mask = (smooth >= static_cast<float>(0.5 * max_blur)) & band;

  const cv::Rect inner(pad, pad, grid.cells.cols, grid.cells.rows);
  Raster out = from_mat(mask(inner));
  if (out.count() == 0) throw DataError("empty corridor: threshold removed every cell");
  if (stages != nullptr) {
    stages->closed = from_mat(closed(inner));
    const cv::Mat d = dist(inner).clone();
    stages->distance.assign(d.ptr<float>(0), d.ptr<float>(0) + d.total());
    stages->mask = out;
  }
  return out;
}

Raster zhang_suen_thin(const Raster& mask) {
  Raster img = mask;
  auto px = [&](int r, int c) -> int { return img.inside(r, c) && img.at(r, c) ? 1 : 0; };
  std::vector<std::size_t> remove;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      remove.clear();
      for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
          if (!img.at(r, c)) continue;
          const int p[8] = {px(r - 1, c), px(r - 1, c + 1), px(r, c + 1), px(r + 1, c + 1),
                            px(r + 1, c), px(r + 1, c - 1), px(r, c - 1), px(r - 1, c - 1)};
          const int b = std::accumulate(p, p + 8, 0);
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int i = 0; i < 8; ++i) a += (p[i] == 0 && p[(i + 1) % 8] == 1);
          if (a != 1) continue;
          // p[0]=P2 (north), p[2]=P4 (east), p[4]=P6 (south), p[6]=P8 (west)
          if (step == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          remove.push_back(static_cast<std::size_t>(r) * img.cols + c);
        }
      }
      for (std::size_t idx : remove) img.cells[idx] = 0;
      changed = changed || !remove.empty();
    }
  }
  return img;
}

namespace {

constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};

// m-adjacent neighbours in a fixed clockwise order starting north.
std::vector<Eigen::Vector2i> m_neighbors(const Raster& s, int r, int c) {
  std::vector<Eigen::Vector2i> out;
  auto on = [&](int rr, int cc) { return s.inside(rr, cc) && s.at(rr, cc) != 0; };
  for (int i = 0; i < 8; ++i) {
    const int rr = r + kDr[i], cc = c + kDc[i];
    if (!on(rr, cc)) continue;
    const bool diagonal = kDr[i] != 0 && kDc[i] != 0;
    if (diagonal && (on(r + kDr[i], c) || on(r, c + kDc[i]))) continue;
    out.emplace_back(rr, cc);
  }
  return out;
}

bool lex_less(const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
}

double step_length(const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  return (a.x() != b.x() && a.y() != b.y()) ? std::sqrt(2.0) : 1.0;
}

}  // namespace

std::vector<SkeletonBranch> skeleton_branches(const Raster& skeleton, double resolution) {
  const int cols = skeleton.cols;
  auto key = [cols](const Eigen::Vector2i& p) { return static_cast<std::int64_t>(p.x()) * cols + p.y(); };
  auto edge_key = [&](const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
    const std::int64_t ka = key(a), kb = key(b);
    const std::int64_t n = static_cast<std::int64_t>(skeleton.rows) * cols;
    return std::min(ka, kb) * n + std::max(ka, kb);
  };

  std::vector<int> degree(skeleton.cells.size(), 0);
  for (int r = 0; r < skeleton.rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (skeleton.at(r, c)) degree[static_cast<std::size_t>(r) * cols + c] = static_cast<int>(m_neighbors(skeleton, r, c).size());
    }
  }
  auto deg = [&](const Eigen::Vector2i& p) { return degree[static_cast<std::size_t>(key(p))]; };

  std::unordered_set<std::int64_t> used_edges;
  std::vector<std::uint8_t> on_branch(skeleton.cells.size(), 0);
  std::vector<SkeletonBranch> branches;

  auto finish_branch = [&](std::vector<Eigen::Vector2i> cells) {
    SkeletonBranch b;
    for (const auto& p : cells) on_branch[static_cast<std::size_t>(key(p))] = 1;
    if (cells.size() > 1 && lex_less(cells.back(), cells.front())) std::reverse(cells.begin(), cells.end());
    for (std::size_t i = 1; i < cells.size(); ++i) b.length += step_length(cells[i - 1], cells[i]) * resolution;
    b.start_is_junction = deg(cells.front()) >= 3;
    b.end_is_junction = deg(cells.back()) >= 3;
    b.cells = std::move(cells);
    branches.push_back(std::move(b));
  };

  auto walk = [&](const Eigen::Vector2i& start, const Eigen::Vector2i& first) {
    std::vector<Eigen::Vector2i> cells{start, first};
    used_edges.insert(edge_key(start, first));
    Eigen::Vector2i prev = start, cur = first;
    while (deg(cur) == 2 && cur != start) {
      Eigen::Vector2i next = cur;
      for (const auto& n : m_neighbors(skeleton, cur.x(), cur.y())) {
        if (n != prev && !used_edges.count(edge_key(cur, n))) {
          next = n;
          break;
        }
      }
      if (next == cur) break;
      used_edges.insert(edge_key(cur, next));
      cells.push_back(next);
      prev = cur;
      cur = next;
    }
    return cells;
  };

  // Branches anchored at endpoints and junctions, in (row, col) order.
  for (int r = 0; r < skeleton.rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!skeleton.at(r, c)) continue;
      const Eigen::Vector2i p(r, c);
      if (deg(p) == 2) continue;
      if (deg(p) == 0) {
        finish_branch({p});
        continue;
      }
      for (const auto& n : m_neighbors(skeleton, r, c)) {
        if (used_edges.count(edge_key(p, n))) continue;
        finish_branch(walk(p, n));
      }
    }
  }
  // Closed loops without any endpoint or junction.
  for (int r = 0; r < skeleton.rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Eigen::Vector2i p(r, c);
      if (!skeleton.at(r, c) || on_branch[static_cast<std::size_t>(key(p))]) continue;
      const auto nbrs = m_neighbors(skeleton, r, c);
      if (nbrs.empty()) continue;
      auto cells = walk(p, nbrs.front());
      if (cells.back() != p && used_edges.count(edge_key(cells.back(), p)) == 0 &&
          (cells.back() - p).cwiseAbs().maxCoeff() <= 1) {
        used_edges.insert(edge_key(cells.back(), p));
        cells.push_back(p);
      }
      SkeletonBranch b;
      for (const auto& q : cells) on_branch[static_cast<std::size_t>(key(q))] = 1;
      for (std::size_t i = 1; i < cells.size(); ++i) b.length += step_length(cells[i - 1], cells[i]) * resolution;
      b.cells = std::move(cells);
      branches.push_back(std::move(b));
    }
  }

  std::stable_sort(branches.begin(), branches.end(), [](const SkeletonBranch& a, const SkeletonBranch& b) {
    if (a.cells.front() != b.cells.front()) return lex_less(a.cells.front(), b.cells.front());
    if (a.cells.back() != b.cells.back()) return lex_less(a.cells.back(), b.cells.back());
    if (a.cells.size() > 1 && b.cells.size() > 1 && a.cells[1] != b.cells[1]) return lex_less(a.cells[1], b.cells[1]);
    return a.cells.size() < b.cells.size();
  });
  return branches;
}

Raster prune_spurs(const Raster& skeleton, double resolution, double min_length) {
  if (min_length <= 0.0) return skeleton;
  Raster out = skeleton;
  for (const auto& b : skeleton_branches(skeleton, resolution)) {
    const bool leaf_start = !b.start_is_junction && b.cells.size() > 1 &&
                            m_neighbors(skeleton, b.cells.front().x(), b.cells.front().y()).size() == 1;
    const bool leaf_end = !b.end_is_junction && b.cells.size() > 1 &&
                          m_neighbors(skeleton, b.cells.back().x(), b.cells.back().y()).size() == 1;
    // Only spurs: one leaf end, one junction end.
    if (b.length >= min_length || leaf_start == leaf_end) continue;
    if (!(b.start_is_junction || b.end_is_junction)) continue;
    for (std::size_t i = 0; i < b.cells.size(); ++i) {
      const bool junction_end = (i == 0 && b.start_is_junction) || (i + 1 == b.cells.size() && b.end_is_junction);
      if (!junction_end) out.at(b.cells[i].x(), b.cells[i].y()) = 0;
    }
  }
  return out;
}

RenderPoseSet sample_render_poses(const Raster& mask, const OccupancyGrid& grid, const SamplingOptions& options,
                                  Raster* skeleton_out) {
  if (!(options.spacing > 0.0)) throw std::invalid_argument("pose spacing must be positive");
  if (mask.count() == 0) throw DataError("corridor too thin: empty mask");
  Raster skeleton = prune_spurs(zhang_suen_thin(mask), grid.resolution, options.spur_length);
  if (skeleton.count() == 0) throw DataError("corridor too thin: empty skeleton");
  if (skeleton_out != nullptr) *skeleton_out = skeleton;

  RenderPoseSet set;
  set.spacing = options.spacing;
  set.camera_height = options.camera_height;
  std::unordered_set<std::int64_t> emitted;
  const double z = grid.floor_height + options.camera_height;

  auto emit = [&](const SkeletonBranch& b, std::size_t i) {
    const Eigen::Vector2i cell = b.cells[i];
    const std::int64_t k = static_cast<std::int64_t>(cell.x()) * mask.cols + cell.y();
    if (!emitted.insert(k).second) return;
    const std::size_t n = b.cells.size();
    const std::size_t w = static_cast<std::size_t>(std::max(options.tangent_window, 1));
    const Eigen::Vector2i a = b.cells[i >= w ? i - w : 0];
    const Eigen::Vector2i c = b.cells[std::min(n - 1, i + w)];
    const double dx = c.y() - a.y();  // columns run along world x
    const double dy = c.x() - a.x();
    const double yaw = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);

    const Eigen::Vector2d xy = grid.cell_center(cell.x(), cell.y());
    const Eigen::Vector3d position(xy.x(), xy.y(), z);
    const int index = static_cast<int>(set.positions.size());
    set.positions.push_back(position);
    set.position_cells.push_back(cell);
    struct View {
      double offset;
      ViewDirection dir;
    };
    static constexpr View kViews[4] = {{0.0, ViewDirection::kForward},
                                       {M_PI, ViewDirection::kBack},
                                       {M_PI / 2, ViewDirection::kLeft},
                                       {-M_PI / 2, ViewDirection::kRight}};
    const int nviews = options.four_views ? 4 : 1;
    for (int v = 0; v < nviews; ++v) {
      set.poses.push_back({horizontal_camera_pose(position, yaw + kViews[v].offset), index, kViews[v].dir});
    }
  };

  for (const auto& b : skeleton_branches(skeleton, grid.resolution)) {
    emit(b, 0);
    if (b.cells.size() == 1) continue;
    const bool closed = b.cells.front() == b.cells.back();
    // Keep regular samples at least 0.9 spacing short of an end that is emitted anyway.
    const double limit = (b.end_is_junction || closed) ? b.length - 0.9 * options.spacing : b.length;
    std::size_t i = 0;
    double arc = 0.0;
    for (int k = 1; k * options.spacing <= limit + 1e-9; ++k) {
      const double target = k * options.spacing;
      while (i + 1 < b.cells.size() && arc < target - 1e-9) {
        arc += step_length(b.cells[i], b.cells[i + 1]) * grid.resolution;
        ++i;
      }
      emit(b, i);
    }
    if (b.end_is_junction) emit(b, b.cells.size() - 1);
  }
  return set;
}

namespace {

void write_raster_png(const std::filesystem::path& path, const Raster& r) {
  cv::Mat m = to_mat(r) * 255;
  cv::flip(m, m, 0);  // north up
  cv::imwrite(path.string(), m);
}

}  // namespace

RenderPoseSet plan_render_poses(const ColorPointCloud& cloud, const CorridorParams& params,
                                const std::filesystem::path& debug_dir) {
  std::vector<Eigen::Vector3d> storage;
  const ColorPointCloud* source = &cloud;
  ColorPointCloud with_normals;
  if (!cloud.has_normals()) {
    with_normals = cloud;
    with_normals.normals = estimate_normals(cloud);
    source = &with_normals;
  }
  const auto floors = extract_floor_levels(*source, params.floor_bin, params.up_cos);
  if (!debug_dir.empty()) std::filesystem::create_directories(debug_dir);

  RenderPoseSet all;
  all.spacing = params.sampling.spacing;
  all.camera_height = params.sampling.camera_height;
  for (std::size_t f = 0; f < floors.size(); ++f) {
    const OccupancyGrid grid =
        rasterize_floor(*source, floors[f], params.resolution, 1.5 * params.floor_bin, params.up_cos);
    CorridorStages stages;
    const Raster mask = compute_corridor_mask(grid, params.close_radius, params.blur_sigma, params.threshold, &stages);
    Raster skeleton;
    const RenderPoseSet floor_set = sample_render_poses(mask, grid, params.sampling, &skeleton);

    if (!debug_dir.empty()) {
      const std::string stem = "floor" + std::to_string(f);
      write_raster_png(debug_dir / (stem + "_topdown.png"), grid.cells);
      cv::Mat dt(stages.closed.rows, stages.closed.cols, CV_32F, stages.distance.data());
      cv::Mat dt8;
      dt.convertTo(dt8, CV_8U, 255.0);
      cv::flip(dt8, dt8, 0);
      cv::imwrite((debug_dir / (stem + "_distance.png")).string(), dt8);
      write_raster_png(debug_dir / (stem + "_corridor.png"), mask);
      write_raster_png(debug_dir / (stem + "_skeleton.png"), skeleton);
    }

    const int offset = static_cast<int>(all.positions.size());
    all.positions.insert(all.positions.end(), floor_set.positions.begin(), floor_set.positions.end());
    all.position_cells.insert(all.position_cells.end(), floor_set.position_cells.begin(),
                              floor_set.position_cells.end());
    for (auto p : floor_set.poses) {
      p.position += offset;
      all.poses.push_back(p);
    }
  }
  return all;
}

}  // namespace synthloc
