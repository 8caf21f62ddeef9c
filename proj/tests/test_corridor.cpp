#include <doctest.h>

#include <cmath>
#include <functional>
#include <optional>
#include <queue>
#include <random>

#include "synthloc/corridor/corridor.hpp"
#include "synthloc/error.hpp"

using namespace synthloc;

namespace {

void add_plane(ColorPointCloud& cloud, double x0, double x1, double y0, double y1, double z, double step,
               const std::function<bool(double, double)>& keep = {}, Eigen::Vector3d normal = Eigen::Vector3d::UnitZ()) {
  const int nx = static_cast<int>(std::lround((x1 - x0) / step));
  const int ny = static_cast<int>(std::lround((y1 - y0) / step));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const double x = x0 + i * step, y = y0 + j * step;
      if (keep && !keep(x, y)) continue;
      cloud.points.emplace_back(x, y, z);
      cloud.colors.push_back({128, 128, 128});
      cloud.normals.push_back(normal);
    }
  }
}

OccupancyGrid grid_from(const std::vector<std::string>& rows, double res = 0.1) {
  OccupancyGrid g;
  g.resolution = res;
  g.cells = Raster(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < g.cells.rows; ++r)
    for (int c = 0; c < g.cells.cols; ++c) g.cells.at(r, c) = rows[r][c] == '#';
  return g;
}

OccupancyGrid rect_grid(int rows, int cols, int pad, double res,
                        const std::function<bool(int, int)>& inside = {}) {
  OccupancyGrid g;
  g.resolution = res;
  g.cells = Raster(rows + 2 * pad, cols + 2 * pad);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!inside || inside(r, c)) g.cells.at(r + pad, c + pad) = 1;
  return g;
}

// Brute-force clearance: distance from a cell centre to the nearest unset cell
// (cells outside the raster count as unset).
std::vector<double> brute_clearance(const Raster& closed) {
  std::vector<Eigen::Vector2d> unset;
  for (int r = -1; r <= closed.rows; ++r)
    for (int c = -1; c <= closed.cols; ++c)
      if (!closed.inside(r, c) || !closed.at(r, c)) unset.emplace_back(r, c);
  std::vector<double> out(closed.cells.size(), 0.0);
  for (int r = 0; r < closed.rows; ++r) {
    for (int c = 0; c < closed.cols; ++c) {
      if (!closed.at(r, c)) continue;
      double best = 1e18;
      for (const auto& u : unset) best = std::min(best, (u - Eigen::Vector2d(r, c)).squaredNorm());
      out[static_cast<std::size_t>(r) * closed.cols + c] = std::sqrt(best);
    }
  }
  return out;
}

bool connected8(const Raster& m) {
  int start = -1;
  for (std::size_t i = 0; i < m.cells.size(); ++i)
    if (m.cells[i]) { start = static_cast<int>(i); break; }
  if (start < 0) return false;
  std::vector<std::uint8_t> seen(m.cells.size(), 0);
  std::queue<int> q;
  q.push(start);
  seen[start] = 1;
  std::size_t n = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    ++n;
    const int r = i / m.cols, c = i % m.cols;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (!m.inside(rr, cc) || !m.at(rr, cc)) continue;
        const int j = rr * m.cols + cc;
        if (!seen[j]) { seen[j] = 1; q.push(j); }
      }
  }
  return n == m.count();
}

// Length of a skeleton that forms one simple open path: walk from a pixel
// with a single 8-neighbour, preferring 4-connected steps.
double simple_path_length(const Raster& s, double res) {
  auto nb = [&](int r, int c) {
    std::vector<Eigen::Vector2i> out;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc)
        if ((dr || dc) && s.inside(r + dr, c + dc) && s.at(r + dr, c + dc)) out.emplace_back(r + dr, c + dc);
    return out;
  };
  Eigen::Vector2i cur(-1, -1);
  for (int r = 0; r < s.rows && cur.x() < 0; ++r)
    for (int c = 0; c < s.cols; ++c)
      if (s.at(r, c) && nb(r, c).size() == 1) { cur = {r, c}; break; }
  REQUIRE(cur.x() >= 0);
  std::vector<std::uint8_t> seen(s.cells.size(), 0);
  double len = 0.0;
  while (true) {
    seen[static_cast<std::size_t>(cur.x()) * s.cols + cur.y()] = 1;
    std::optional<Eigen::Vector2i> next;
    for (const auto& n : nb(cur.x(), cur.y())) {
      if (seen[static_cast<std::size_t>(n.x()) * s.cols + n.y()]) continue;
      const bool ortho = n.x() == cur.x() || n.y() == cur.y();
      if (!next || (ortho && !(next->x() == cur.x() || next->y() == cur.y()))) next = n;
    }
    if (!next) break;
    len += ((next->x() != cur.x() && next->y() != cur.y()) ? std::sqrt(2.0) : 1.0) * res;
    cur = *next;
  }
  REQUIRE(static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1)) == s.count());
  return len;
}

void check_views(const RenderPoseSet& set) {
  REQUIRE(set.poses.size() == 4 * set.positions.size());
  for (std::size_t p = 0; p < set.positions.size(); ++p) {
    const double base = camera_yaw(set.poses[4 * p].pose);
    const double offsets[4] = {0, M_PI, M_PI / 2, -M_PI / 2};
    for (int v = 0; v < 4; ++v) {
      const auto& rp = set.poses[4 * p + v];
      CHECK(rp.position == static_cast<int>(p));
      double d = camera_yaw(rp.pose) - base - offsets[v];
      d = std::remainder(d, 2 * M_PI);
      CHECK(std::abs(d) < 1e-6);
      const Eigen::Vector3d fwd = rp.pose.rotation() * Eigen::Vector3d::UnitZ();
      CHECK(std::abs(fwd.z()) < 1e-12);
      CHECK((rp.pose.translation() - set.positions[p]).norm() == 0.0);
    }
  }
}

}  // namespace

TEST_CASE("floor levels from upward normals") {
  SUBCASE("two planes") {
    ColorPointCloud c;
    add_plane(c, 0, 5, 0, 5, 0.0, 0.1);
    add_plane(c, 0, 5, 0, 5, 3.0, 0.1);
    const auto f = extract_floor_levels(c);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == doctest::Approx(0.0).epsilon(0.1));
    CHECK(std::abs(f[1] - 3.0) <= 0.1);
  }
  SUBCASE("single plane") {
    ColorPointCloud c;
    add_plane(c, 0, 4, 0, 4, 0.0, 0.05);
    const auto f = extract_floor_levels(c);
    REQUIRE(f.size() == 1);
    CHECK(std::abs(f[0]) < 1e-9);
  }
  SUBCASE("sparse shelf is ignored") {
    ColorPointCloud c;
    add_plane(c, 0, 9.9, 0, 9.9, 0.0, 0.1);  // 10k points
    REQUIRE(c.size() == 10000);
    add_plane(c, 0, 0.9, 0, 0.9, 1.0, 0.1);  // 100 points
    const auto f = extract_floor_levels(c);
    REQUIRE(f.size() == 1);
    CHECK(std::abs(f[0]) < 0.1);
  }
  SUBCASE("walls and ceilings are not floors") {
    ColorPointCloud c;
    add_plane(c, 0, 4, 0, 4, 0.0, 0.1);
    add_plane(c, 0, 4, 0, 4, 3.0, 0.1, {}, -Eigen::Vector3d::UnitZ());
    for (double z = 0; z <= 3; z += 0.1)
      for (double x = 0; x <= 4; x += 0.1) {
        c.points.emplace_back(x, 0, z);
        c.colors.push_back({});
        c.normals.push_back(Eigen::Vector3d::UnitY());
      }
    const auto f = extract_floor_levels(c);
    REQUIRE(f.size() == 1);
    CHECK(std::abs(f[0]) < 1e-9);
  }
  SUBCASE("normals estimated when absent") {
    ColorPointCloud c;
    add_plane(c, 0, 3, 0, 3, 0.5, 0.1);
    c.normals.clear();
    const auto f = extract_floor_levels(c);
    REQUIRE(f.size() == 1);
    CHECK(std::abs(f[0] - 0.5) < 1e-9);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(extract_floor_levels(ColorPointCloud{}), DataError);
    ColorPointCloud c;
    add_plane(c, 0, 1, 0, 1, 0, 0.1, {}, Eigen::Vector3d::UnitX());
    CHECK_THROWS_AS(extract_floor_levels(c), DataError);
  }
}

TEST_CASE("estimated normals on a plane are vertical") {
  ColorPointCloud c;
  add_plane(c, 0, 2, 0, 2, 1.0, 0.1);
  const auto n = estimate_normals(c, 16);
  for (const auto& v : n) CHECK(v.z() > 0.999);
}

TEST_CASE("rasterized floor covers the plane footprint") {
  ColorPointCloud c;
  add_plane(c, 0, 10, 0, 6, 0.0, 0.05);
  const auto g = rasterize_floor(c, 0.0, 0.05, 0.15, 0.866, 8);
  CHECK(std::abs(g.cells.cols - (201 + 16)) <= 1);
  CHECK(std::abs(g.cells.rows - (121 + 16)) <= 1);
  CHECK(g.cells.count() >= 200u * 120u);
  CHECK_THROWS_AS(rasterize_floor(c, 5.0), DataError);
}

TEST_CASE("corridor mask of a solid rectangle is a centred band") {
  const auto g = rect_grid(120, 200, 8, 0.05);  // 10 m x 6 m
  CorridorStages st;
  const Raster m = compute_corridor_mask(g, 3, 2.0, 0.5, &st);
  CHECK(m.at(8 + 60, 8 + 100));
  CHECK_FALSE(m.at(8 + 2, 8 + 100));
  CHECK_FALSE(m.at(8 + 60, 8 + 2));
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (m.cells[i]) REQUIRE(st.closed.cells[i]);
  }
  CHECK(connected8(m));
}

TEST_CASE("single free cell yields exactly that cell") {
  const auto g = grid_from({".....", ".....", "..#..", ".....", "....."});
  const Raster m = compute_corridor_mask(g, 3, 2.0, 0.5);
  CHECK(m.count() == 1);
  CHECK(m.at(2, 2));
  const auto set = sample_render_poses(m, g, SamplingOptions{});
  REQUIRE(set.positions.size() == 1);
  REQUIRE(set.poses.size() == 4);
  CHECK(camera_yaw(set.poses[0].pose) == doctest::Approx(0.0));
  check_views(set);
}

TEST_CASE("empty inputs are rejected") {
  OccupancyGrid g;
  g.cells = Raster(10, 10);
  CHECK_THROWS_AS(compute_corridor_mask(g), DataError);
  CHECK_THROWS_AS(sample_render_poses(Raster(4, 4), g, SamplingOptions{}), DataError);
}

TEST_CASE("L-shaped corridor: connected and above the clearance threshold") {
  // Two 1.6 m wide arms at 0.1 m/cell.
  const auto g = rect_grid(70, 90, 6, 0.1, [](int r, int c) { return r < 16 || c < 16; });
  CorridorStages st;
  const Raster m = compute_corridor_mask(g, 2, 1.5, 0.5, &st);
  CHECK(connected8(m));
  const auto clearance = brute_clearance(st.closed);
  const double max_clear = *std::max_element(clearance.begin(), clearance.end());
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (!m.cells[i]) continue;
    REQUIRE(clearance[i] >= 0.5 * max_clear - 1e-9);
    REQUIRE(std::abs(st.distance[i] - clearance[i] / max_clear) < 1e-4);
  }
}

TEST_CASE("straight corridor samples match the arc-length oracle") {
  // 12 m x 2 m strip at 0.05 m/cell.
  const auto g = rect_grid(40, 240, 8, 0.05);
  const Raster m = compute_corridor_mask(g);
  Raster skeleton;
  SamplingOptions opt;
  opt.spacing = 2.0;
  const auto set = sample_render_poses(m, g, opt, &skeleton);
  // Pruned skeleton is a single straight row.
  int row = -1, cmin = 1 << 30, cmax = -1;
  for (int r = 0; r < skeleton.rows; ++r)
    for (int c = 0; c < skeleton.cols; ++c)
      if (skeleton.at(r, c)) {
        if (row >= 0) CHECK(r == row);
        row = r;
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
  const double length = (cmax - cmin) * g.resolution;
  CHECK(skeleton.count() == static_cast<std::size_t>(cmax - cmin + 1));
  const auto expected = static_cast<std::size_t>(std::floor(length / opt.spacing + 1e-9)) + 1;
  CHECK(set.positions.size() == expected);
  check_views(set);
  for (std::size_t i = 1; i < set.positions.size(); ++i) {
    CHECK((set.positions[i] - set.positions[i - 1]).norm() >= 0.9 * opt.spacing);
  }
  for (const auto& cell : set.position_cells) CHECK(m.at(cell.x(), cell.y()));
  // Forward views point along the corridor axis.
  for (std::size_t p = 0; p < set.positions.size(); ++p) {
    CHECK(std::abs(std::sin(camera_yaw(set.poses[4 * p].pose))) < 1e-9);
  }
}

TEST_CASE("10 m skeleton at 2 m spacing yields 5 positions and 20 poses") {
  // Band chosen so the pruned skeleton spans just under 10 m.
  OccupancyGrid g;
  g.resolution = 0.05;
  g.cells = Raster(9, 220);
  Raster mask(9, 220);
  for (int c = 10; c < 210; ++c) mask.at(4, c) = 1;  // 200 cells = 9.95 m of arc
  const auto set = sample_render_poses(mask, g, SamplingOptions{});
  CHECK(set.positions.size() == 5);
  CHECK(set.poses.size() == 20);
}

TEST_CASE("L-shaped corridor samples match the arc-length oracle") {
  const auto g = rect_grid(160, 200, 8, 0.05, [](int r, int c) { return r < 40 || c < 40; });
  const Raster m = compute_corridor_mask(g);
  Raster skeleton;
  SamplingOptions opt;
  opt.spacing = 1.5;
  const auto set = sample_render_poses(m, g, opt, &skeleton);
  const auto branches = skeleton_branches(skeleton, g.resolution);
  REQUIRE(branches.size() == 1);  // one bent path after spur pruning
  const double length = simple_path_length(skeleton, g.resolution);
  CHECK(branches[0].length == doctest::Approx(length));
  CHECK(set.positions.size() == static_cast<std::size_t>(std::floor(length / opt.spacing + 1e-9)) + 1);
  check_views(set);
  for (const auto& cell : set.position_cells) CHECK(m.at(cell.x(), cell.y()));
}

TEST_CASE("junctions are always emitted and branch samples keep their spacing") {
  // T-shaped corridor.
  const auto g = rect_grid(160, 240, 8, 0.05, [](int r, int c) { return r < 40 || (c >= 100 && c < 140); });
  const Raster m = compute_corridor_mask(g);
  Raster skeleton;
  SamplingOptions opt;
  opt.spacing = 2.0;
  const auto set = sample_render_poses(m, g, opt, &skeleton);
  const auto branches = skeleton_branches(skeleton, g.resolution);
  std::size_t junction_ends = 0;
  for (const auto& b : branches) {
    for (const auto& cell : {b.cells.front(), b.cells.back()}) {
      const bool is_junction = (cell == b.cells.front() && b.start_is_junction) ||
                               (cell == b.cells.back() && b.end_is_junction);
      if (!is_junction) continue;
      ++junction_ends;
      CHECK(std::find(set.position_cells.begin(), set.position_cells.end(), cell) != set.position_cells.end());
    }
  }
  CHECK(junction_ends >= 3);
  check_views(set);
}

TEST_CASE("sampling is deterministic and monotone in spacing") {
  const auto g = rect_grid(160, 200, 8, 0.05, [](int r, int c) { return r < 40 || c < 40 || r > 120; });
  const Raster m = compute_corridor_mask(g);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double spacing : {0.5, 0.8, 1.0, 1.7, 2.0, 3.0, 5.0, 20.0}) {
    SamplingOptions opt;
    opt.spacing = spacing;
    const auto a = sample_render_poses(m, g, opt);
    const auto b = sample_render_poses(m, g, opt);
    REQUIRE(a.positions == b.positions);
    CHECK(a.positions.size() <= previous);
    previous = a.positions.size();
  }
}

TEST_CASE("forward-only sampling emits one view per position") {
  const auto g = rect_grid(40, 240, 8, 0.05);
  const Raster m = compute_corridor_mask(g);
  SamplingOptions opt;
  opt.four_views = false;
  const auto set = sample_render_poses(m, g, opt);
  CHECK(set.poses.size() == set.positions.size());
  for (const auto& p : set.poses) CHECK(p.view == ViewDirection::kForward);
}

TEST_CASE("zhang-suen keeps a one-pixel line and thins a bar") {
  Raster line(5, 20);
  for (int c = 2; c < 18; ++c) line.at(2, c) = 1;
  CHECK(zhang_suen_thin(line).cells == line.cells);
  Raster bar(11, 40);
  for (int r = 2; r < 9; ++r)
    for (int c = 2; c < 38; ++c) bar.at(r, c) = 1;
  const Raster s = zhang_suen_thin(bar);
  CHECK(s.count() > 20);
  CHECK(s.count() < 60);
}

TEST_CASE("plan_render_poses handles two floors") {
  ColorPointCloud c;
  add_plane(c, 0, 8, 0, 3, 0.0, 0.05);
  add_plane(c, 0, 8, 0, 3, 3.2, 0.05);
  CorridorParams params;
  const auto set = plan_render_poses(c, params);
  REQUIRE(!set.positions.empty());
  int low = 0, high = 0;
  for (const auto& p : set.positions) {
    if (std::abs(p.z() - 1.5) < 1e-6) ++low;
    if (std::abs(p.z() - 4.7) < 1e-6) ++high;
  }
  CHECK(low > 0);
  CHECK(high > 0);
  CHECK(low + high == static_cast<int>(set.positions.size()));
}
