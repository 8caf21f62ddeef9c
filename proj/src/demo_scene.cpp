#include "synthloc/scene/demo_scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace synthloc {

bool Patch::contains(double a, double b) const {
  if (angle == 0.0) return a >= a0 && a < a1 && b >= b0 && b < b1;
  const double ca = 0.5 * (a0 + a1), cb = 0.5 * (b0 + b1);
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * (a - ca) + s * (b - cb);
  const double v = -s * (a - ca) + c * (b - cb);
  return std::abs(u) < 0.5 * (a1 - a0) && std::abs(v) < 0.5 * (b1 - b0);
}

Rgb Surface::color_at(double a, double b) const {
  for (auto it = patches.rbegin(); it != patches.rend(); ++it) {
    if (it->contains(a, b)) return it->color;
  }
  return base;
}

namespace {

int lattice_count(double size, double spacing) { return static_cast<int>(std::floor(size / spacing + 1e-9)) + 1; }

// Lattice inset by half a step so adjacent surfaces do not duplicate their shared edge.
double lattice_coord(int i, int n, double size) { return (i + 0.5) * size / n; }

}  // namespace

ColorPointCloud Scene::sample_cloud(double spacing) const {
  ColorPointCloud cloud;
  for (const auto& s : surfaces) {
    const int na = std::max(1, static_cast<int>(std::lround(s.size_a / spacing)));
    const int nb = std::max(1, static_cast<int>(std::lround(s.size_b / spacing)));
    for (int j = 0; j < nb; ++j) {
      for (int i = 0; i < na; ++i) {
        const double a = lattice_coord(i, na, s.size_a);
        const double b = lattice_coord(j, nb, s.size_b);
        cloud.points.push_back(s.origin + a * s.axis_a + b * s.axis_b);
        cloud.colors.push_back(s.color_at(a, b));
        cloud.normals.push_back(s.normal);
      }
    }
  }
  return cloud;
}

TexturedMesh Scene::build_mesh(double spacing) const {
  TexturedMesh mesh;
  for (const auto& s : surfaces) {
    const int na = lattice_count(s.size_a, spacing);
    const int nb = lattice_count(s.size_b, spacing);
    const int va = std::max(na, 2), vb = std::max(nb, 2);
    const int base = static_cast<int>(mesh.vertices.size());
    for (int j = 0; j < vb; ++j) {
      for (int i = 0; i < va; ++i) {
        const double a = s.size_a * i / (va - 1);
        const double b = s.size_b * j / (vb - 1);
        mesh.vertices.push_back(s.origin + a * s.axis_a + b * s.axis_b);
        // Sample colour just inside the surface so edge vertices see their own patch.
        mesh.colors.push_back(s.color_at(std::min(a, s.size_a - 1e-6), std::min(b, s.size_b - 1e-6)));
      }
    }
    for (int j = 0; j + 1 < vb; ++j) {
      for (int i = 0; i + 1 < va; ++i) {
        const int v00 = base + j * va + i, v10 = v00 + 1, v01 = v00 + va, v11 = v01 + 1;
        mesh.faces.push_back({v00, v10, v11});
        mesh.faces.push_back({v00, v11, v01});
      }
    }
  }
  return mesh;
}

bool Scene::raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double* t_out, Rgb* color,
                    Eigen::Vector3d* normal) const {
  double best = std::numeric_limits<double>::infinity();
  const Surface* hit = nullptr;
  double hit_a = 0.0, hit_b = 0.0;
  for (const auto& s : surfaces) {
    const Eigen::Vector3d n = s.axis_a.cross(s.axis_b);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = n.dot(s.origin - origin) / denom;
    if (!(t > 1e-9) || t >= best) continue;
    const Eigen::Vector3d p = origin + t * dir - s.origin;
    const double a = p.dot(s.axis_a), b = p.dot(s.axis_b);
    if (a < 0.0 || b < 0.0 || a > s.size_a || b > s.size_b) continue;
    best = t;
    hit = &s;
    hit_a = a;
    hit_b = b;
  }
  if (hit == nullptr) return false;
  if (t_out) *t_out = best;
  if (color) *color = hit->color_at(hit_a, hit_b);
  if (normal) *normal = hit->normal;
  return true;
}

namespace {

class Dice {
 public:
  explicit Dice(std::uint32_t seed) : rng_(seed) {}
  // Uniform in [lo, hi) from raw 32-bit draws (portable across standard libraries).
  double uniform(double lo, double hi) { return lo + (hi - lo) * (rng_() / 4294967296.0); }
  std::uint8_t channel() { return static_cast<std::uint8_t>(rng_() % 256); }
  Rgb vivid() {
    // Spread intensities so neighbouring patches contrast in luminance too.
    const double level = uniform(0.0, 1.0);
    const int lum = level < 0.5 ? static_cast<int>(uniform(10, 90)) : static_cast<int>(uniform(160, 250));
    Rgb c{channel(), channel(), channel()};
    const int mean = (c.r + c.g + c.b) / 3;
    auto shift = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(v - mean + lum, 0, 255)); };
    return {shift(c.r), shift(c.g), shift(c.b)};
  }
  // Random hue whose luminance sits `lo`..`hi` above or below `around`.
  Rgb muted(Rgb around, double lo, double hi) {
    const int mean0 = (around.r + around.g + around.b) / 3;
    const int step = static_cast<int>(uniform(lo, hi));
    const int lum = std::clamp(uniform(0.0, 1.0) < 0.5 ? mean0 - step : mean0 + step, 0, 255);
    Rgb c{channel(), channel(), channel()};
    const int mean = (c.r + c.g + c.b) / 3;
    auto shift = [&](std::uint8_t v) {
      return static_cast<std::uint8_t>(std::clamp((v - mean) / 3 + lum, 0, 255));
    };
    return {shift(c.r), shift(c.g), shift(c.b)};
  }

 private:
  std::mt19937 rng_;
};

// contrast > 0 draws muted colours within that luminance step of the surface base.
void decorate(Surface& s, Dice& dice, double density, double min_size, double max_size, double contrast = 0.0) {
  const int count = static_cast<int>(std::lround(density * s.size_a * s.size_b));
  for (int i = 0; i < count; ++i) {
    const double wa = dice.uniform(min_size, max_size);
    const double wb = dice.uniform(min_size, max_size);
    const double a0 = dice.uniform(-0.5 * wa, s.size_a - 0.5 * wa);
    const double b0 = dice.uniform(-0.5 * wb, s.size_b - 0.5 * wb);
    s.patches.push_back({a0, b0, a0 + wa, b0 + wb,
                         contrast > 0.0 ? dice.muted(s.base, 0.5 * contrast, contrast) : dice.vivid()});
  }
}

Surface make_surface(const Eigen::Vector3d& origin, const Eigen::Vector3d& axis_a, double size_a,
                     const Eigen::Vector3d& axis_b, double size_b, const Eigen::Vector3d& normal, Rgb base) {
  Surface s;
  s.origin = origin;
  s.axis_a = axis_a;
  s.axis_b = axis_b;
  s.size_a = size_a;
  s.size_b = size_b;
  s.normal = normal;
  s.base = base;
  return s;
}

}  // namespace

Scene make_room(const RoomParams& p) {
  Dice dice(p.seed);
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  const double L = p.length, W = p.width, H = p.height;
  Scene scene;
  // Floor and ceiling.
  Surface floor = make_surface({0, 0, 0}, ex, L, ey, W, ez, {120, 110, 100});
  for (int i = 0; i < static_cast<int>(std::ceil(L)); ++i) {
    for (int j = 0; j < static_cast<int>(std::ceil(W)); ++j) {
      if ((i + j) % 2 == 0) floor.patches.push_back({double(i), double(j), i + 1.0, j + 1.0, {150, 140, 128}});
    }
  }
  decorate(floor, dice, 0.4 * p.patch_density, 0.15, 0.8);
  Surface ceiling = make_surface({0, 0, H}, ex, L, ey, W, -ez, {215, 215, 210});
  decorate(ceiling, dice, 0.3 * p.patch_density, 0.2, 0.9);
  scene.surfaces.push_back(floor);
  scene.surfaces.push_back(ceiling);

  // Walls, each parameterized along the wall (a) and up (b).
  const Rgb wall_base{200, 195, 185};
  std::vector<Surface> walls = {
      make_surface({0, 0, 0}, ex, L, ez, H, ey, wall_base),    // y = 0
      make_surface({0, W, 0}, ex, L, ez, H, -ey, wall_base),   // y = W
      make_surface({0, 0, 0}, ey, W, ez, H, ex, wall_base),    // x = 0
      make_surface({L, 0, 0}, ey, W, ez, H, -ex, wall_base)};  // x = L
  for (auto& w : walls) {
    decorate(w, dice, p.patch_density, 0.08, 0.6);
    scene.surfaces.push_back(w);
  }
  return scene;
}

namespace {

// Floor rectangles {x0, y0, x1, y1} and the walls around them, decorated the same way for every layout.
Scene decorated_scene(const std::vector<std::array<double, 4>>& rects, std::vector<Surface> walls,
                      const DemoSceneParams& p, Dice& dice) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  const double H = p.height;
  Scene scene;
  for (const auto& r : rects) {
    Surface floor = make_surface({r[0], r[1], 0}, ex, r[2] - r[0], ey, r[3] - r[1], ez, {120, 110, 100});
    for (int i = 0; i < static_cast<int>(r[2] - r[0]); ++i) {
      for (int j = 0; j < static_cast<int>(r[3] - r[1]); ++j) {
        // Checker parity from world cells so adjoining rectangles agree.
        if (p.floor_checker && (static_cast<int>(r[0]) + i + static_cast<int>(r[1]) + j) % 2 == 0)
          floor.patches.push_back({double(i), double(j), i + 1.0, j + 1.0, {150, 140, 128}});
      }
    }
    decorate(floor, dice, 0.4 * p.patch_density, 0.15, 0.8, p.floor_contrast);
    Surface ceiling = make_surface({r[0], r[1], H}, ex, r[2] - r[0], ey, r[3] - r[1], -ez, {215, 215, 210});
    decorate(ceiling, dice, 0.3 * p.patch_density, 0.2, 0.9, p.floor_contrast);
    scene.surfaces.push_back(floor);
    scene.surfaces.push_back(ceiling);
  }
  for (auto& w : walls) {
    const int panels = static_cast<int>(std::ceil(w.size_a * p.panels_per_meter));
    for (int k = 0; k < panels; ++k) {
      const double wa = dice.uniform(0.6, 1.6), wb = dice.uniform(0.8, 2.2);
      const double a0 = dice.uniform(0.0, std::max(0.0, w.size_a - wa));
      const double b0 = dice.uniform(0.0, std::max(0.0, H - wb));
      w.patches.push_back({a0, b0, a0 + wa, b0 + wb, dice.vivid()});
    }
    const std::size_t first = w.patches.size() - static_cast<std::size_t>(panels);
    decorate(w, dice, p.patch_density, 0.08, 0.6, p.detail_contrast);
    // Each 2 m section of wall tilts its decorations by its own angle, which
    // gives gradient-orientation descriptors something to tell walls apart by.
    std::vector<double> tilt(static_cast<std::size_t>(std::ceil(w.size_a / 2.0)) + 1);
    for (auto& t : tilt) t = dice.uniform(0.0, 3.14159265358979);
    for (std::size_t k = first; k < w.patches.size(); ++k) {
      auto& patch = w.patches[k];
      const double centre = 0.5 * (patch.a0 + patch.a1);
      patch.angle = tilt[static_cast<std::size_t>(std::clamp(centre / 2.0, 0.0, double(tilt.size() - 1)))];
    }
    scene.surfaces.push_back(w);
  }
  // Cabinets against the walls: front, top and two sides, skipping corners.
  for (const auto& w : walls) {
    const int count = static_cast<int>(std::floor(w.size_a * p.cabinets_per_meter));
    for (int k = 0; k < count; ++k) {
      const double width = dice.uniform(0.6, 1.6);
      const double depth = dice.uniform(0.35, 0.6);
      const double height = dice.uniform(0.5, 2.2);
      const double a0 = dice.uniform(0.7, std::max(0.7, w.size_a - 0.7 - width));
      const Eigen::Vector3d foot = w.origin + a0 * w.axis_a;
      const Rgb body = dice.muted(w.base, 40.0, 120.0);
      Surface front = make_surface(foot + depth * w.normal, w.axis_a, width, ez, height, w.normal, body);
      Surface top = make_surface(foot + height * ez, w.axis_a, width, w.normal, depth, ez, body);
      Surface left = make_surface(foot, w.normal, depth, ez, height, -w.axis_a, body);
      Surface right = make_surface(foot + width * w.axis_a, w.normal, depth, ez, height, w.axis_a, body);
      decorate(front, dice, 2.0 * p.patch_density, 0.05, 0.3, p.detail_contrast);
      decorate(left, dice, 2.0 * p.patch_density, 0.05, 0.2, p.detail_contrast);
      decorate(right, dice, 2.0 * p.patch_density, 0.05, 0.2, p.detail_contrast);
      for (auto* s : {&front, &top, &left, &right}) scene.surfaces.push_back(*s);
    }
  }
  return scene;
}

}  // namespace

Scene make_demo_scene(const DemoSceneParams& p) {
  Dice dice(p.seed);
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  const double H = p.height;
  const Rgb wall_base{200, 195, 185};
  // Arm A [0, 12] x [0, 5], arm B [7, 12] x [5, 12].
  return decorated_scene({{0, 0, 12, 5}, {7, 5, 12, 12}},
                         {make_surface({0, 0, 0}, ex, 12, ez, H, ey, wall_base),    // y = 0
                          make_surface({12, 0, 0}, ey, 12, ez, H, -ex, wall_base),  // x = 12
                          make_surface({7, 12, 0}, ex, 5, ez, H, -ey, wall_base),   // y = 12
                          make_surface({7, 5, 0}, ey, 7, ez, H, ex, wall_base),     // x = 7
                          make_surface({0, 5, 0}, ex, 7, ez, H, -ey, wall_base),    // y = 5
                          make_surface({0, 0, 0}, ey, 5, ez, H, ex, wall_base)},    // x = 0
                         p, dice);
}

Scene make_straight_corridor(double length, double width, const DemoSceneParams& p) {
  Dice dice(p.seed);
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  const double H = p.height;
  const Rgb wall_base{200, 195, 185};
  return decorated_scene({{0, 0, length, width}},
                         {make_surface({0, 0, 0}, ex, length, ez, H, ey, wall_base),
                          make_surface({0, width, 0}, ex, length, ez, H, -ey, wall_base),
                          make_surface({0, 0, 0}, ey, width, ez, H, ex, wall_base),
                          make_surface({length, 0, 0}, ey, width, ez, H, -ex, wall_base)},
                         p, dice);
}

}  // namespace synthloc
