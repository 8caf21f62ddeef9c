#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "synthloc/render/meshrender.hpp"
#include "test_util.hpp"

using namespace synthloc;

namespace {

CameraModel cam720() { return {500, 500, 360, 270, 720, 540}; }

TexturedMesh square(double z, Rgb color, double half = 10.0) {
  TexturedMesh m;
  m.vertices = {{-half, -half, z}, {half, -half, z}, {half, half, z}, {-half, half, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.colors.assign(4, color);
  return m;
}

void append(TexturedMesh& m, const std::array<Eigen::Vector3d, 3>& tri, Rgb color) {
  const int base = static_cast<int>(m.vertices.size());
  for (const auto& v : tri) {
    m.vertices.push_back(v);
    m.colors.push_back(color);
  }
  m.faces.push_back({base, base + 1, base + 2});
}

TexturedMesh uv_sphere(double radius, int stacks, int slices) {
  TexturedMesh m;
  m.vertices.emplace_back(0, 0, radius);
  for (int i = 1; i < stacks; ++i) {
    const double th = std::numbers::pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double ph = 2 * std::numbers::pi * j / slices;
      m.vertices.emplace_back(radius * std::sin(th) * std::cos(ph), radius * std::sin(th) * std::sin(ph),
                              radius * std::cos(th));
    }
  }
  m.vertices.emplace_back(0, 0, -radius);
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) m.faces.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i + 1 < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      m.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      m.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  }
  for (int j = 0; j < slices; ++j) m.faces.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
  m.colors.assign(m.vertices.size(), Rgb{200, 200, 200});
  return m;
}

// Ray-plane depth for the centre of pixel (x, y); plane n.p = c in the camera frame.
double ray_plane_depth(const CameraModel& cam, int x, int y, const Eigen::Vector3d& n, double c) {
  const Eigen::Vector3d d((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
  return c / n.dot(d);
}

PosedImage constant_source(Rgb c, double exposure, const Pose& pose = {}) {
  const CameraModel cam{100, 100, 50, 50, 100, 100};
  return {RgbImage(100, 100, c), pose, cam, exposure};
}

const std::array<Eigen::Vector3d, 3> kFacet = {Eigen::Vector3d(-0.5, -0.5, 3), Eigen::Vector3d(0.5, -0.5, 3),
                                               Eigen::Vector3d(-0.5, 0.5, 3)};

void check_constant(const TexturePatch& p, int value, int tol = 0) {
  for (const auto& t : p.texels) {
    REQUIRE(std::abs(t.r - value) <= tol);
    REQUIRE(std::abs(t.g - value) <= tol);
    REQUIRE(std::abs(t.b - value) <= tol);
  }
}

}  // namespace

TEST_CASE("square at z=2 fills the view with constant colour and depth") {
  const auto cam = cam720();
  const auto out = rasterize_mesh(square(2.0, {40, 90, 160}), Pose::identity(), cam);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      REQUIRE(out.rgb.at(x, y) == Rgb{40, 90, 160});
      REQUIRE(std::abs(out.depth.at(x, y) - 2.0) <= 1e-6);
    }
  }
}

TEST_CASE("front triangle wins regardless of submission order") {
  const auto cam = cam720();
  const std::array<Eigen::Vector3d, 3> tri_far = {Eigen::Vector3d(-1, -1, 2), Eigen::Vector3d(1, -1, 2),
                                                  Eigen::Vector3d(0, 1, 2)};
  const std::array<Eigen::Vector3d, 3> tri_near = {Eigen::Vector3d(-0.2, -0.2, 1), Eigen::Vector3d(0.2, -0.2, 1),
                                                   Eigen::Vector3d(0, 0.2, 1)};
  for (bool near_first : {true, false}) {
    TexturedMesh m;
    if (near_first) append(m, tri_near, {255, 0, 0});
    append(m, tri_far, {0, 0, 255});
    if (!near_first) append(m, tri_near, {255, 0, 0});
    const auto out = rasterize_mesh(m, Pose::identity(), cam);
    CHECK(out.rgb.at(360, 270) == Rgb{255, 0, 0});
    CHECK(out.depth.at(360, 270) == doctest::Approx(1.0));
    // Far triangle still visible outside the near one.
    CHECK(out.rgb.at(360, 400) == Rgb{0, 0, 255});
    CHECK(out.depth.at(360, 400) == doctest::Approx(2.0));
    CHECK(out.depth.at(5, 5) == 0.0f);
    CHECK(out.rgb.at(5, 5) == Rgb{0, 0, 0});
  }
}

TEST_CASE("coincident triangles resolve to the lower face index") {
  const auto cam = cam720();
  TexturedMesh a;
  append(a, kFacet, {10, 10, 10});
  append(a, kFacet, {250, 250, 250});
  CHECK(rasterize_mesh(a, Pose::identity(), cam).rgb.at(330, 250) == Rgb{10, 10, 10});
  TexturedMesh b;
  append(b, kFacet, {250, 250, 250});
  append(b, kFacet, {10, 10, 10});
  CHECK(rasterize_mesh(b, Pose::identity(), cam).rgb.at(330, 250) == Rgb{250, 250, 250});
}

TEST_CASE("sphere silhouette matches the analytic projected disk") {
  const auto cam = cam720();
  const auto sphere = uv_sphere(1.0, 100, 100);
  REQUIRE(sphere.faces.size() >= 10000);
  for (double d : {3.0, 4.0, 6.0}) {
    const Pose pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, -d));
    const auto out = rasterize_mesh(sphere, pose, cam);
    std::size_t covered = 0;
    for (float v : out.depth.values()) covered += v > 0.0f;
    const double tan_alpha = std::tan(std::asin(1.0 / d));
    const double area = std::numbers::pi * cam.fx * cam.fy * tan_alpha * tan_alpha;
    CHECK(std::abs(covered - area) / area < 0.02);
  }
}

TEST_CASE("planar facets give exact ray-plane depth, including near-plane clipping") {
  const auto cam = cam720();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    // A tilted triangle well in front of the camera plus a wide floor that runs under and behind it.
    TexturedMesh m;
    const Eigen::Vector3d c(u(rng), u(rng), 4.0 + u(rng));
    append(m, {c + Eigen::Vector3d(u(rng), u(rng), u(rng)), c + Eigen::Vector3d(u(rng), u(rng), u(rng)),
               c + Eigen::Vector3d(u(rng), u(rng), u(rng))},
           {255, 255, 255});
    const double floor_y = 1.5;
    append(m, {Eigen::Vector3d(-50, floor_y, -50), Eigen::Vector3d(50, floor_y, -50), Eigen::Vector3d(0, floor_y, 50)},
           {80, 80, 80});
    const auto out = rasterize_mesh(m, Pose::identity(), cam);
    const Eigen::Vector3d n0 = (m.vertices[1] - m.vertices[0]).cross(m.vertices[2] - m.vertices[0]).normalized();
    const double c0 = n0.dot(m.vertices[0]);
    std::size_t checked = 0;
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const float z = out.depth.at(x, y);
        if (z <= 0.0f) continue;
        const bool on_tri = out.rgb.at(x, y) == Rgb{255, 255, 255};
        const double expect = on_tri ? ray_plane_depth(cam, x, y, n0, c0)
                                     : ray_plane_depth(cam, x, y, Eigen::Vector3d::UnitY(), floor_y);
        REQUIRE(std::abs(z - expect) < 1e-4 * std::max(1.0, expect));
        ++checked;
      }
    }
    CHECK(checked > 1000);
    // Every pixel below the horizon sees the floor or the triangle.
    for (int x = 0; x < cam.width; x += 37) CHECK(out.depth.at(x, cam.height - 1) > 0.0f);
  }
}

TEST_CASE("rendering is independent of face order") {
  const auto cam = cam720();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  TexturedMesh m;
  for (int i = 0; i < 400; ++i) {
    const Eigen::Vector3d c(u(rng), u(rng), 6.0 + u(rng));
    append(m, {c + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng)), c + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng)),
               c + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng))},
           {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())});
  }
  const auto ref = rasterize_mesh(m, Pose::identity(), cam);
  auto shuffled = m;
  std::shuffle(shuffled.faces.begin(), shuffled.faces.end(), rng);
  const auto out = rasterize_mesh(shuffled, Pose::identity(), cam);
  CHECK(out.depth.values() == ref.depth.values());
  std::size_t diff = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) diff += !(out.rgb.at(x, y) == ref.rgb.at(x, y));
  CHECK(diff == 0);
}

TEST_CASE("textured facets sample their patch, others fall back to vertex colours") {
  auto m = square(2.0, {10, 20, 30});
  TexturePatch p;
  p.res_s = p.res_t = 2;
  p.texels.assign(4, Rgb{77, 77, 77});
  m.textures = {p, std::nullopt};
  const auto out = rasterize_mesh(m, Pose::identity(), cam720());
  // Face 0 is (0, 1, 2): the half below the diagonal through the corners.
  CHECK(out.rgb.at(600, 100) == Rgb{77, 77, 77});
  CHECK(out.rgb.at(100, 400) == Rgb{10, 20, 30});
}

TEST_CASE("texture patch parameterization follows the edge vectors") {
  auto m = square(2.0, {0, 0, 0});
  TexturePatch p;
  p.res_s = p.res_t = 2;
  // s runs along V1 - V0 (+x), t along V2 - V0.
  p.texels = {{0, 0, 0}, {200, 0, 0}, {0, 200, 0}, {200, 200, 0}};
  m.textures = {p, std::nullopt};
  m.faces = {m.faces[0]};
  const auto out = rasterize_mesh(m, Pose::identity(), cam720());
  const auto left = out.rgb.at(400, 200);
  const auto right = out.rgb.at(700, 20);
  CHECK(right.r > left.r);
}

TEST_CASE("blend: constant sources give a constant texture for any exposures") {
  std::vector<PosedImage> src;
  for (double e : {0.3, 1.0, 2.5, 7.0}) src.push_back(constant_source({128, 128, 128}, e));
  const auto p = blend_facet_texture(kFacet, src);
  REQUIRE(p);
  check_constant(*p, 128);
}

TEST_CASE("blend: exposure weighting reproduces the two-source example") {
  const auto p = blend_facet_texture(kFacet, {constant_source({100, 100, 100}, 1.0), constant_source({200, 200, 200}, 3.0)});
  REQUIRE(p);
  check_constant(*p, 175);
}

TEST_CASE("blend: equal exposures give the unweighted mean") {
  const auto p = blend_facet_texture(
      kFacet, {constant_source({10, 10, 10}, 2.0), constant_source({20, 20, 20}, 2.0), constant_source({60, 60, 60}, 2.0)});
  REQUIRE(p);
  check_constant(*p, 30);
}

TEST_CASE("blend: only the n nearest sources contribute") {
  std::vector<PosedImage> src;
  // Distances 1..6 behind the origin; the farthest carries an outlier colour.
  for (int k = 1; k <= 6; ++k) {
    const std::uint8_t v = k == 6 ? 250 : static_cast<std::uint8_t>(10 * k);
    src.push_back(constant_source({v, v, v}, 1.0, Pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, -k + 1))));
  }
  std::swap(src[0], src[5]);
  const auto p = blend_facet_texture(kFacet, src);
  REQUIRE(p);
  check_constant(*p, 30);
  TextureOptions one;
  one.n_nearest = 1;
  check_constant(*blend_facet_texture(kFacet, src, one), 10);
}

TEST_CASE("blend: n=1 reproduces the source's projected colours") {
  // Red channel equals the column index; bilinear sampling of a linear image is exact.
  const CameraModel cam{100, 100, 50, 50, 200, 100};
  RgbImage img(200, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 200; ++x) img.set(x, y, {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 0});
  TextureOptions one;
  one.n_nearest = 1;
  const auto p = blend_facet_texture(kFacet, {PosedImage{img, Pose::identity(), cam, 1.0}}, one);
  REQUIRE(p);
  for (int j = 0; j < p->res_t; ++j) {
    for (int i = 0; i < p->res_s; ++i) {
      const Eigen::Vector3d P = kFacet[0] + (kFacet[1] - kFacet[0]) * i / (p->res_s - 1.0) +
                                (kFacet[2] - kFacet[0]) * j / (p->res_t - 1.0);
      const double u = cam.fx * P.x() / P.z() + cam.cx, v = cam.fy * P.y() / P.z() + cam.cy;
      const Rgb t = p->texel(i, j);
      CHECK(std::abs(t.r - (u - 0.5)) <= 0.5 + 1e-9);
      CHECK(std::abs(t.g - (v - 0.5)) <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("blend: resolution, visibility and validation") {
  const auto p = blend_facet_texture(kFacet, {constant_source({1, 2, 3}, 1.0)});
  REQUIRE(p);
  CHECK(p->res_s == 16);
  CHECK(p->res_t == 16);
  const std::array<Eigen::Vector3d, 3> long_facet = {Eigen::Vector3d(-0.5, 0, 3), Eigen::Vector3d(1.5, 0, 3),
                                                     Eigen::Vector3d(-0.5, 0.5, 3)};
  const auto q = blend_facet_texture(long_facet, {constant_source({1, 2, 3}, 1.0)});
  REQUIRE(q);
  CHECK(q->res_s == 64);
  CHECK(q->res_t == 16);

  // Facet behind the camera, or outside its view: untextured.
  const Pose turned(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitY())),
                    Eigen::Vector3d::Zero());
  CHECK_FALSE(blend_facet_texture(kFacet, {constant_source({1, 2, 3}, 1.0, turned)}));
  CHECK_FALSE(blend_facet_texture(kFacet, {}));
  CHECK_THROWS_AS(blend_facet_texture(kFacet, {constant_source({1, 2, 3}, 0.0)}), std::invalid_argument);
  CHECK_THROWS_AS(blend_facet_texture(kFacet, {constant_source({1, 2, 3}, std::nan(""))}), std::invalid_argument);
}

TEST_CASE("texturing from a rendered view reproduces that view") {
  // A checkerboard wall rendered from one camera, used as the only texture source.
  TexturedMesh wall;
  const int n = 20;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      wall.vertices.emplace_back(-2.0 + 4.0 * i / n, -1.5 + 3.0 * j / n, 3.0 + 0.05 * i);
      wall.colors.push_back((i + j) % 2 ? Rgb{230, 40, 40} : Rgb{20, 60, 220});
    }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = j * (n + 1) + i;
      wall.faces.push_back({a, a + 1, a + n + 2});
      wall.faces.push_back({a, a + n + 2, a + n + 1});
    }
  const auto cam = cam720();
  const auto src = rasterize_mesh(wall, Pose::identity(), cam);
  auto textured = wall;
  const std::size_t count = texture_mesh(textured, {PosedImage{src.rgb, Pose::identity(), cam, 1.0}}, {}, 2);
  CHECK(count > 0);
  const auto again = rasterize_mesh(textured, Pose::identity(), cam);
  double err = 0.0;
  std::size_t pixels = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (src.depth.at(x, y) <= 0.0f) continue;
      const Rgb a = src.rgb.at(x, y), b = again.rgb.at(x, y);
      err += std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
      ++pixels;
    }
  CHECK(pixels > 10000);
  CHECK(err / (3.0 * pixels) < 3.0);
  CHECK(again.depth.values() == src.depth.values());
}
