#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "synthloc/render/splat.hpp"
#include "synthloc/scene/demo_scene.hpp"
#include "test_util.hpp"

using namespace synthloc;

namespace {

CameraModel cam720() { return {500, 500, 360, 270, 720, 540}; }

ColorPointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  ColorPointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(u(rng), u(rng), u(rng));
    c.colors.push_back({static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                        static_cast<std::uint8_t>(rng())});
  }
  return c;
}

std::size_t empty_pixels(const DepthImage& d) {
  return static_cast<std::size_t>(std::count(d.values().begin(), d.values().end(), 0.0f));
}

}  // namespace

TEST_CASE("point size follows the clamped inverse-depth rule") {
  SplatConfig cfg;
  cfg.rho_max = 4;
  cfg.rho_min = 1;
  CHECK(point_size(2.0, cfg) == 2);
  CHECK(point_size(0.5, cfg) == 4);
  CHECK(point_size(8.0, cfg) == 1);
  CHECK_THROWS_AS(point_size(0.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(point_size(-1.0, cfg), std::invalid_argument);

  for (int rho_max : {1, 2, 4, 7, 16}) {
    for (int rho_min = 1; rho_min <= rho_max; ++rho_min) {
      cfg.rho_max = rho_max;
      cfg.rho_min = rho_min;
      int previous = rho_max;
      for (double z = 1e-3; z < 200.0; z *= 1.01) {
        const int s = point_size(z, cfg);
        REQUIRE(s >= rho_min);
        REQUIRE(s <= rho_max);
        REQUIRE(s <= previous);
        previous = s;
      }
    }
  }
}

TEST_CASE("splat config validation") {
  SplatConfig cfg;
  cfg.rho_min = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.near = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("single point on the optical axis splats a 2x2 block at the principal point") {
  ColorPointCloud c;
  c.points.emplace_back(0, 0, 2);
  c.colors.push_back({10, 20, 30});
  SplatConfig cfg;
  const auto out = render_cloud(c, Pose::identity(), cam720(), cfg);
  std::size_t covered = 0;
  for (int y = 0; y < 540; ++y) {
    for (int x = 0; x < 720; ++x) {
      if (out.depth.at(x, y) == 0.0f) continue;
      ++covered;
      CHECK((x == 359 || x == 360));
      CHECK((y == 269 || y == 270));
      CHECK(out.depth.at(x, y) == 2.0f);
      CHECK(out.rgb.at(x, y) == Rgb{10, 20, 30});
    }
  }
  CHECK(covered == 4);
  CHECK(out.rgb.at(0, 0) == cfg.background);
}

TEST_CASE("z-buffer keeps the nearest point and breaks ties by index") {
  ColorPointCloud c;
  c.points = {{0, 0, 3}, {0, 0, 1}};
  c.colors = {{255, 0, 0}, {0, 255, 0}};
  SplatConfig cfg;
  cfg.rho_max = cfg.rho_min = 1;
  auto out = render_cloud(c, Pose::identity(), cam720(), cfg);
  CHECK(out.depth.at(360, 270) == 1.0f);
  CHECK(out.rgb.at(360, 270) == Rgb{0, 255, 0});

  c.points = {{0, 0, 2}, {0, 0, 2 + 1e-12}};
  out = render_cloud(c, Pose::identity(), cam720(), cfg);
  CHECK(out.rgb.at(360, 270) == Rgb{255, 0, 0});
  c.points = {{0, 0, 2 + 1e-12}, {0, 0, 2}};
  out = render_cloud(c, Pose::identity(), cam720(), cfg);
  CHECK(out.rgb.at(360, 270) == Rgb{255, 0, 0});
}

TEST_CASE("near/far clipping and behind-camera points") {
  ColorPointCloud c;
  c.points = {{0, 0, -2}, {0, 0, 0.05}, {0, 0, 150}};
  c.colors.resize(3);
  const auto out = render_cloud(c, Pose::identity(), cam720(), SplatConfig{});
  CHECK(empty_pixels(out.depth) == 720u * 540u);
}

TEST_CASE("depth buffer equals brute-force minimum over covering splats") {
  std::mt19937_64 rng(21);
  CameraModel cam{60, 60, 32, 24, 64, 48};
  for (int trial = 0; trial < 20; ++trial) {
    ColorPointCloud c = random_cloud(rng, 300, 3.0);
    for (auto& p : c.points) p.z() += 4.0;
    SplatConfig cfg;
    cfg.rho_max = 6;
    const Pose pose = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.1 * trial, Eigen::Vector3d::UnitY())),
                           Eigen::Vector3d(0.1 * trial, 0, 0));
    const auto out = render_cloud(c, pose, cam, cfg);
    // Oracle: for each pixel test every point's square footprint.
    const Pose w2c = pose.inverse();
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        double best = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
          const Eigen::Vector3d pc = w2c * c.points[i];
          if (pc.z() < cfg.near || pc.z() > cfg.far) continue;
          const double u = cam.fx * pc.x() / pc.z() + cam.cx, v = cam.fy * pc.y() / pc.z() + cam.cy;
          const int rho = point_size(pc.z(), cfg);
          const int x0 = static_cast<int>(std::floor(u - rho / 2.0 + 0.5));
          const int y0 = static_cast<int>(std::floor(v - rho / 2.0 + 0.5));
          if (x < x0 || x >= x0 + rho || y < y0 || y >= y0 + rho) continue;
          if (best == 0.0 || pc.z() < best) best = pc.z();
        }
        REQUIRE(out.depth.at(x, y) == static_cast<float>(best));
      }
    }
  }
}

TEST_CASE("rendering is independent of point order") {
  std::mt19937_64 rng(4);
  ColorPointCloud c = random_cloud(rng, 20000, 4.0);
  for (auto& p : c.points) p.z() += 6.0;
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ColorPointCloud shuffled;
  for (auto i : perm) {
    shuffled.points.push_back(c.points[i]);
    shuffled.colors.push_back(c.colors[i]);
  }
  const auto a = render_cloud(c, Pose::identity(), cam720(), SplatConfig{});
  const auto b = render_cloud(shuffled, Pose::identity(), cam720(), SplatConfig{});
  CHECK(a.depth == b.depth);
  CHECK(a.rgb == b.rgb);
}

TEST_CASE("larger splats close see-through gaps") {
  const Scene room = make_room({});
  const ColorPointCloud cloud = room.sample_cloud(0.04);
  const Pose pose = horizontal_camera_pose({7.5, 3.0, 1.5}, 0.2);
  std::vector<std::size_t> holes;
  for (int rho_max = 1; rho_max <= 4; ++rho_max) {
    SplatConfig cfg;
    cfg.rho_max = rho_max;
    holes.push_back(empty_pixels(render_cloud(cloud, pose, cam720(), cfg).depth));
  }
  for (std::size_t i = 1; i < holes.size(); ++i) CHECK(holes[i] <= holes[i - 1]);
  CHECK(holes.back() < holes.front());
}

TEST_CASE("grouped renderer matches the per-point renderer") {
  std::mt19937_64 rng(99);
  SUBCASE("single size collapses to one pass") {
    ColorPointCloud c = random_cloud(rng, 5000, 1.0);
    for (auto& p : c.points) p.z() += 50.0;
    SplatConfig cfg;
    const auto a = render_cloud(c, Pose::identity(), cam720(), cfg);
    const auto b = render_cloud_grouped(c, Pose::identity(), cam720(), cfg);
    CHECK(a.rgb == b.rgb);
    CHECK(a.depth == b.depth);
  }
  SUBCASE("random clouds and views") {
    const ColorPointCloud c = random_cloud(rng, 100000, 6.0);
    for (int view = 0; view < 20; ++view) {
      const Pose pose = test::random_pose(rng, 1.0);
      SplatConfig cfg;
      cfg.rho_max = 1 + view % 8;
      const auto a = render_cloud(c, pose, cam720(), cfg);
      const auto b = render_cloud_grouped(c, pose, cam720(), cfg);
      REQUIRE(a.rgb == b.rgb);
      REQUIRE(a.depth == b.depth);
    }
  }
}
