#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "synthloc/error.hpp"
#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/cloud.hpp"
#include "synthloc/geom/image.hpp"
#include "synthloc/geom/mesh.hpp"
#include "synthloc/geom/trajectory.hpp"
#include "test_util.hpp"

using namespace synthloc;

namespace {
CameraModel test_camera() { return {500, 500, 360, 270, 720, 540}; }
}  // namespace

TEST_CASE("project follows the pinhole formula") {
  const auto cam = test_camera();
  auto a = project({0, 0, 2}, cam);
  REQUIRE(a);
  CHECK(a->u == 360.0);
  CHECK(a->v == 270.0);
  CHECK(a->z == 2.0);
  auto b = project({1, 0, 1}, cam);
  REQUIRE(b);
  CHECK(b->u == 860.0);
  CHECK(b->v == 270.0);
  CHECK(b->z == 1.0);
  CHECK_FALSE(project({0, 0, -1}, cam));
  CHECK_FALSE(project({1, 1, 0}, cam));
}

TEST_CASE("backproject inverts project") {
  const auto cam = test_camera();
  CHECK(backproject(360, 270, 2.0, cam).isApprox(Eigen::Vector3d(0, 0, 2.0)));
  CHECK(backproject(860, 270, 1.0, cam).isApprox(Eigen::Vector3d(1.0, 0, 1.0)));
  CHECK_THROWS_AS(backproject(10, 10, 0.0, cam), std::invalid_argument);
  CHECK_THROWS_AS(backproject(10, 10, -1.0, cam), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-100, 820), v(-100, 640), z(1e-3, 200);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double uu = u(rng), vv = v(rng), zz = z(rng);
    const auto p = project(backproject(uu, vv, zz, cam), cam);
    REQUIRE(p);
    worst = std::max({worst, std::abs(p->u - uu), std::abs(p->v - vv), std::abs(p->z - zz)});
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("camera validation") {
  CHECK_NOTHROW(test_camera().validate());
  CHECK_THROWS_AS((CameraModel{0, 500, 360, 270, 720, 540}.validate()), DataError);
  CHECK_THROWS_AS((CameraModel{500, 500, 720, 270, 720, 540}.validate()), DataError);
  CHECK_THROWS_AS((CameraModel{500, 500, 360, 0, 720, 540}.validate()), DataError);
}

TEST_CASE("pose algebra") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = test::random_pose(rng), b = test::random_pose(rng), c = test::random_pose(rng);
    const Pose left = compose(compose(a, b), c);
    const Pose right = compose(a, compose(b, c));
    REQUIRE(test::translation_gap(left, right) < 1e-9);
    REQUIRE(rotation_angle(left.rotation().conjugate() * right.rotation()) < 1e-9);
    REQUIRE(std::abs(left.rotation().norm() - 1.0) < 1e-9);

    const Pose id = compose(a, invert(a));
    REQUIRE(id.translation().norm() < 1e-9);
    REQUIRE(rotation_angle(id.rotation()) < 1e-9);
    const Pose id2 = compose(invert(a), a);
    REQUIRE(id2.translation().norm() < 1e-9);

    const Pose aa = invert(invert(a));
    REQUIRE(test::translation_gap(aa, a) < 1e-9);
    REQUIRE(rotation_angle(aa.rotation().conjugate() * a.rotation()) < 1e-9);

    const Eigen::Vector3d p(0.3 * i, -1.0, 2.5);
    REQUIRE((transform(compose(a, b), p) - transform(a, transform(b, p))).norm() < 1e-9);

    const Pose ai = compose(a, Pose::identity());
    REQUIRE(test::translation_gap(ai, a) < 1e-12);
  }
}

TEST_CASE("horizontal camera pose") {
  const Pose p = horizontal_camera_pose({1, 2, 1.5}, M_PI / 2);
  const Eigen::Vector3d forward = p.rotation() * Eigen::Vector3d::UnitZ();
  CHECK(forward.isApprox(Eigen::Vector3d(0, 1, 0)));
  const Eigen::Vector3d down = p.rotation() * Eigen::Vector3d::UnitY();
  CHECK(down.isApprox(Eigen::Vector3d(0, 0, -1)));
  CHECK(camera_yaw(p) == doctest::Approx(M_PI / 2));
  CHECK(camera_yaw(horizontal_camera_pose({0, 0, 0}, -2.0)) == doctest::Approx(-2.0));
}

TEST_CASE("trajectory parsing") {
  auto t = parse_trajectory("0.0 0 0 0 0 0 0 1\n");
  REQUIRE(t.size() == 1);
  CHECK(t[0].timestamp == 0.0);
  CHECK(t[0].pose.translation().norm() == 0.0);
  CHECK(rotation_angle(t[0].pose.rotation()) == 0.0);

  t = parse_trajectory("# timestamp tx ty tz qx qy qz qw\n1 1 2 3 0 0 0 2\n\n2 0 0 0 0 0 1 1  # trailing\n");
  REQUIRE(t.size() == 2);
  CHECK(t[0].pose.rotation().w() == doctest::Approx(1.0));
  CHECK(std::abs(t[1].pose.rotation().norm() - 1.0) < 1e-12);

  try {
    parse_trajectory("0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n");
    FAIL("expected parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_trajectory("0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n"), DataError);
  CHECK_THROWS_AS(parse_trajectory("1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n"), DataError);
  CHECK_THROWS_AS(parse_trajectory("1 0 0 0 x 0 0 1\n"), DataError);
}

TEST_CASE("trajectory write/load round trip") {
  const auto dir = test::scratch_dir("traj");
  std::mt19937_64 rng(3);
  Trajectory traj;
  for (int i = 0; i < 200; ++i) traj.push_back({0.1 * i + 1e-7 * i, test::random_pose(rng, 50.0)});
  write_trajectory(dir / "t.tum", traj);
  const auto back = load_trajectory(dir / "t.tum");
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].timestamp == traj[i].timestamp);
    CHECK(back[i].pose.translation() == traj[i].pose.translation());
    CHECK((back[i].pose.rotation().coeffs() - traj[i].pose.rotation().coeffs()).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(load_trajectory(dir / "missing.tum"), DataError);
}

TEST_CASE("depth png round trip stays within half a millimeter") {
  const auto dir = test::scratch_dir("depth");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> z(0.001f, 65.5f);
  DepthImage d(97, 61);
  for (auto& v : d.values()) v = z(rng);
  d.set(0, 0, 0.0f);
  d.set(1, 0, 80.0f);     // beyond range: saturates
  d.set(2, 0, 65.535f);
  write_depth_png(dir / "d.png", d);
  const DepthImage back = read_depth_png(dir / "d.png");
  REQUIRE(back.width() == 97);
  REQUIRE(back.height() == 61);
  CHECK(back.at(0, 0) == 0.0f);
  CHECK(back.at(1, 0) == doctest::Approx(65.535));
  double worst = 0.0;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (y == 0 && x < 2) continue;
      worst = std::max(worst, std::abs(static_cast<double>(back.at(x, y)) - d.at(x, y)));
    }
  }
  CHECK(worst <= 0.5e-3 + 1e-6);
}

TEST_CASE("rgb png round trip is lossless") {
  const auto dir = test::scratch_dir("rgb");
  RgbImage img(31, 17);
  std::mt19937 rng(1);
  for (auto& b : img.data()) b = static_cast<std::uint8_t>(rng());
  write_rgb_png(dir / "c.png", img);
  CHECK(read_rgb_png(dir / "c.png") == img);
  CHECK_THROWS_AS(read_rgb_png(dir / "nope.png"), DataError);
}

TEST_CASE("ply round trip in both encodings") {
  const auto dir = test::scratch_dir("ply");
  ColorPointCloud cloud;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 500; ++i) {
    cloud.points.emplace_back(n(rng), n(rng), n(rng));
    cloud.colors.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(2 * i), 7});
    cloud.normals.push_back(Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized());
  }
  for (auto fmt : {PlyFormat::kBinaryLittleEndian, PlyFormat::kAscii}) {
    write_ply(dir / "c.ply", cloud, fmt);
    const auto back = read_ply(dir / "c.ply");
    REQUIRE(back.size() == cloud.size());
    REQUIRE(back.has_normals());
    CHECK_NOTHROW(back.validate());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      REQUIRE((back.points[i] - cloud.points[i]).norm() < 1e-6);
      REQUIRE(back.colors[i] == cloud.colors[i]);
      REQUIRE((back.normals[i] - cloud.normals[i]).norm() < 1e-6);
    }
  }
}

TEST_CASE("ply reader accepts float colors and rejects garbage") {
  const auto dir = test::scratch_dir("ply2");
  {
    std::ofstream f(dir / "a.ply");
    f << "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty double x\nproperty double y\n"
         "property double z\nproperty float red\nproperty float green\nproperty float blue\n"
         "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
         "1 2 3 1.0 0.5 0\n4 5 6 0 0 0\n";
  }
  const auto c = read_ply(dir / "a.ply");
  REQUIRE(c.size() == 2);
  CHECK(c.colors[0] == Rgb{255, 128, 0});
  CHECK_FALSE(c.has_normals());
  {
    std::ofstream f(dir / "b.ply");
    f << "not a ply\n";
  }
  CHECK_THROWS_AS(read_ply(dir / "b.ply"), DataError);
}

TEST_CASE("obj loading triangulates, colors, and drops degenerate faces") {
  const auto dir = test::scratch_dir("obj");
  {
    std::ofstream f(dir / "m.obj");
    f << "# quad\nv 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 1 1 0 0 0 1\nv 0 1 0 1 1 1\nv 2 0 0\n"
         "f 1/1 2/2 3/3 4/4\nf 1 2 5\n";
  }
  const auto m = read_obj(dir / "m.obj");
  CHECK(m.vertices.size() == 5);
  CHECK(m.faces.size() == 2);  // collinear triangle removed
  CHECK(m.colors[0] == Rgb{255, 0, 0});
  CHECK(m.colors[4] == Rgb{200, 200, 200});

  write_obj(dir / "n.obj", m);
  const auto back = read_obj(dir / "n.obj");
  CHECK(back.faces == m.faces);
  CHECK(back.colors == m.colors);

  {
    std::ofstream f(dir / "bad.obj");
    f << "v 0 0 0\nv 1 0 0\nf 1 2 9\n";
  }
  try {
    read_obj(dir / "bad.obj");
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
