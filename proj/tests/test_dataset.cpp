#include <doctest.h>

#include <fstream>
#include <iterator>

#include "synthloc/error.hpp"
#include "synthloc/render/dataset.hpp"
#include "synthloc/render/radiance.hpp"
#include "synthloc/scene/demo_scene.hpp"
#include "test_util.hpp"

using namespace synthloc;

namespace {

const CameraModel kCam{80, 80, 80, 60, 160, 120};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Trajectory room_poses() {
  Trajectory poses;
  for (int k = 0; k < 5; ++k) poses.push_back({1.0 + k, horizontal_camera_pose({2.0 + k, 3.0, 1.5}, 0.7 * k)});
  return poses;
}

}  // namespace

TEST_CASE("map kind detection") {
  CHECK(detect_map_kind("a/room.ply") == MapKind::kCloud);
  CHECK(detect_map_kind("room.OBJ") == MapKind::kMesh);
  CHECK(detect_map_kind("field.bin") == MapKind::kField);
  CHECK_THROWS_AS(detect_map_kind("room.xyz"), DataError);
  CHECK(std::string(map_kind_name(MapKind::kMesh)) == "mesh");
}

TEST_CASE("missing map file names the path") {
  try {
    load_map("/nonexistent/room.ply");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/room.ply") != std::string::npos);
  }
}

TEST_CASE("manifest round trip") {
  const auto dir = test::scratch_dir("manifest");
  RenderManifest m;
  m.cam = kCam;
  m.source = "room.ply";
  m.representation = "cloud";
  const auto poses = room_poses();
  for (std::size_t i = 0; i < poses.size(); ++i)
    m.entries.push_back({static_cast<int>(i), poses[i].timestamp, poses[i].pose, "a.png", "a_depth.png"});
  write_manifest(dir, m);
  const auto back = read_manifest(dir / kManifestName);
  CHECK(back.cam == m.cam);
  CHECK(back.source == m.source);
  CHECK(back.representation == "cloud");
  CHECK(back.dir == dir);
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].id == m.entries[i].id);
    CHECK(back.entries[i].timestamp == m.entries[i].timestamp);
    CHECK(back.entries[i].pose.translation() == m.entries[i].pose.translation());
    CHECK(back.entries[i].pose.rotation().coeffs() == m.entries[i].pose.rotation().coeffs());
  }
  CHECK(back.rgb_path(0) == dir / "a.png");
  CHECK_THROWS_AS(read_manifest(dir / "none"), DataError);
}

TEST_CASE("rendered datasets do not depend on the job count, for every map kind") {
  const auto dir = test::scratch_dir("dataset");
  const Scene scene = make_room({});
  write_ply(dir / "room.ply", scene.sample_cloud(0.05));
  write_obj(dir / "room.obj", scene.build_mesh(0.25));
  RadianceGrid grid({8, 8, 8}, {0, 0, 0}, {10, 6, 3}, 0.5, 0.4);
  save_grid(grid, dir / "field.bin");
  DatasetOptions opt;
  opt.field.samples = 16;
  for (const char* name : {"room.ply", "room.obj", "field.bin"}) {
    const PriorMap map = load_map(dir / name);
    CHECK(map.kind == detect_map_kind(name));
    opt.jobs = 1;
    const auto a = render_dataset(map, room_poses(), kCam, opt, dir / (std::string(name) + "_1"));
    opt.jobs = 3;
    const auto b = render_dataset(map, room_poses(), kCam, opt, dir / (std::string(name) + "_3"));
    CHECK(a.representation == map_kind_name(map.kind));
    REQUIRE(a.entries.size() == 5);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(slurp(a.rgb_path(i)) == slurp(b.rgb_path(i)));
      CHECK(slurp(a.depth_path(i)) == slurp(b.depth_path(i)));
    }
    CHECK(slurp(a.dir / kManifestName) == slurp(b.dir / kManifestName));
    const auto pair = render_view(map, room_poses()[2].pose, kCam, opt);
    CHECK(pair.rgb.width() == kCam.width);
    CHECK(pair.depth.height() == kCam.height);
  }
}
