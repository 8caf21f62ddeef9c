#include "synthloc/render/dataset.hpp"

#include <cstdio>

#include <spdlog/spdlog.h>

#include "synthloc/error.hpp"
#include "synthloc/io/json_io.hpp"
#include "synthloc/parallel.hpp"

namespace synthloc {

namespace fs = std::filesystem;

void write_manifest(const fs::path& dir, const RenderManifest& manifest) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"timestamp", e.timestamp},
                       {"pose", pose_to_json(e.pose)},
                       {"rgb", e.rgb},
                       {"depth", e.depth}});
  }
  const nlohmann::json j{{"camera", camera_to_json(manifest.cam)},
                         {"source", manifest.source},
                         {"representation", manifest.representation},
                         {"entries", entries}};
  fs::create_directories(dir);
  write_json_file(dir / kManifestName, j);
}

RenderManifest read_manifest(const fs::path& dir_or_file) {
  const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / kManifestName : dir_or_file;
  if (!fs::exists(file)) throw DataError("render manifest not found: " + file.string());
  const auto j = read_json_file(file);
  RenderManifest m;
  m.dir = file.parent_path();
  try {
    m.cam = camera_from_json(j.at("camera"));
    m.source = j.value("source", "");
    m.representation = j.value("representation", "");
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("id").get<int>(), e.value("timestamp", 0.0), pose_from_json(e.at("pose")),
                           e.at("rgb").get<std::string>(), e.at("depth").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(file.string() + ": malformed manifest: " + ex.what());
  }
  return m;
}

const char* map_kind_name(MapKind kind) {
  switch (kind) {
    case MapKind::kCloud: return "cloud";
    case MapKind::kMesh: return "mesh";
    case MapKind::kField: return "field";
  }
  return "?";
}

MapKind detect_map_kind(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply" || ext == ".PLY") return MapKind::kCloud;
  if (ext == ".obj" || ext == ".OBJ") return MapKind::kMesh;
  if (ext == ".bin") return MapKind::kField;
  throw DataError("unrecognised map extension '" + ext + "': " + path.string());
}

PriorMap load_map(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("map file not found: " + path.string());
  PriorMap map;
  map.kind = detect_map_kind(path);
  map.path = path;
  switch (map.kind) {
    case MapKind::kCloud: {
      auto cloud = read_ply(path);
      if (cloud.empty()) throw DataError("map has no points: " + path.string());
      map.data = std::move(cloud);
      break;
    }
    case MapKind::kMesh: {
      auto mesh = read_obj(path);
      if (mesh.empty()) throw DataError("map has no faces: " + path.string());
      map.data = std::move(mesh);
      break;
    }
    case MapKind::kField: map.data = load_grid(path); break;
  }
  return map;
}

RenderedPair render_view(const PriorMap& map, const Pose& camera_to_world, const CameraModel& cam,
                         const DatasetOptions& options) {
  switch (map.kind) {
    case MapKind::kCloud:
      return render_cloud_grouped(std::get<ColorPointCloud>(map.data), camera_to_world, cam, options.splat);
    case MapKind::kMesh:
      return rasterize_mesh(std::get<TexturedMesh>(map.data), camera_to_world, cam, options.mesh);
    case MapKind::kField: {
      auto field = options.field;
      field.jobs = 1;  // parallelism lives at the dataset level
      return render_field(std::get<RadianceGrid>(map.data), camera_to_world, cam, field);
    }
  }
  throw RuntimeFailure("unknown map kind");
}

RenderManifest render_dataset(const PriorMap& map, const Trajectory& poses, const CameraModel& cam,
                              const DatasetOptions& options, const fs::path& out_dir) {
  cam.validate();
  options.splat.validate();
  fs::create_directories(out_dir);
  RenderManifest manifest;
  manifest.cam = cam;
  manifest.source = map.path.string();
  manifest.representation = map_kind_name(map.kind);
  manifest.dir = out_dir;
  manifest.entries.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    char name[32];
    auto& e = manifest.entries[i];
    e.id = static_cast<int>(i);
    e.timestamp = poses[i].timestamp;
    e.pose = poses[i].pose;
    std::snprintf(name, sizeof name, "%06zu.png", i);
    e.rgb = name;
    std::snprintf(name, sizeof name, "%06zu_depth.png", i);
    e.depth = name;
  }
  parallel_for(poses.size(), options.jobs, [&](std::size_t i) {
    const auto pair = render_view(map, poses[i].pose, cam, options);
    write_rgb_png(manifest.rgb_path(i), pair.rgb);
    write_depth_png(manifest.depth_path(i), pair.depth);
  });
  write_manifest(out_dir, manifest);
  spdlog::info("rendered {} {} views into {}", poses.size(), manifest.representation, out_dir.string());
  return manifest;
}

}  // namespace synthloc
