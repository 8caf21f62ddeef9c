#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/cloud.hpp"
#include "synthloc/geom/mesh.hpp"
#include "synthloc/geom/trajectory.hpp"
#include "synthloc/render/meshrender.hpp"
#include "synthloc/render/radiance.hpp"
#include "synthloc/render/splat.hpp"

namespace synthloc {

// Paths are relative to the manifest directory.
struct ManifestEntry {
  int id = 0;
  double timestamp = 0.0;
  Pose pose;  // camera-to-world
  std::string rgb;
  std::string depth;
};

struct RenderManifest {
  CameraModel cam;
  std::string source;          // map file the renders came from
  std::string representation;  // "cloud", "mesh" or "field"
  std::vector<ManifestEntry> entries;
  std::filesystem::path dir;  // not serialized; set by read_manifest

  std::filesystem::path rgb_path(std::size_t i) const { return dir / entries[i].rgb; }
  std::filesystem::path depth_path(std::size_t i) const { return dir / entries[i].depth; }
};

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const RenderManifest& manifest);
// Accepts the directory or the manifest file itself.
RenderManifest read_manifest(const std::filesystem::path& dir_or_file);

enum class MapKind { kCloud, kMesh, kField };
const char* map_kind_name(MapKind kind);
// .ply -> cloud, .obj -> mesh, .bin -> field; anything else is a DataError.
MapKind detect_map_kind(const std::filesystem::path& path);

struct PriorMap {
  MapKind kind = MapKind::kCloud;
  std::filesystem::path path;
  std::variant<ColorPointCloud, TexturedMesh, RadianceGrid> data;
};

// Throws DataError naming the path when the file is missing or unreadable.
PriorMap load_map(const std::filesystem::path& path);

struct DatasetOptions {
  SplatConfig splat;
  MeshRenderConfig mesh;
  FieldRenderOptions field;
  unsigned jobs = 0;  // 0 = all cores
};

RenderedPair render_view(const PriorMap& map, const Pose& camera_to_world, const CameraModel& cam,
                         const DatasetOptions& options);

// Renders every pose (in parallel) into `out_dir` as %06d.png / %06d_depth.png
// and writes the manifest. Output bytes do not depend on the job count.
RenderManifest render_dataset(const PriorMap& map, const Trajectory& poses, const CameraModel& cam,
                              const DatasetOptions& options, const std::filesystem::path& out_dir);

}  // namespace synthloc
