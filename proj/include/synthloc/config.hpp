#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synthloc/corridor/corridor.hpp"
#include "synthloc/eval/eval.hpp"
#include "synthloc/features/provider.hpp"
#include "synthloc/localize/localize.hpp"
#include "synthloc/render/dataset.hpp"
#include "synthloc/render/radiance.hpp"
#include "synthloc/scene/demo_scene.hpp"

namespace synthloc {

struct FieldTrainConfig {
  std::array<int, 3> dims{48, 48, 16};
  double margin = 0.25;  // meters added around the depth points' bounding box
  FitOptions fit;
};

struct DemoConfig {
  DemoSceneParams scene;
  double cloud_spacing = 0.025;
  double mesh_spacing = 0.025;
  int queries = 40;
  double offset = 0.5;       // meters
  double yaw_offset = 10.0;  // degrees
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0 = all cores
  CameraModel camera{360, 360, 360, 270, 720, 540};
  CorridorParams corridor;
  DatasetOptions render;
  FieldTrainConfig field_train;
  ProviderConfig providers;
  LocalizeOptions localize;
  Thresholds thresholds = kIndoorThresholds;
  RetrievalCriterion criterion{0.0, 60.0};  // max_dist <= 0: twice the database spacing
  double time_tolerance = 0.05;
  DemoConfig demo;

  PipelineConfig();
  // Throws ConfigError naming the offending key.
  void validate() const;
  // Copies the seed and job count into every stage that takes one.
  void propagate();
};

// TOML with sections matching the table printed by config_reference().
// Unknown sections or keys and wrongly typed values throw ConfigError.
PipelineConfig parse_config(const std::string& text, const std::string& origin = "config");
PipelineConfig load_config(const std::filesystem::path& path);

// One line per key: "section.key  type  default  description".
std::string config_reference();

}  // namespace synthloc
