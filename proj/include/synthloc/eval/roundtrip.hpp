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
#include "synthloc/scene/demo_scene.hpp"

namespace synthloc {

// Closed-loop synthetic experiment: plan corridor poses in a scene, render a
// database from one representation, render offset queries from another,
// localize every query and score against the query poses.
struct RoundTripOptions {
  CameraModel cam{360, 360, 360, 270, 720, 540};
  double cloud_spacing = 0.025;  // point lattice, meters
  double mesh_spacing = 0.025;   // mesh vertex lattice, meters
  MapKind database_source = MapKind::kCloud;
  MapKind query_source = MapKind::kCloud;
  CorridorParams corridor;
  int queries = 40;
  double offset = 0.5;          // meters, horizontal, random direction
  double yaw_offset = 10.0;     // degrees, random sign
  bool reverse_queries = false;  // queries face opposite to their base pose
  bool forward_base_only = false;  // base poses drawn from forward views only
  bool database_forward_only = false;  // render only the forward view at each corridor position
  Thresholds thresholds{0.1, 5.0};
  RetrievalCriterion criterion;   // max_dist is set to 2x the corridor spacing when <= 0
  // Splats must cover the 0.025 m lattice at f = 360: rho_max / z >= f * s / z.
  DatasetOptions render = [] {
    DatasetOptions o;
    o.splat.rho_max = 14;
    return o;
  }();
  LocalizeOptions localize;
  ProviderConfig providers;
  std::uint64_t seed = 1;
  std::filesystem::path work_dir;
};

struct RoundTripReport {
  std::size_t database_size = 0;
  std::size_t queries = 0;
  double retrieval_rate = 0.0;
  double localization_rate = 0.0;
  double seconds = 0.0;
  double max_query_ms = 0.0;
  ResultsFile results;
  Trajectory ground_truth;
};

// Query poses: each base pose moved `offset` meters horizontally in a random
// direction that keeps `clearance` from every surface, yaw rotated by +-yaw_offset.
Trajectory make_offset_queries(const Scene& scene, const std::vector<Pose>& bases, int count, double offset,
                               double yaw_offset_deg, bool reverse, std::uint64_t seed, double clearance = 0.3);

RoundTripReport run_round_trip(const Scene& scene, const RoundTripOptions& options);

}  // namespace synthloc
