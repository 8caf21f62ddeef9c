#include "synthloc/eval/roundtrip.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include <spdlog/spdlog.h>

#include "synthloc/error.hpp"
#include "synthloc/locdb/database.hpp"
#include "synthloc/parallel.hpp"

namespace synthloc {

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

PriorMap scene_map(const Scene& scene, MapKind kind, const RoundTripOptions& o) {
  PriorMap map;
  map.kind = kind;
  if (kind == MapKind::kCloud) {
    map.path = "demo-scene.ply";
    map.data = scene.sample_cloud(o.cloud_spacing);
  } else if (kind == MapKind::kMesh) {
    map.path = "demo-scene.obj";
    map.data = scene.build_mesh(o.mesh_spacing);
  } else {
    throw ConfigError("round trip supports cloud and mesh sources");
  }
  return map;
}

}  // namespace

Trajectory make_offset_queries(const Scene& scene, const std::vector<Pose>& bases, int count, double offset,
                               double yaw_offset_deg, bool reverse, std::uint64_t seed, double clearance) {
  if (bases.empty()) throw DataError("no base poses for queries");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(bases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  Trajectory out;
  for (int q = 0; q < count; ++q) {
    const Pose& base = bases[order[static_cast<std::size_t>(q) % order.size()]];
    const Eigen::Vector3d c = base.translation();
    Eigen::Vector3d dir = Eigen::Vector3d::UnitX();
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double a = angle(rng);
      dir = Eigen::Vector3d(std::cos(a), std::sin(a), 0.0);
      double t = 0.0;
      if (!scene.raycast(c, dir, &t, nullptr, nullptr) || t > offset + clearance) break;
    }
    const double sign = (rng() & 1u) ? 1.0 : -1.0;
    double yaw = camera_yaw(base) + sign * yaw_offset_deg * kRad;
    if (reverse) yaw += std::numbers::pi;
    out.push_back({static_cast<double>(q), horizontal_camera_pose(c + offset * dir, yaw)});
  }
  return out;
}

RoundTripReport run_round_trip(const Scene& scene, const RoundTripOptions& o) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (o.work_dir.empty()) throw ConfigError("round trip needs a work directory");
  std::filesystem::create_directories(o.work_dir);

  const PriorMap cloud_map = scene_map(scene, MapKind::kCloud, o);
  const auto& cloud = std::get<ColorPointCloud>(cloud_map.data);
  const RenderPoseSet plan = plan_render_poses(cloud, o.corridor);
  Trajectory db_poses;
  std::vector<Pose> bases;
  for (const auto& rp : plan.poses) {
    if (o.database_forward_only && rp.view != ViewDirection::kForward) continue;
    db_poses.push_back({static_cast<double>(db_poses.size()), rp.pose});
    if (!o.forward_base_only || rp.view == ViewDirection::kForward) bases.push_back(rp.pose);
  }

  const PriorMap db_map = o.database_source == MapKind::kCloud ? cloud_map : scene_map(scene, o.database_source, o);
  const auto manifest = render_dataset(db_map, db_poses, o.cam, o.render, o.work_dir / "renders");

  auto global = make_global_provider(o.providers);
  auto local = make_local_provider(o.providers);
  const auto db = build_database(manifest, *global, *local, o.work_dir / "db", o.render.jobs);

  const Trajectory queries =
      make_offset_queries(scene, bases, o.queries, o.offset, o.yaw_offset, o.reverse_queries, o.seed ^ 0x9e3779b9u);
  const PriorMap& query_map = o.query_source == MapKind::kCloud ? cloud_map
                              : o.query_source == o.database_source ? db_map
                                                                    : scene_map(scene, o.query_source, o);
  RoundTripReport report;
  report.database_size = db.size();
  report.queries = queries.size();
  report.ground_truth = queries;
  report.results.database = (o.work_dir / "db").string();
  report.results.database_size = db.size();
  report.results.database_spacing = o.corridor.sampling.spacing;
  report.results.queries.resize(queries.size());
  parallel_for(queries.size(), o.render.jobs, [&](std::size_t i) {
    const auto img = render_view(query_map, queries[i].pose, o.cam, o.render).rgb;
    auto& rec = report.results.queries[i];
    char name[32];
    std::snprintf(name, sizeof name, "query_%03zu", i);
    rec.image = name;
    rec.timestamp = queries[i].timestamp;
    rec.result = localize_image(db, *global, *local, img, o.localize);
  });
  for (const auto& q : report.results.queries) report.max_query_ms = std::max(report.max_query_ms, q.result.timings.total_ms);

  RetrievalCriterion criterion = o.criterion;
  if (criterion.max_dist <= 0.0) criterion.max_dist = 2.0 * o.corridor.sampling.spacing;
  const Evaluation ev = evaluate(report.results, queries, o.thresholds, criterion);
  report.retrieval_rate = ev.retrieval_rate;
  report.localization_rate = ev.localization_rate;
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  write_results(o.work_dir / "results.json", report.results);
  write_trajectory(o.work_dir / "queries_gt.tum", queries);
  spdlog::info("round trip: {} entries, {} queries, retrieval {:.1f}%, localization {:.1f}%, {:.1f}s", db.size(),
               queries.size(), ev.retrieval_rate, ev.localization_rate, report.seconds);
  return report;
}

}  // namespace synthloc
