// synthloc command line: poses -> render -> build-db -> localize -> eval, plus
// field-train, the chained pipeline, and the bundled demo scene.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "synthloc/config.hpp"
#include "synthloc/error.hpp"
#include "synthloc/eval/roundtrip.hpp"
#include "synthloc/locdb/database.hpp"
#include "synthloc/parallel.hpp"

namespace fs = std::filesystem;
using namespace synthloc;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool error_json = false;
  bool quiet = false;
};

PipelineConfig resolve(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.propagate();
  cfg.validate();
  return cfg;
}

ColorPointCloud load_cloud(const fs::path& path) {
  if (detect_map_kind(path) != MapKind::kCloud)
    throw DataError("pose planning needs a point cloud (.ply), got " + path.string());
  return std::get<ColorPointCloud>(load_map(path).data);
}

Trajectory plan_poses(const ColorPointCloud& cloud, const PipelineConfig& cfg, const fs::path& debug_dir) {
  const RenderPoseSet plan = plan_render_poses(cloud, cfg.corridor, debug_dir);
  Trajectory out;
  for (const auto& rp : plan.poses) out.push_back({static_cast<double>(out.size()), rp.pose});
  return out;
}

std::unique_ptr<GlobalProvider> global_for(const PipelineConfig& cfg) { return make_global_provider(cfg.providers); }
std::unique_ptr<LocalProvider> local_for(const PipelineConfig& cfg) { return make_local_provider(cfg.providers); }

struct QueryImage {
  fs::path path;
  double timestamp;
};

// A render directory supplies its manifest timestamps; otherwise numeric file
// stems are timestamps and anything else is numbered in name order.
std::vector<QueryImage> list_images(const fs::path& input) {
  if (!fs::exists(input)) throw DataError("query images not found: " + input.string());
  if (!fs::is_directory(input)) {
    char* end = nullptr;
    const std::string stem = input.stem().string();
    const double t = std::strtod(stem.c_str(), &end);
    return {{input, end != stem.c_str() && *end == '\0' ? t : 0.0}};
  }
  std::vector<QueryImage> out;
  if (fs::exists(input / kManifestName)) {
    const auto m = read_manifest(input);
    for (std::size_t i = 0; i < m.entries.size(); ++i) out.push_back({m.rgb_path(i), m.entries[i].timestamp});
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input)) {
    const auto& p = e.path();
    if (p.extension() == ".png" && p.stem().string().find("_depth") == std::string::npos) files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  for (std::size_t i = 0; i < files.size(); ++i) {
    char* end = nullptr;
    const std::string stem = files[i].stem().string();
    const double t = std::strtod(stem.c_str(), &end);
    out.push_back({files[i], end != stem.c_str() && *end == '\0' ? t : static_cast<double>(i)});
  }
  if (out.empty()) throw DataError("no query images in " + input.string());
  return out;
}

RadianceGrid grid_around(const RenderManifest& m, const std::vector<TrainingView>& views, const FieldTrainConfig& ft) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& v : views) {
    for (int y = 0; y < v.depth.height(); y += 4) {
      for (int x = 0; x < v.depth.width(); x += 4) {
        const float z = v.depth.at(x, y);
        if (z <= 0.0f) continue;
        const Eigen::Vector3d p = v.pose * backproject(x + 0.5, y + 0.5, z, m.cam);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
  if (!(lo.array() <= hi.array()).all()) throw DataError("training renders carry no valid depth");
  return RadianceGrid(ft.dims, lo.array() - ft.margin, hi.array() + ft.margin);
}

int run_poses(const PipelineConfig& cfg, const std::string& map, const std::string& out, const std::string& debug) {
  const Trajectory poses = plan_poses(load_cloud(map), cfg, debug);
  write_trajectory(out, poses);
  spdlog::info("wrote {} render poses to {}", poses.size(), out);
  return 0;
}

RenderManifest run_render(const PipelineConfig& cfg, const std::string& map, const Trajectory& poses,
                          const fs::path& out) {
  return render_dataset(load_map(map), poses, cfg.camera, cfg.render, out);
}

LocalizationDatabase run_build(const PipelineConfig& cfg, const fs::path& renders, const fs::path& out) {
  const auto manifest = read_manifest(renders);
  auto g = global_for(cfg);
  auto l = local_for(cfg);
  BuildReport report;
  auto db = build_database(manifest, *g, *l, out, cfg.jobs, &report);
  spdlog::info("database {}: {} entries, {} skipped", out.string(), report.built, report.skipped.size());
  return db;
}

int run_localize(const PipelineConfig& cfg, const fs::path& db_dir, const fs::path& images, const fs::path& out) {
  const auto db = load_database(db_dir);
  auto g = global_for(cfg);
  auto l = local_for(cfg);
  if (g->id() != db.global_provider() || l->id() != db.local_provider())
    throw ConfigError(fmt::format("database was built with providers {}/{}, configured {}/{}", db.global_provider(),
                                  db.local_provider(), g->id(), l->id()));
  const auto queries = list_images(images);
  ResultsFile results;
  results.database = db_dir.string();
  results.database_size = db.size();
  results.database_spacing = db.pose_spacing();
  results.queries.resize(queries.size());
  parallel_for(queries.size(), cfg.jobs, [&](std::size_t i) {
    auto& rec = results.queries[i];
    rec.image = queries[i].path.string();
    rec.timestamp = queries[i].timestamp;
    rec.result = localize_image(db, *g, *l, read_rgb_png(queries[i].path), cfg.localize, queries[i].path);
  });
  write_results(out, results);
  std::size_t ok = 0;
  for (const auto& q : results.queries) ok += q.result.status == LocalizationStatus::kLocalized;
  spdlog::info("localized {} of {} queries, results in {}", ok, results.queries.size(), out.string());
  return 0;
}

int run_eval(const PipelineConfig& cfg, const fs::path& results_path, const fs::path& gt_path, bool outdoor,
             bool indoor, fs::path csv, fs::path xy) {
  const ResultsFile results = read_results(results_path);
  const Trajectory gt = load_trajectory(gt_path);
  Thresholds th = cfg.thresholds;
  if (indoor) th = kIndoorThresholds;
  if (outdoor) th = kOutdoorThresholds;
  RetrievalCriterion crit = cfg.criterion;
  if (crit.max_dist <= 0.0) crit.max_dist = 2.0 * results.database_spacing;
  if (crit.max_dist <= 0.0) throw DataError("results carry no database spacing; set eval.max_dist");
  const Evaluation ev = evaluate(results, gt, th, crit, cfg.time_tolerance);
  if (csv.empty()) csv = results_path.parent_path() / "eval.csv";
  if (xy.empty()) xy = results_path.parent_path() / "trajectory_xy.txt";
  write_eval_csv(csv, results, ev);
  write_xy(xy, results, ev);
  std::cout << format_table(results, ev);
  return 0;
}

int run_field_train(const PipelineConfig& cfg, const fs::path& scene, const fs::path& out) {
  const auto m = read_manifest(scene);
  std::vector<TrainingView> views;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    views.push_back({read_rgb_png(m.rgb_path(i)), read_depth_png(m.depth_path(i)), {}, m.entries[i].pose, m.cam});
  if (views.empty()) throw DataError("no training views in " + scene.string());
  RadianceGrid grid = grid_around(m, views, cfg.field_train);
  const auto trace = fit_grid(grid, views, cfg.field_train.fit);
  save_grid(grid, out);
  if (!trace.empty()) spdlog::info("field loss {:.5f} -> {:.5f} over {} iterations", trace.front(), trace.back(), trace.size());
  return 0;
}

int run_demo(const PipelineConfig& cfg, const fs::path& out, const std::string& layout) {
  fs::create_directories(out);
  const Scene scene = layout == "corridor" ? make_straight_corridor(20.0, 4.0, cfg.demo.scene) : make_demo_scene(cfg.demo.scene);
  const ColorPointCloud cloud = scene.sample_cloud(cfg.demo.cloud_spacing);
  write_ply(out / "room.ply", cloud);
  write_obj(out / "room.obj", scene.build_mesh(cfg.demo.mesh_spacing));
  const RenderPoseSet plan = plan_render_poses(cloud, cfg.corridor);
  const Trajectory queries = make_offset_queries(scene, plan.pose_list(), cfg.demo.queries, cfg.demo.offset,
                                                 cfg.demo.yaw_offset, false, cfg.seed);
  write_trajectory(out / "queries.tum", queries);
  spdlog::info("demo scene: {} points, {} query poses in {}", cloud.size(), queries.size(), out.string());
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 1;
    case ErrorKind::kData: return 2;
    case ErrorKind::kRuntime: return 3;
  }
  return 3;
}

const char* kind_name(int code) { return code == 1 ? "config" : code == 2 ? "data" : "runtime"; }

int report(const Globals& g, int code, const std::string& message) {
  if (g.error_json) {
    std::cerr << nlohmann::json{{"error", {{"kind", kind_name(code)}, {"message", message}, {"exit_code", code}}}}.dump()
              << "\n";
  } else {
    std::cerr << "synthloc: " << message << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual localization against synthetic views of a prior map"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "TOML config file (see `synthloc config`)");
  app.add_option("--seed", g.seed, "seed for every random number generator (overrides config)");
  app.add_option("--jobs", g.jobs, "worker threads, 0 = all cores (overrides config)");
  app.add_flag("--error-json", g.error_json, "print errors as one JSON object on stderr");
  app.add_flag("-q,--quiet", g.quiet, "only log warnings and errors");

  std::string map, out, debug_dir, poses_path, renders, db_dir, images, results_path, gt_path, csv, xy, scene,
      render_map, layout = "lshape";
  std::optional<double> spacing;
  std::optional<int> rerank, iterations;
  bool retrieval_only = false, indoor = false, outdoor = false;

  auto* poses = app.add_subcommand("poses", "plan corridor render poses from a point cloud");
  poses->add_option("--map", map, "point cloud (.ply)")->required();
  poses->add_option("--spacing", spacing, "meters between positions (overrides corridor.spacing)");
  poses->add_option("--out", out, "output TUM trajectory")->required();
  poses->add_option("--debug-dir", debug_dir, "write top-down, distance, mask, and skeleton PNGs here");

  auto* render = app.add_subcommand("render", "render RGB-D pairs from a map at the given poses");
  render->add_option("--map", map, "map file: .ply cloud, .obj mesh, or .bin field")->required();
  render->add_option("--poses", poses_path, "TUM trajectory of camera-to-world poses")->required();
  render->add_option("--out", out, "output directory")->required();

  auto* build = app.add_subcommand("build-db", "build a localization database from renders");
  build->add_option("--renders", renders, "render directory (with manifest.json)")->required();
  build->add_option("--out", out, "database directory")->required();

  auto* localize = app.add_subcommand("localize", "localize query images against a database");
  localize->add_option("--db", db_dir, "database directory")->required();
  localize->add_option("--images", images, "query image or directory")->required();
  localize->add_option("--out", out, "results.json path")->required();
  localize->add_option("--k", rerank, "re-rank the top k retrieved entries (overrides localize.rerank)");
  localize->add_flag("--retrieval-only", retrieval_only, "report the retrieved entry pose only");

  auto* eval = app.add_subcommand("eval", "score results against a ground-truth trajectory");
  eval->add_option("--results", results_path, "results.json")->required();
  eval->add_option("--gt", gt_path, "ground-truth TUM trajectory")->required();
  auto* in_flag = eval->add_flag("--indoor", indoor, "1 m / 30 degree thresholds");
  eval->add_flag("--outdoor", outdoor, "2 m / 30 degree thresholds")->excludes(in_flag);
  eval->add_option("--csv", csv, "per-query CSV (default: eval.csv next to the results)");
  eval->add_option("--xy", xy, "trajectory overlay table (default: trajectory_xy.txt next to the results)");

  auto* train = app.add_subcommand("field-train", "fit a radiance grid to rendered RGB-D views");
  train->add_option("--scene", scene, "render manifest or its directory")->required();
  train->add_option("--out", out, "grid checkpoint (.bin)")->required();
  train->add_option("--iterations", iterations, "SGD iterations (overrides field_train.iterations)");

  auto* pipeline = app.add_subcommand("pipeline", "poses, renders, and database for one map");
  pipeline->add_option("--map", map, "point cloud (.ply) used for pose planning")->required();
  pipeline->add_option("--render-map", render_map, "render from this map instead (.ply, .obj, .bin)");
  pipeline->add_option("--out", out, "output directory")->default_val(".");

  auto* demo = app.add_subcommand("demo-scene", "write the bundled synthetic room and query poses");
  demo->add_option("--out", out, "output directory")->required();
  demo->add_option("--layout", layout, "lshape or corridor")->check(CLI::IsMember({"lshape", "corridor"}));

  auto* config = app.add_subcommand("config", "print every config key with its type and default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    for (int i = 1; i < argc; ++i) g.error_json |= std::string(argv[i]) == "--error-json";
    return report(g, 1, e.what());
  }
  spdlog::set_level(g.quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (config->parsed()) {
      std::cout << config_reference();
      return 0;
    }
    PipelineConfig cfg = resolve(g);
    if (poses->parsed()) {
      if (spacing) cfg.corridor.sampling.spacing = *spacing;
      cfg.validate();
      return run_poses(cfg, map, out, debug_dir);
    }
    if (render->parsed()) {
      run_render(cfg, map, load_trajectory(poses_path), out);
      return 0;
    }
    if (build->parsed()) {
      run_build(cfg, renders, out);
      return 0;
    }
    if (localize->parsed()) {
      if (rerank) cfg.localize.rerank = *rerank;
      if (retrieval_only) cfg.localize.retrieval_only = true;
      cfg.validate();
      return run_localize(cfg, db_dir, images, out);
    }
    if (eval->parsed()) return run_eval(cfg, results_path, gt_path, outdoor, indoor, csv, xy);
    if (train->parsed()) {
      if (iterations) cfg.field_train.fit.iters = *iterations;
      cfg.validate();
      return run_field_train(cfg, scene, out);
    }
    if (pipeline->parsed()) {
      const fs::path dir = out;
      const Trajectory poses_out = plan_poses(load_cloud(map), cfg, {});
      fs::create_directories(dir);
      write_trajectory(dir / "poses.tum", poses_out);
      run_render(cfg, render_map.empty() ? map : render_map, poses_out, dir / "renders");
      run_build(cfg, dir / "renders", dir / "db");
      return 0;
    }
    if (demo->parsed()) return run_demo(cfg, out, layout);
  } catch (const Error& e) {
    return report(g, exit_code(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report(g, 3, e.what());
  }
  return 3;
}
