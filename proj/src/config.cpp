#include "synthloc/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "synthloc/error.hpp"

namespace synthloc {

namespace {

struct Key {
  std::string name;  // section.key, or key for top-level entries
  std::string type;
  std::string doc;
  std::function<void(const toml::node&)> set;
  std::function<std::string()> show;
};

std::string where(const toml::node& n) {
  const auto& s = n.source();
  return s.begin ? fmt::format(" (line {})", s.begin.line) : std::string();
}

double as_double(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
  throw ConfigError(fmt::format("config key '{}' must be a number{}", name, where(n)));
}

std::int64_t as_int(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<std::int64_t>()) return *v;
  throw ConfigError(fmt::format("config key '{}' must be an integer{}", name, where(n)));
}

class Registry {
 public:
  void real(const std::string& name, double& ref, const std::string& doc) {
    keys_.push_back({name, "float", doc, [&ref, name](const toml::node& n) { ref = as_double(n, name); },
                     [&ref] { return fmt::format("{}", ref); }});
  }
  template <typename Int>
  void integer(const std::string& name, Int& ref, const std::string& doc) {
    keys_.push_back({name, "int", doc,
                     [&ref, name](const toml::node& n) {
                       const auto v = as_int(n, name);
                       if (std::is_unsigned_v<Int> && v < 0)
                         throw ConfigError(fmt::format("config key '{}' must not be negative{}", name, where(n)));
                       ref = static_cast<Int>(v);
                     },
                     [&ref] { return fmt::format("{}", ref); }});
  }
  void boolean(const std::string& name, bool& ref, const std::string& doc) {
    keys_.push_back({name, "bool", doc,
                     [&ref, name](const toml::node& n) {
                       auto v = n.value_exact<bool>();
                       if (!v) throw ConfigError(fmt::format("config key '{}' must be true or false{}", name, where(n)));
                       ref = *v;
                     },
                     [&ref] { return ref ? std::string("true") : std::string("false"); }});
  }
  void string(const std::string& name, std::string& ref, const std::string& doc) {
    keys_.push_back({name, "string", doc,
                     [&ref, name](const toml::node& n) {
                       auto v = n.value_exact<std::string>();
                       if (!v) throw ConfigError(fmt::format("config key '{}' must be a string{}", name, where(n)));
                       ref = *v;
                     },
                     [&ref] { return "\"" + ref + "\""; }});
  }
  void int3(const std::string& name, std::array<int, 3>& ref, const std::string& doc) {
    keys_.push_back({name, "int[3]", doc,
                     [&ref, name](const toml::node& n) {
                       const auto* arr = n.as_array();
                       if (!arr || arr->size() != 3)
                         throw ConfigError(fmt::format("config key '{}' must be an array of 3 integers{}", name, where(n)));
                       for (std::size_t i = 0; i < 3; ++i) ref[i] = static_cast<int>(as_int(*arr->get(i), name));
                     },
                     [&ref] { return fmt::format("[{}, {}, {}]", ref[0], ref[1], ref[2]); }});
  }
  void millis(const std::string& name, std::chrono::milliseconds& ref, const std::string& doc) {
    keys_.push_back({name, "int", doc,
                     [&ref, name](const toml::node& n) { ref = std::chrono::milliseconds(as_int(n, name)); },
                     [&ref] { return fmt::format("{}", ref.count()); }});
  }

  const Key* find(const std::string& name) const {
    for (const auto& k : keys_)
      if (k.name == name) return &k;
    return nullptr;
  }
  bool has_section(const std::string& section) const {
    for (const auto& k : keys_)
      if (k.name.rfind(section + ".", 0) == 0) return true;
    return false;
  }
  const std::vector<Key>& keys() const { return keys_; }

 private:
  std::vector<Key> keys_;
};

void describe(PipelineConfig& c, Registry& r) {
  r.integer("seed", c.seed, "seed for every random number generator");
  r.integer("jobs", c.jobs, "worker threads for render and build stages, 0 = all cores");

  r.real("camera.fx", c.camera.fx, "focal length x, pixels");
  r.real("camera.fy", c.camera.fy, "focal length y, pixels");
  r.real("camera.cx", c.camera.cx, "principal point x, pixels");
  r.real("camera.cy", c.camera.cy, "principal point y, pixels");
  r.integer("camera.width", c.camera.width, "image width, pixels");
  r.integer("camera.height", c.camera.height, "image height, pixels");

  auto& cp = c.corridor;
  r.real("corridor.spacing", cp.sampling.spacing, "meters of corridor between render positions");
  r.real("corridor.camera_height", cp.sampling.camera_height, "camera height above the floor, meters");
  r.boolean("corridor.four_views", cp.sampling.four_views, "render 4 views per position (false: forward only)");
  r.real("corridor.spur_length", cp.sampling.spur_length, "prune skeleton leaf branches shorter than this, meters");
  r.integer("corridor.tangent_window", cp.sampling.tangent_window, "cells each side for the corridor tangent");
  r.real("corridor.resolution", cp.resolution, "occupancy grid cell size, meters");
  r.integer("corridor.close_radius", cp.close_radius, "morphological closing radius, cells");
  r.real("corridor.blur_sigma", cp.blur_sigma, "Gaussian blur of the distance field, cells");
  r.real("corridor.threshold", cp.threshold, "corridor keeps clearance >= threshold x max clearance");
  r.real("corridor.floor_bin", cp.floor_bin, "floor height histogram bin, meters");
  r.real("corridor.up_cos", cp.up_cos, "minimum normal.z for a point to count as floor");

  auto& sp = c.render.splat;
  r.integer("splat.rho_max", sp.rho_max, "largest splat, pixels");
  r.integer("splat.rho_min", sp.rho_min, "smallest splat, pixels");
  r.real("splat.near", sp.near, "near clip, meters");
  r.real("splat.far", sp.far, "far clip, meters");

  auto& mr = c.render.mesh;
  r.real("mesh.near", mr.near, "near clipping plane, meters");
  r.real("mesh.far", mr.far, "far clip, meters");
  r.boolean("mesh.cull_backfaces", mr.cull_backfaces, "skip triangles facing away from the camera");

  auto& fr = c.render.field;
  r.integer("field.samples", fr.samples, "samples per ray when rendering a field");
  r.real("field.near", fr.near, "near bound along each ray, meters");
  r.real("field.far", fr.far, "far bound along each ray, meters");
  r.real("field.min_opacity", fr.min_opacity, "depth is left invalid below this accumulated opacity");

  auto& ft = c.field_train;
  r.int3("field_train.dims", ft.dims, "grid nodes per axis");
  r.real("field_train.margin", ft.margin, "padding around the depth points' bounding box, meters");
  r.integer("field_train.iterations", ft.fit.iters, "SGD iterations");
  r.integer("field_train.batch", ft.fit.batch, "rays per iteration");
  r.integer("field_train.samples", ft.fit.samples, "samples per training ray");
  r.real("field_train.lr_color", ft.fit.lr_color, "colour learning rate");
  r.real("field_train.lr_density", ft.fit.lr_density, "density learning rate");
  r.real("field_train.rgb_weight", ft.fit.weights.rgb, "photometric loss weight");
  r.real("field_train.depth_weight", ft.fit.weights.depth, "depth KL loss weight");
  r.real("field_train.normal_weight", ft.fit.weights.normal, "normal loss weight");
  r.real("field_train.depth_sigma", ft.fit.weights.sigma_hat, "depth noise scale of the KL target, meters");

  auto& pv = c.providers;
  r.string("providers.global_provider", pv.global, "\"builtin\" or \"plugin:<command line>\"");
  r.string("providers.local_provider", pv.local, "\"builtin\" or \"plugin:<command line>\"");
  r.string("providers.on_plugin_error", pv.on_plugin_error, "\"fail\" or \"builtin\" when a plugin cannot start");
  r.integer("providers.pool_size", pv.pool_size, "plugin processes per provider");
  r.millis("providers.timeout_ms", pv.timeout, "plugin reply timeout (SYNTHLOC_PLUGIN_TIMEOUT_MS overrides)");
  r.integer("providers.max_features", pv.detector.max_features, "keypoints kept per image");
  r.integer("providers.fast_threshold", pv.detector.fast_threshold, "FAST intensity threshold");
  r.real("providers.nms_radius", pv.detector.nms_radius, "keypoint suppression radius, pixels");

  auto& lo = c.localize;
  r.real("localize.min_confidence", lo.min_confidence, "matches need confidence above this");
  r.integer("localize.min_correspondences", lo.min_correspondences, "fewer 2D-3D pairs fail as insufficient-matches");
  r.integer("localize.min_inliers", lo.min_inliers, "fewer RANSAC inliers fail as degenerate");
  r.real("localize.ratio", lo.ratio, "nearest/second-nearest descriptor ratio");
  r.integer("localize.rerank", lo.rerank, "database candidates to try, keeping the most inliers");
  r.boolean("localize.retrieval_only", lo.retrieval_only, "report the retrieved entry pose, skip matching");

  auto& rs = c.localize.ransac;
  r.real("ransac.threshold_px", rs.threshold_px, "inlier reprojection threshold, pixels");
  r.integer("ransac.max_iterations", rs.max_iterations, "RANSAC iteration cap");
  r.real("ransac.confidence", rs.confidence, "adaptive stopping confidence");
  r.integer("ransac.refine_iterations", rs.refine_iterations, "Levenberg-Marquardt iterations on the inliers");

  r.real("eval.max_translation", c.thresholds.max_translation, "localized when within this many meters");
  r.real("eval.max_rotation", c.thresholds.max_rotation, "and within this many degrees");
  r.real("eval.max_dist", c.criterion.max_dist, "retrieval radius, meters; 0 = twice the database spacing");
  r.real("eval.max_view_angle", c.criterion.max_view_angle, "retrieval optical axis tolerance, degrees");
  r.real("eval.time_tolerance", c.time_tolerance, "GT association window, seconds");

  auto& dm = c.demo;
  r.real("demo.height", dm.scene.height, "room height, meters");
  r.real("demo.patch_density", dm.scene.patch_density, "small wall patches per square meter");
  r.real("demo.panels_per_meter", dm.scene.panels_per_meter, "large wall panels per meter of wall");
  r.real("demo.cabinets_per_meter", dm.scene.cabinets_per_meter, "cabinets per meter of wall");
  r.real("demo.detail_contrast", dm.scene.detail_contrast, "luminance step of wall patches, 0 = vivid");
  r.real("demo.floor_contrast", dm.scene.floor_contrast, "luminance step of floor and ceiling patches");
  r.real("demo.cloud_spacing", dm.cloud_spacing, "point lattice spacing, meters");
  r.real("demo.mesh_spacing", dm.mesh_spacing, "mesh vertex spacing, meters");
  r.integer("demo.queries", dm.queries, "query poses written to queries.tum");
  r.real("demo.offset", dm.offset, "query translation offset, meters");
  r.real("demo.yaw_offset", dm.yaw_offset, "query yaw offset, degrees");
}

void apply(const toml::table& table, const std::string& prefix, const Registry& reg) {
  for (const auto& [k, node] : table) {
    const std::string name = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = node.as_table()) {
      if (!prefix.empty() || !reg.has_section(name))
        throw ConfigError(fmt::format("unknown config section '{}'{}", name, where(node)));
      apply(*sub, name, reg);
      continue;
    }
    const Key* key = reg.find(name);
    if (!key) throw ConfigError(fmt::format("unknown config key '{}'{}", name, where(node)));
    key->set(node);
  }
}

}  // namespace

PipelineConfig::PipelineConfig() {
  // The demo lattice is 0.025 m; f * s = 9 px, so splats up to 14 px close every gap.
  render.splat.rho_max = 14;
}

void PipelineConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  try {
    camera.validate();
  } catch (const DataError& e) {
    throw ConfigError(std::string("camera: ") + e.what());
  }
  try {
    render.splat.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("splat: ") + e.what());
  }
  thresholds.validate();
  need(corridor.sampling.spacing > 0.0, "corridor.spacing must be positive");
  need(corridor.resolution > 0.0, "corridor.resolution must be positive");
  need(corridor.threshold > 0.0 && corridor.threshold < 1.0, "corridor.threshold must be in (0, 1)");
  need(render.mesh.near > 0.0 && render.mesh.near < render.mesh.far, "mesh.near must be in (0, mesh.far)");
  need(render.field.samples > 0, "field.samples must be positive");
  need(field_train.dims[0] >= 2 && field_train.dims[1] >= 2 && field_train.dims[2] >= 2,
       "field_train.dims needs at least 2 nodes per axis");
  need(field_train.fit.iters >= 0 && field_train.fit.batch > 0, "field_train iterations/batch out of range");
  need(providers.pool_size >= 1, "providers.pool_size must be at least 1");
  need(providers.timeout.count() > 0, "providers.timeout_ms must be positive");
  need(providers.on_plugin_error == "fail" || providers.on_plugin_error == "builtin",
       "providers.on_plugin_error must be \"fail\" or \"builtin\"");
  need(providers.detector.max_features > 0, "providers.max_features must be positive");
  need(localize.min_correspondences >= 4, "localize.min_correspondences must be at least 4");
  need(localize.min_inliers >= 4, "localize.min_inliers must be at least 4");
  need(localize.ratio > 0.0 && localize.ratio <= 1.0, "localize.ratio must be in (0, 1]");
  need(localize.rerank >= 1, "localize.rerank must be at least 1");
  need(localize.ransac.threshold_px > 0.0, "ransac.threshold_px must be positive");
  need(localize.ransac.max_iterations > 0, "ransac.max_iterations must be positive");
  need(localize.ransac.confidence > 0.0 && localize.ransac.confidence < 1.0, "ransac.confidence must be in (0, 1)");
  need(criterion.max_view_angle > 0.0, "eval.max_view_angle must be positive");
  need(time_tolerance >= 0.0, "eval.time_tolerance must not be negative");
  need(demo.cloud_spacing > 0.0 && demo.mesh_spacing > 0.0, "demo spacings must be positive");
  need(demo.queries >= 0, "demo.queries must not be negative");
}

void PipelineConfig::propagate() {
  localize.ransac.seed = seed;
  field_train.fit.seed = seed;
  field_train.fit.jobs = jobs;
  render.jobs = jobs;
  demo.scene.seed = 7 + static_cast<std::uint32_t>(seed);
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  Registry reg;
  describe(cfg, reg);
  toml::table table;
  try {
    table = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    throw ConfigError(fmt::format("{}: line {}: {}", origin, e.source().begin.line, e.description()));
  }
  try {
    apply(table, "", reg);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (std::getenv("SYNTHLOC_PLUGIN_TIMEOUT_MS")) cfg.providers.timeout = default_plugin_timeout();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_reference() {
  PipelineConfig cfg;
  Registry reg;
  describe(cfg, reg);
  std::string out;
  for (const auto& k : reg.keys()) out += fmt::format("{:<30} {:<7} {:<10} {}\n", k.name, k.type, k.show(), k.doc);
  return out;
}

}  // namespace synthloc
