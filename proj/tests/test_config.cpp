#include <doctest.h>

#include <sstream>

#include "synthloc/config.hpp"
#include "synthloc/error.hpp"

using namespace synthloc;

TEST_CASE("defaults validate and seeds propagate") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.seed = 42;
  cfg.jobs = 3;
  cfg.propagate();
  CHECK(cfg.localize.ransac.seed == 42);
  CHECK(cfg.field_train.fit.seed == 42);
  CHECK(cfg.render.jobs == 3);
  CHECK(cfg.field_train.fit.jobs == 3);
}

TEST_CASE("keys override defaults") {
  const auto cfg = parse_config(R"(
seed = 9
[camera]
fx = 100
fy = 100.5
cx = 80
cy = 60
width = 160
height = 120
[splat]
rho_max = 6
[providers]
global_provider = "plugin:python3 bridge.py"
timeout_ms = 2500
[localize]
retrieval_only = true
[field_train]
dims = [8, 9, 10]
)");
  CHECK(cfg.seed == 9);
  CHECK(cfg.camera.fy == 100.5);
  CHECK(cfg.camera.width == 160);
  CHECK(cfg.render.splat.rho_max == 6);
  CHECK(cfg.providers.global == "plugin:python3 bridge.py");
  CHECK(cfg.providers.timeout.count() == 2500);
  CHECK(cfg.localize.retrieval_only);
  CHECK(cfg.field_train.dims == std::array<int, 3>{8, 9, 10});
  CHECK(cfg.localize.min_inliers == 12);
}

TEST_CASE("unknown keys, sections, and bad values are config errors") {
  CHECK_THROWS_AS(parse_config("sede = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("[splat]\nrho_mx = 3"), ConfigError);
  CHECK_THROWS_AS(parse_config("[splatt]\nrho_max = 3"), ConfigError);
  CHECK_THROWS_AS(parse_config("[splat.extra]\nx = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("[splat]\nrho_max = \"big\""), ConfigError);
  CHECK_THROWS_AS(parse_config("[splat]\nrho_max = 2.5"), ConfigError);
  CHECK_THROWS_AS(parse_config("jobs = -1"), ConfigError);
  CHECK_THROWS_AS(parse_config("[splat]\nrho_min = 9\nrho_max = 3"), ConfigError);
  CHECK_THROWS_AS(parse_config("[camera]\nfx = 0"), ConfigError);
  CHECK_THROWS_AS(parse_config("[eval]\nmax_translation = -1"), ConfigError);
  CHECK_THROWS_AS(parse_config("[field_train]\ndims = [1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_config("not toml ["), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
  try {
    parse_config("[localize]\nratioo = 0.7", "my.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("localize.ratioo") != std::string::npos);
    CHECK(std::string(e.what()).find("my.toml") != std::string::npos);
  }
}

TEST_CASE("every documented key parses back with its default") {
  // Rebuild a TOML document from the reference table and parse it.
  std::istringstream ref(config_reference());
  std::string line, section, doc;
  int keys = 0;
  for (; std::getline(ref, line); ++keys) {
    std::istringstream fields(line);
    std::string name, type, value;
    fields >> name >> type;
    std::getline(fields >> std::ws, value);
    if (type == "int[3]") value = value.substr(0, value.find(']') + 1);
    else if (type == "string") value = value.substr(0, value.find('"', 1) + 1);
    else value = value.substr(0, value.find(' '));
    const auto dot = name.find('.');
    const std::string sec = dot == std::string::npos ? "" : name.substr(0, dot);
    const std::string key = dot == std::string::npos ? name : name.substr(dot + 1);
    if (sec != section) {
      REQUIRE(!sec.empty());
      doc += "[" + sec + "]\n";
      section = sec;
    }
    doc += key + " = " + value + "\n";
  }
  CHECK(keys > 60);
  const auto cfg = parse_config(doc);
  const PipelineConfig defaults;
  CHECK(cfg.camera == defaults.camera);
  CHECK(cfg.render.splat.rho_max == defaults.render.splat.rho_max);
  CHECK(cfg.corridor.up_cos == defaults.corridor.up_cos);
  CHECK(cfg.providers.local == defaults.providers.local);
  CHECK(cfg.field_train.dims == defaults.field_train.dims);
  CHECK(config_reference() == config_reference());
}
