#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include "synthloc/features/features.hpp"
#include "synthloc/features/provider.hpp"
#include "synthloc/render/splat.hpp"
#include "synthloc/scene/demo_scene.hpp"
#include "test_util.hpp"

using namespace synthloc;

namespace {

const RgbImage& room_view() {
  static const RgbImage img = [] {
    const Scene room = make_room({});
    const auto cloud = room.sample_cloud(0.02);
    return render_cloud(cloud, horizontal_camera_pose({2.0, 3.0, 1.5}, 0.3), {360, 360, 360, 270, 720, 540},
                        SplatConfig{.rho_max = 8})
        .rgb;
  }();
  return img;
}

RgbImage scaled(const RgbImage& img, double f) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      auto s = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::lround(v * f)); };
      out.set(x, y, {s(c.r), s(c.g), s(c.b)});
    }
  return out;
}

double cosine(const GlobalDescriptor& a, const GlobalDescriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += static_cast<double>(a.values[i]) * b.values[i];
  return s;
}

double norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

LocalFeatureSet binary_set(const std::vector<std::array<std::uint8_t, 32>>& rows) {
  LocalFeatureSet f;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.keypoints.emplace_back(10.0 + i, 10.0);
    f.scores.push_back(0.5f);
    f.binary.insert(f.binary.end(), rows[i].begin(), rows[i].end());
  }
  return f;
}

std::array<std::uint8_t, 32> bits(int count, int offset = 0) {
  std::array<std::uint8_t, 32> d{};
  for (int b = offset; b < offset + count; ++b) d[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
  return d;
}

std::size_t identity_matches(const MatchSet& m) {
  std::size_t n = 0;
  for (const auto& p : m.pairs) n += p.query == p.reference;
  return n;
}

std::string plugin(const std::string& mode) { return std::string("plugin:") + FAKE_PLUGIN_PATH + " " + mode; }

struct EnvGuard {
  explicit EnvGuard(const char* value) {
    if (value) setenv("SYNTHLOC_PLUGIN_TIMEOUT_MS", value, 1);
    else unsetenv("SYNTHLOC_PLUGIN_TIMEOUT_MS");
  }
  ~EnvGuard() { unsetenv("SYNTHLOC_PLUGIN_TIMEOUT_MS"); }
};

}  // namespace

TEST_CASE("global descriptor basics") {
  const auto& img = room_view();
  const auto a = builtin_global_descriptor(img);
  const auto b = builtin_global_descriptor(img);
  CHECK(a.values.size() == 512);
  CHECK(a.values == b.values);
  CHECK(descriptor_distance(a, b) == 0.0);
  CHECK(std::abs(norm(a.values) - 1.0) < 1e-6);
  CHECK(cosine(a, builtin_global_descriptor(scaled(img, 0.5))) > 0.95);

  const auto flat = builtin_global_descriptor(RgbImage(80, 80, {90, 90, 90}));
  for (float v : flat.values) CHECK(v == doctest::Approx(1.0 / std::sqrt(512.0)));
  CHECK_THROWS_AS(builtin_global_descriptor(RgbImage(63, 100)), DataError);
}

TEST_CASE("global descriptors are unit norm on random images") {
  std::mt19937 rng(1);
  for (int i = 0; i < 50; ++i) {
    RgbImage img(64 + static_cast<int>(rng() % 100), 64 + static_cast<int>(rng() % 100));
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        img.set(x, y, {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())});
    CHECK(std::abs(norm(builtin_global_descriptor(img).values) - 1.0) < 1e-6);
  }
}

TEST_CASE("detector: constant image and white square") {
  CHECK(builtin_detect(RgbImage(100, 100, {128, 128, 128})).size() == 0);
  CHECK_THROWS_AS(builtin_detect(RgbImage(31, 64)), DataError);

  RgbImage sq(200, 200, {0, 0, 0});
  for (int y = 60; y < 140; ++y)
    for (int x = 60; x < 140; ++x) sq.set(x, y, {255, 255, 255});
  const auto f = builtin_detect(sq);
  REQUIRE(f.size() >= 4);
  const std::array<Eigen::Vector2d, 4> corners = {Eigen::Vector2d(60, 60), Eigen::Vector2d(140, 60),
                                                  Eigen::Vector2d(60, 140), Eigen::Vector2d(140, 140)};
  std::array<int, 4> hits{};
  for (const auto& k : f.keypoints) {
    int nearest = 0;
    for (int c = 1; c < 4; ++c)
      if ((k - corners[c]).norm() < (k - corners[nearest]).norm()) nearest = c;
    CHECK((k - corners[nearest]).norm() < 6.0);
    ++hits[nearest];
  }
  for (int h : hits) CHECK(h >= 1);
}

TEST_CASE("detector output invariants") {
  const auto& img = room_view();
  const auto f = builtin_detect(img);
  f.validate();
  CHECK(f.size() > 200);
  CHECK(f.size() <= 1024);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.keypoints[i].x() >= 0);
    CHECK(f.keypoints[i].x() <= img.width());
    CHECK(f.keypoints[i].y() >= 0);
    CHECK(f.keypoints[i].y() <= img.height());
    CHECK(f.scores[i] >= 0.0f);
    CHECK(f.scores[i] <= 1.0f);
    for (std::size_t j = 0; j < i; ++j) REQUIRE((f.keypoints[i] - f.keypoints[j]).norm() > 5.0);
  }
  DetectorOptions few;
  few.max_features = 50;
  const auto g = builtin_detect(img, few);
  CHECK(g.size() == 50);
  // The strongest 50 survive.
  for (std::size_t i = 0; i < 50; ++i) CHECK(g.keypoints[i] == f.keypoints[i]);
  CHECK(builtin_detect(img).binary == f.binary);
}

TEST_CASE("self-matching recovers the identity") {
  const auto f = builtin_detect(room_view());
  const auto m = match_features(f, f);
  CHECK(identity_matches(m) >= 0.95 * f.size());
  for (const auto& p : m.pairs) CHECK(p.confidence == doctest::Approx(1.0));
}

TEST_CASE("descriptors survive a 90 degree rotation") {
  const auto& img = room_view();
  RgbImage rot(img.height(), img.width());
  // (x, y) -> (h - 1 - y, x)
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) rot.set(img.height() - 1 - y, x, img.at(x, y));
  const auto a = builtin_detect(img), b = builtin_detect(rot);
  const auto m = match_features(a, b);
  std::size_t good = 0;
  for (const auto& p : m.pairs) {
    const Eigen::Vector2d k = a.keypoints[p.query];
    const Eigen::Vector2d expect(img.height() - k.y(), k.x());
    good += (b.keypoints[p.reference] - expect).norm() < 2.0;
  }
  MESSAGE(good << " of " << m.pairs.size() << " matches geometrically correct");
  CHECK(m.pairs.size() > 50);
  CHECK(good >= 0.8 * m.pairs.size());
}

TEST_CASE("ratio test arithmetic") {
  const auto q = binary_set({bits(0)});
  const auto keep = match_features(q, binary_set({bits(10), bits(40, 100)}), 0.8);
  REQUIRE(keep.pairs.size() == 1);
  CHECK(keep.pairs[0].reference == 0);
  CHECK(std::abs(keep.pairs[0].confidence - 0.75) < 1e-6);
  CHECK(match_features(q, binary_set({bits(30), bits(32, 100)}), 0.8).pairs.empty());
  // A lone reference has no second neighbour: kept with full confidence.
  const auto lone = match_features(q, binary_set({bits(5)}), 0.8);
  REQUIRE(lone.pairs.size() == 1);
  CHECK(lone.pairs[0].confidence == 1.0);
}

TEST_CASE("matcher invariants on random descriptors") {
  std::mt19937 rng(3);
  auto random_set = [&](int n) {
    std::vector<std::array<std::uint8_t, 32>> rows(n);
    for (auto& r : rows)
      for (auto& b : r) b = static_cast<std::uint8_t>(rng());
    return binary_set(rows);
  };
  const auto a = random_set(300), b = random_set(250);
  const auto ab = match_features(a, b, 1e9), ba = match_features(b, a, 1e9);
  std::set<std::pair<int, int>> fwd, bwd;
  for (const auto& p : ab.pairs) fwd.insert({p.query, p.reference});
  for (const auto& p : ba.pairs) bwd.insert({p.reference, p.query});
  CHECK(fwd == bwd);
  std::set<int> queries;
  for (const auto& p : match_features(a, b).pairs) {
    CHECK(queries.insert(p.query).second);
    CHECK(p.confidence >= 0.0);
    CHECK(p.confidence <= 1.0);
  }
  const auto self = match_features(a, a);
  CHECK(identity_matches(self) == a.size());

  LocalFeatureSet fl;
  fl.kind = DescriptorKind::kFloat;
  fl.dim = 3;
  fl.keypoints = {{1, 1}, {2, 2}};
  fl.scores = {1, 1};
  fl.real = {0, 0, 0, 1, 1, 1};
  CHECK_THROWS_AS(match_features(a, fl), std::invalid_argument);
  const auto fm = match_features(fl, fl);
  CHECK(identity_matches(fm) == 2);
}

TEST_CASE("plugin handshake, descriptors and determinism") {
  PluginProcess p(std::string(FAKE_PLUGIN_PATH) + " normal");
  CHECK(p.info().name == "fake");
  CHECK(p.info().descriptor_len == 16);
  CHECK(p.info().has("detect"));

  const auto dir = test::scratch_dir("plugin");
  write_rgb_png(dir / "view.png", room_view());
  const nlohmann::json req = {{"op", "global_descriptor"}, {"image_path", (dir / "view.png").string()}};
  CHECK(p.call_raw(req) == p.call_raw(req));
  CHECK_THROWS_AS(p.call({{"op", "bogus"}}), PluginError);
  // Still serving after an error reply.
  CHECK(p.call(req).contains("descriptor"));

  ProviderConfig cfg;
  cfg.global = plugin("normal");
  auto g = make_global_provider(cfg);
  CHECK(g->id() == "plugin:fake");
  const auto d = g->describe(room_view());
  CHECK(d.values.size() == 16);
  CHECK(std::abs(norm(d.values) - 1.0) < 1e-6);
  CHECK(g->describe(room_view(), dir / "view.png").values == d.values);
}

TEST_CASE("plugin local features and matching") {
  ProviderConfig cfg;
  cfg.local = plugin("normal");
  auto local = make_local_provider(cfg);
  const auto f = local->detect(room_view());
  f.validate();
  CHECK(f.kind == DescriptorKind::kFloat);
  CHECK(f.dim == 256);
  CHECK(f.size() == builtin_detect(room_view()).size());
  const auto m = local->match(f, f, 0.8);
  CHECK(identity_matches(m) >= 0.95 * f.size());
}

TEST_CASE("plugin pool serves concurrent callers") {
  ProviderConfig cfg;
  cfg.global = plugin("normal");
  cfg.pool_size = 2;
  auto g = make_global_provider(cfg);
  const auto expect = g->describe(room_view());
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 3; ++i) ok += g->describe(room_view()).values == expect.values;
    });
  for (auto& t : threads) t.join();
  CHECK(ok == 12);
}

TEST_CASE("plugin failures are reported by kind") {
  const auto dir = test::scratch_dir("plugin_fail");
  write_rgb_png(dir / "view.png", RgbImage(64, 64, {1, 2, 3}));
  const nlohmann::json req = {{"op", "global_descriptor"}, {"image_path", (dir / "view.png").string()}};
  auto reason = [&](const std::string& mode, std::chrono::milliseconds timeout = std::chrono::milliseconds(10000)) {
    PluginProcess p(std::string(FAKE_PLUGIN_PATH) + " " + mode, timeout);
    try {
      p.call(req);
    } catch (const PluginError& e) {
      return e.reason();
    }
    FAIL("no error");
    return PluginError::Reason::kStart;
  };
  const auto start = std::chrono::steady_clock::now();
  CHECK(reason("slow", std::chrono::milliseconds(300)) == PluginError::Reason::kTimeout);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::milliseconds(2500));
  CHECK(reason("garbage") == PluginError::Reason::kProtocol);
  CHECK(reason("crash") == PluginError::Reason::kExited);

  ProviderConfig cfg;
  cfg.global = plugin("badlen");
  CHECK_THROWS_AS(make_global_provider(cfg)->describe(RgbImage(64, 64)), PluginError);

  CHECK_THROWS_AS(PluginProcess(std::string(FAKE_PLUGIN_PATH) + " nohello"), PluginError);
  CHECK_THROWS_AS(PluginProcess("/nonexistent/plugin/binary"), PluginError);
}

TEST_CASE("provider selection and fallback") {
  ProviderConfig cfg;
  CHECK(make_global_provider(cfg)->id() == "builtin");
  CHECK(make_local_provider(cfg)->id() == "builtin");
  cfg.global = plugin("nohello");
  CHECK_THROWS_AS(make_global_provider(cfg), PluginError);
  cfg.on_plugin_error = "builtin";
  CHECK(make_global_provider(cfg)->id() == "builtin");
  cfg.local = plugin("nohello");
  CHECK(make_local_provider(cfg)->id() == "builtin");
  cfg.on_plugin_error = "maybe";
  CHECK_THROWS_AS(make_global_provider(cfg), ConfigError);
  cfg.on_plugin_error = "fail";
  cfg.global = "netvlad";
  CHECK_THROWS_AS(make_global_provider(cfg), ConfigError);
  cfg.global = "plugin:";
  CHECK_THROWS_AS(make_global_provider(cfg), ConfigError);
}

TEST_CASE("plugin timeout environment override") {
  {
    EnvGuard env(nullptr);
    CHECK(default_plugin_timeout() == std::chrono::milliseconds(10000));
  }
  {
    EnvGuard env("250");
    CHECK(default_plugin_timeout() == std::chrono::milliseconds(250));
  }
  {
    EnvGuard env("soon");
    CHECK_THROWS_AS(default_plugin_timeout(), ConfigError);
  }
}
