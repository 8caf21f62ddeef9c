#include "synthloc/features/provider.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>
#include <unistd.h>

namespace synthloc {

namespace {

class BuiltinGlobal final : public GlobalProvider {
 public:
  std::string id() const override { return "builtin"; }
  GlobalDescriptor describe(const RgbImage& img, const std::filesystem::path&) override {
    return builtin_global_descriptor(img);
  }
};

class BuiltinLocal final : public LocalProvider {
 public:
  explicit BuiltinLocal(DetectorOptions options) : options_(options) {}
  std::string id() const override { return "builtin"; }
  LocalFeatureSet detect(const RgbImage& img, const std::filesystem::path&) override {
    return builtin_detect(img, options_);
  }
  MatchSet match(const LocalFeatureSet& q, const LocalFeatureSet& r, double ratio) override {
    return match_features(q, r, ratio);
  }

 private:
  DetectorOptions options_;
};

// Fixed-size set of plugin processes; dead ones are relaunched on checkout.
class PluginPool {
 public:
  PluginPool(std::string command, int size, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {
    for (int i = 0; i < std::max(size, 1); ++i) idle_.push_back(std::make_unique<PluginProcess>(command_, timeout_));
    info_ = idle_.front()->info();
  }
  const PluginInfo& info() const { return info_; }
  const std::string& command() const { return command_; }

  template <typename Fn>
  auto with_process(Fn&& fn) {
    std::unique_ptr<PluginProcess> p;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return !idle_.empty(); });
      p = std::move(idle_.back());
      idle_.pop_back();
    }
    struct Return {
      PluginPool* pool;
      std::unique_ptr<PluginProcess>* p;
      ~Return() {
        std::lock_guard lock(pool->mutex_);
        pool->idle_.push_back(std::move(*p));
        pool->cv_.notify_one();
      }
    } give_back{this, &p};
    if (!p || !p->alive()) p = std::make_unique<PluginProcess>(command_, timeout_);
    return fn(*p);
  }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  PluginInfo info_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<PluginProcess>> idle_;
};

// Path of the image on disk, writing a temporary PNG when it has none.
class ImageFile {
 public:
  ImageFile(const RgbImage& img, const std::filesystem::path& source) {
    if (!source.empty()) {
      path_ = source;
      return;
    }
    static std::atomic<unsigned long> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("synthloc_plugin_" + std::to_string(getpid()) + "_" + std::to_string(counter++) + ".png");
    write_rgb_png(path_, img);
    owned_ = true;
  }
  ~ImageFile() {
    std::error_code ec;
    if (owned_) std::filesystem::remove(path_, ec);
  }
  std::string str() const { return std::filesystem::absolute(path_).string(); }

 private:
  std::filesystem::path path_;
  bool owned_ = false;
};

std::vector<float> float_array(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw PluginError(PluginError::Reason::kProtocol, std::string("plugin ") + what + " is not an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw PluginError(PluginError::Reason::kProtocol, std::string("plugin ") + what + " has a non-number");
    out.push_back(v.get<float>());
  }
  return out;
}

class PluginGlobal final : public GlobalProvider {
 public:
  explicit PluginGlobal(std::unique_ptr<PluginPool> pool) : pool_(std::move(pool)) {
    if (!pool_->info().has("global_descriptor")) {
      throw PluginError(PluginError::Reason::kStart, "plugin '" + pool_->command() + "' has no global_descriptor");
    }
  }
  std::string id() const override { return "plugin:" + pool_->info().name; }
  GlobalDescriptor describe(const RgbImage& img, const std::filesystem::path& source) override {
    const ImageFile file(img, source);
    const auto resp = pool_->with_process(
        [&](PluginProcess& p) { return p.call({{"op", "global_descriptor"}, {"image_path", file.str()}}); });
    if (!resp.contains("descriptor")) throw PluginError(PluginError::Reason::kProtocol, "reply lacks 'descriptor'");
    GlobalDescriptor d{float_array(resp["descriptor"], "descriptor"), id()};
    const int expected = pool_->info().descriptor_len;
    if (expected > 0 && static_cast<int>(d.values.size()) != expected) {
      throw PluginError(PluginError::Reason::kProtocol, "plugin descriptor has length " +
                                                            std::to_string(d.values.size()) + ", advertised " +
                                                            std::to_string(expected));
    }
    normalize_descriptor(d.values);
    return d;
  }

 private:
  std::unique_ptr<PluginPool> pool_;
};

nlohmann::json features_to_json(const LocalFeatureSet& f) {
  nlohmann::json kps = nlohmann::json::array(), desc = nlohmann::json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    kps.push_back({f.keypoints[i].x(), f.keypoints[i].y()});
    desc.push_back(std::vector<float>(f.real.begin() + i * f.dim, f.real.begin() + (i + 1) * f.dim));
  }
  return {{"keypoints", kps}, {"scores", f.scores}, {"descriptors", desc}};
}

class PluginLocal final : public LocalProvider {
 public:
  PluginLocal(std::unique_ptr<PluginPool> pool, int max_features)
      : pool_(std::move(pool)), max_features_(max_features) {
    if (!pool_->info().has("detect")) {
      throw PluginError(PluginError::Reason::kStart, "plugin '" + pool_->command() + "' has no detect");
    }
  }
  std::string id() const override { return "plugin:" + pool_->info().name; }

  LocalFeatureSet detect(const RgbImage& img, const std::filesystem::path& source) override {
    const ImageFile file(img, source);
    const auto resp = pool_->with_process([&](PluginProcess& p) {
      return p.call({{"op", "detect"}, {"image_path", file.str()}, {"max", max_features_}});
    });
    LocalFeatureSet f;
    f.kind = DescriptorKind::kFloat;
    f.provider = id();
    try {
      const auto& kps = resp.at("keypoints");
      const auto& desc = resp.at("descriptors");
      f.scores = float_array(resp.at("scores"), "scores");
      if (kps.size() != desc.size() || kps.size() != f.scores.size()) {
        throw PluginError(PluginError::Reason::kProtocol, "plugin feature arrays differ in length");
      }
      f.dim = kps.empty() ? 0 : static_cast<int>(desc[0].size());
      for (std::size_t i = 0; i < kps.size(); ++i) {
        const Eigen::Vector2d k(kps[i].at(0).get<double>(), kps[i].at(1).get<double>());
        if (!(k.x() >= 0.0 && k.y() >= 0.0 && k.x() <= img.width() && k.y() <= img.height())) {
          throw PluginError(PluginError::Reason::kProtocol, "plugin keypoint outside the image");
        }
        const auto d = float_array(desc[i], "descriptor");
        if (static_cast<int>(d.size()) != f.dim) {
          throw PluginError(PluginError::Reason::kProtocol, "plugin descriptors differ in length");
        }
        f.keypoints.push_back(k);
        f.real.insert(f.real.end(), d.begin(), d.end());
        f.scores[i] = std::clamp(f.scores[i], 0.0f, 1.0f);
      }
    } catch (const nlohmann::json::exception& e) {
      throw PluginError(PluginError::Reason::kProtocol, std::string("bad detect reply: ") + e.what());
    }
    return f;
  }

  MatchSet match(const LocalFeatureSet& q, const LocalFeatureSet& r, double ratio) override {
    if (!pool_->info().has("match")) return match_features(q, r, ratio);
    const auto resp = pool_->with_process([&](PluginProcess& p) {
      return p.call({{"op", "match"}, {"features_a", features_to_json(q)}, {"features_b", features_to_json(r)}});
    });
    MatchSet out;
    std::set<int> seen;
    try {
      for (const auto& m : resp.at("matches")) {
        const int a = m.at(0).get<int>(), b = m.at(1).get<int>();
        const double w = m.at(2).get<double>();
        if (a < 0 || b < 0 || a >= static_cast<int>(q.size()) || b >= static_cast<int>(r.size())) {
          throw PluginError(PluginError::Reason::kProtocol, "plugin match index out of range");
        }
        if (!seen.insert(a).second) throw PluginError(PluginError::Reason::kProtocol, "plugin matched a query twice");
        out.pairs.push_back({a, b, std::clamp(w, 0.0, 1.0)});
      }
    } catch (const nlohmann::json::exception& e) {
      throw PluginError(PluginError::Reason::kProtocol, std::string("bad match reply: ") + e.what());
    }
    return out;
  }

 private:
  std::unique_ptr<PluginPool> pool_;
  int max_features_;
};

std::string plugin_command(const std::string& spec) {
  constexpr std::string_view prefix = "plugin:";
  if (spec.rfind(prefix, 0) != 0) throw ConfigError("unknown provider '" + spec + "' (use builtin or plugin:<command>)");
  std::string cmd = spec.substr(prefix.size());
  if (cmd.empty()) throw ConfigError("plugin provider needs a command line");
  return cmd;
}

void check_policy(const ProviderConfig& c) {
  if (c.on_plugin_error != "fail" && c.on_plugin_error != "builtin") {
    throw ConfigError("on_plugin_error must be 'fail' or 'builtin', got '" + c.on_plugin_error + "'");
  }
}

}  // namespace

std::unique_ptr<GlobalProvider> make_global_provider(const ProviderConfig& config) {
  check_policy(config);
  if (config.global == "builtin") return std::make_unique<BuiltinGlobal>();
  const std::string cmd = plugin_command(config.global);
  try {
    return std::make_unique<PluginGlobal>(std::make_unique<PluginPool>(cmd, config.pool_size, config.timeout));
  } catch (const PluginError& e) {
    if (config.on_plugin_error != "builtin") throw;
    spdlog::warn("global descriptor plugin unavailable ({}); using the built-in provider", e.what());
    return std::make_unique<BuiltinGlobal>();
  }
}

std::unique_ptr<LocalProvider> make_local_provider(const ProviderConfig& config) {
  check_policy(config);
  if (config.local == "builtin") return std::make_unique<BuiltinLocal>(config.detector);
  const std::string cmd = plugin_command(config.local);
  try {
    return std::make_unique<PluginLocal>(std::make_unique<PluginPool>(cmd, config.pool_size, config.timeout),
                                         config.detector.max_features);
  } catch (const PluginError& e) {
    if (config.on_plugin_error != "builtin") throw;
    spdlog::warn("local feature plugin unavailable ({}); using the built-in provider", e.what());
    return std::make_unique<BuiltinLocal>(config.detector);
  }
}

}  // namespace synthloc
