#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "synthloc/features/features.hpp"
#include "synthloc/features/plugin.hpp"

namespace synthloc {

// `source` is the image's file when it has one; plugin providers write a
// temporary PNG otherwise. Implementations are safe to call concurrently.
class GlobalProvider {
 public:
  virtual ~GlobalProvider() = default;
  virtual std::string id() const = 0;
  virtual GlobalDescriptor describe(const RgbImage& img, const std::filesystem::path& source = {}) = 0;
};

class LocalProvider {
 public:
  virtual ~LocalProvider() = default;
  virtual std::string id() const = 0;
  virtual LocalFeatureSet detect(const RgbImage& img, const std::filesystem::path& source = {}) = 0;
  virtual MatchSet match(const LocalFeatureSet& query, const LocalFeatureSet& reference, double ratio) = 0;
};

struct ProviderConfig {
  std::string global = "builtin";  // "builtin" | "plugin:<command line>"
  std::string local = "builtin";
  std::string on_plugin_error = "fail";  // "fail" | "builtin": applies when a plugin cannot start
  int pool_size = 1;
  std::chrono::milliseconds timeout = default_plugin_timeout();
  DetectorOptions detector;
};

// Throws ConfigError for unknown provider specs; plugin start failures throw
// PluginError unless on_plugin_error = "builtin", which logs and substitutes.
std::unique_ptr<GlobalProvider> make_global_provider(const ProviderConfig& config);
std::unique_ptr<LocalProvider> make_local_provider(const ProviderConfig& config);

}  // namespace synthloc
