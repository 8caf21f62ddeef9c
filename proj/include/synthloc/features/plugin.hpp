#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthloc/error.hpp"

namespace synthloc {

class PluginError : public RuntimeFailure {
 public:
  enum class Reason { kStart, kTimeout, kProtocol, kExited, kRemote };
  PluginError(Reason reason, const std::string& what) : RuntimeFailure(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

struct PluginInfo {
  std::string name;
  int protocol = 0;
  int descriptor_len = 0;
  std::vector<std::string> capabilities;
  bool has(const std::string& capability) const;
};

// 10 s unless SYNTHLOC_PLUGIN_TIMEOUT_MS is set.
std::chrono::milliseconds default_plugin_timeout();

// One plugin process speaking newline-delimited JSON on its standard streams.
// The constructor launches `command` through /bin/sh and performs the hello
// handshake. One request may be outstanding at a time; the process's standard
// error is passed through.
class PluginProcess {
 public:
  explicit PluginProcess(const std::string& command,
                         std::chrono::milliseconds timeout = default_plugin_timeout());
  ~PluginProcess();
  PluginProcess(const PluginProcess&) = delete;
  PluginProcess& operator=(const PluginProcess&) = delete;

  const PluginInfo& info() const { return info_; }
  // Sends one request and returns the raw response line (without newline).
  std::string call_raw(const nlohmann::json& request);
  // Parsed response; {"error": ...} replies raise PluginError(kRemote).
  nlohmann::json call(const nlohmann::json& request);
  bool alive() const { return pid_ > 0; }

 private:
  void terminate();
  std::string read_line();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::chrono::milliseconds timeout_;
  PluginInfo info_;
};

}  // namespace synthloc
