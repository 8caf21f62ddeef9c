#include "synthloc/features/plugin.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace synthloc {

bool PluginInfo::has(const std::string& capability) const {
  return std::find(capabilities.begin(), capabilities.end(), capability) != capabilities.end();
}

std::chrono::milliseconds default_plugin_timeout() {
  if (const char* env = std::getenv("SYNTHLOC_PLUGIN_TIMEOUT_MS")) {
    char* end = nullptr;
    const long ms = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && ms > 0) return std::chrono::milliseconds(ms);
    throw ConfigError(std::string("SYNTHLOC_PLUGIN_TIMEOUT_MS must be a positive integer, got '") + env + "'");
  }
  return std::chrono::milliseconds(10000);
}

PluginProcess::PluginProcess(const std::string& command, std::chrono::milliseconds timeout) : timeout_(timeout) {
  // A plugin dying mid-write must surface as an error, not kill the host.
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

  int in[2], out[2];
  if (pipe2(in, O_CLOEXEC) != 0) throw PluginError(PluginError::Reason::kStart, "pipe failed");
  if (pipe2(out, O_CLOEXEC) != 0) {
    close(in[0]);
    close(in[1]);
    throw PluginError(PluginError::Reason::kStart, "pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in[0]);
  close(out[1]);
  if (rc != 0) {
    close(in[1]);
    close(out[0]);
    throw PluginError(PluginError::Reason::kStart, "cannot launch plugin '" + command + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in[1];
  from_child_ = out[0];

  try {
    const nlohmann::json hello = call({{"op", "hello"}, {"protocol", 1}});
    info_.name = hello.at("name").get<std::string>();
    info_.protocol = hello.value("protocol", 1);
    info_.descriptor_len = hello.value("descriptor_len", 0);
    info_.capabilities = hello.value("capabilities", std::vector<std::string>{});
  } catch (const PluginError& e) {
    terminate();
    throw PluginError(PluginError::Reason::kStart, "plugin '" + command + "' failed the handshake: " + e.what());
  } catch (const nlohmann::json::exception& e) {
    terminate();
    throw PluginError(PluginError::Reason::kStart, "plugin '" + command + "' sent a bad hello: " + e.what());
  }
  if (info_.protocol != 1) {
    terminate();
    throw PluginError(PluginError::Reason::kStart, "plugin speaks protocol " + std::to_string(info_.protocol));
  }
}

PluginProcess::~PluginProcess() { terminate(); }

void PluginProcess::terminate() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin asks the plugin to exit; give it a moment, then kill.
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(5000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string PluginProcess::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      terminate();
      throw PluginError(PluginError::Reason::kTimeout,
                        "plugin did not answer within " + std::to_string(timeout_.count()) + " ms");
    }
    pollfd p{from_child_, POLLIN, 0};
    const int r = poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) continue;
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      terminate();
      throw PluginError(PluginError::Reason::kExited, "plugin closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string PluginProcess::call_raw(const nlohmann::json& request) {
  if (pid_ <= 0) throw PluginError(PluginError::Reason::kExited, "plugin is not running");
  const std::string line = request.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      terminate();
      throw PluginError(PluginError::Reason::kExited, "plugin closed its input");
    }
    sent += static_cast<std::size_t>(n);
  }
  return read_line();
}

nlohmann::json PluginProcess::call(const nlohmann::json& request) {
  const std::string line = call_raw(request);
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw PluginError(PluginError::Reason::kProtocol, "plugin sent malformed JSON: " + line.substr(0, 80));
  }
  if (!response.is_object()) throw PluginError(PluginError::Reason::kProtocol, "plugin response is not an object");
  if (response.contains("error")) {
    throw PluginError(PluginError::Reason::kRemote, "plugin error: " + response["error"].dump());
  }
  return response;
}

}  // namespace synthloc
