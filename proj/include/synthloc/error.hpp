#pragma once

#include <stdexcept>
#include <string>

namespace synthloc {

// Error kinds map onto CLI exit codes (config = 1, data = 2, runtime = 3).
enum class ErrorKind { kConfig, kData, kRuntime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

// Malformed or inconsistent input data (files, images, manifests).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

}  // namespace synthloc
