#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edgevit {

/// Base of every error thrown by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& m) : Error("unsupported", m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

class MissingParameterError : public Error {
 public:
  explicit MissingParameterError(const std::string& name)
      : Error("missing_parameter", "missing parameter: " + name), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error("domain", m) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& m) : Error("argument", m) {}
};

class DetectionError : public Error {
 public:
  DetectionError(std::size_t found, std::size_t expected)
      : Error("detection", "expected " + std::to_string(expected) +
                               " regions, found " + std::to_string(found)),
        found_(found),
        expected_(expected) {}
  std::size_t found() const noexcept { return found_; }
  std::size_t expected() const noexcept { return expected_; }

 private:
  std::size_t found_;
  std::size_t expected_;
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& m) : Error("internal", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace edgevit
