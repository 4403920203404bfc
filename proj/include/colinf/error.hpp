#pragma once

#include <stdexcept>
#include <string>

namespace colinf {

enum class ErrorKind {
  shape,
  domain,
  state,
  training,
  config,
  io,
  parse,
};

const char* to_string(ErrorKind kind);

/// Base for every error the library throws. `kind()` is stable and is what
/// the command line reports in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};
struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& what) : Error(ErrorKind::training, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

}  // namespace colinf
