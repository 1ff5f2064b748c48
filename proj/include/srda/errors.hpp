#pragma once

#include <stdexcept>
#include <string>

namespace srda {

/// Array shapes, spatial sizes or class counts that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside the domain an operation accepts (non-simplex map, negative weight, ...).
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent run configuration or a checkpoint that does not match the requested architecture.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, unreadable or corrupt files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace srda
