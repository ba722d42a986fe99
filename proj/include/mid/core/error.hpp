#pragma once

#include <stdexcept>
#include <string>

namespace mid {

/// Raised when a caller violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or codec failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal contract (e.g. a model returned the wrong shape).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration rejected during validation. Carries every problem found.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mid
