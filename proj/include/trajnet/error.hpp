#pragma once

#include <stdexcept>
#include <string>

namespace trajnet {

/// Invalid argument or configuration value.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed, truncated or mismatched file contents.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Could not open, read or write a file.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during training or simulation (non-finite values).
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string &msg) {
    if (!ok) throw ConfigError(msg);
}

} // namespace trajnet
