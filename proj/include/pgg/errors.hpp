#pragma once

#include <stdexcept>
#include <string>

namespace pgg {

/// Malformed caller input: wrong vector length, vertex out of range, bad edge.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value outside its admissible range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated (e.g. stepping with a blocked vertex).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Filesystem or parse failure; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pgg
