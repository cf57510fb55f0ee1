#pragma once

#include <stdexcept>
#include <string>

namespace deepfd {

// Base of every error the library throws. Subclasses mirror the failure
// categories callers are expected to branch on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Optimizer or graph used in an invalid state (e.g. stepping without grads).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint failed validation. `check()` names the failed check
// ("magic", "version", "crc", "truncated", "layout").
class CorruptionError : public Error {
 public:
  CorruptionError(std::string check, const std::string& what)
      : Error(what), check_(std::move(check)) {}
  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

// Raised by the trainer when a loss becomes NaN or infinite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepfd
