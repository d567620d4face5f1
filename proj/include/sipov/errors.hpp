#pragma once

#include <stdexcept>
#include <string>

namespace sipov {

/// Invalid numeric argument to a model operation.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario document problem. `key()` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Broken internal invariant (disarmed timer fired, counter underflow, ...).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ClassificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Aborts a run; carries the simulated time of the failing event.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(double at, const std::string& what)
      : std::runtime_error("t=" + std::to_string(at) + ": " + what), at_(at) {}
  double at() const { return at_; }

 private:
  double at_;
};

}  // namespace sipov
