#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace semcodec {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter combination (window/hop, strides, presets, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what), violations_{what} {}
  explicit ConfigError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// A loss component evaluated to NaN or Inf.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& component, double value, const std::string& note = "");
  const std::string& component() const { return component_; }
  double value() const { return value_; }

 private:
  std::string component_;
  double value_;
};

class CheckpointVersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace semcodec
