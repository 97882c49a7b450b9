#pragma once

#include <stdexcept>
#include <string>

namespace dotdiscord {

// Base of every error thrown by the library. Callers that only need a
// message can catch this; the CLI maps the concrete types to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidWeight : public Error {
 public:
  using Error::Error;
};

class InvalidCoherence : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class NonHermitianInput : public Error {
 public:
  using Error::Error;
};

class EigenSolverFailure : public Error {
 public:
  using Error::Error;
};

// Thrown when adaptive quadrature exhausts its panel budget. Carries the
// best estimate and its error bound so callers can decide what to do.
class QuadratureNotConverged : public Error {
 public:
  QuadratureNotConverged(const std::string& what, double estimate,
                         double error_bound, double at_time = -1.0)
      : Error(what),
        estimate_(estimate),
        error_bound_(error_bound),
        at_time_(at_time) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }
  // Time point (ps) at which the failure occurred, negative if not tied to one.
  double at_time() const noexcept { return at_time_; }

 private:
  double estimate_;
  double error_bound_;
  double at_time_;
};

class ConfigParseError : public Error {
 public:
  ConfigParseError(const std::string& field, const std::string& message,
                   int line = -1)
      : Error(format(field, message, line)), field_(field), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field,
                            const std::string& message, int line) {
    std::string out = "config error";
    if (line >= 0) out += " (line " + std::to_string(line) + ")";
    if (!field.empty()) out += " in '" + field + "'";
    return out + ": " + message;
  }

  std::string field_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dotdiscord
