#pragma once

#include <stdexcept>
#include <string>

namespace soaptail {

// Base for every error raised by the library. The CLI maps subclasses to
// exit codes (see tools/soaptail_cli.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  InvalidParameter(std::string field, const std::string& what)
      : Error("invalid parameter '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class PastSupport : public Error {
 public:
  explicit PastSupport(double age)
      : Error("age " + std::to_string(age) + " is past the support (tail probability is 0)"),
        age_(age) {}
  double age() const { return age_; }

 private:
  double age_;
};

class Inconclusive : public Error {
 public:
  Inconclusive(const std::string& what, double margin)
      : Error(what + " (margin " + std::to_string(margin) + ")"), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

class BracketFailure : public Error {
 public:
  using Error::Error;
};

class UnboundedResidual : public Error {
 public:
  using Error::Error;
};

class NoValidAge : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class UnstableConfig : public Error {
 public:
  using Error::Error;
};

class ClassMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace soaptail
