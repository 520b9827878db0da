#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajad {

// Base of every error raised by the library. Each subclass maps onto one CLI
// exit code (see tools/trajad_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config error in '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Raised when an unsupervised trainer receives labelled anomalies, or a
// normals-only baseline receives anomalies.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DependencyError : public Error {
 public:
  DependencyError(const std::string& stage, const std::string& what)
      : Error("missing upstream artifact (run '" + stage + "' first): " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace trajad
