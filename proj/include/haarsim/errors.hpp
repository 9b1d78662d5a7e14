#pragma once

#include <stdexcept>
#include <string>

namespace haarsim {

/// Argument outside the mathematical domain of an operation (index, point, shape).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure did not reach its target accuracy.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

/// The per-step linear system could not be assembled (e.g. fully degenerate conductivities).
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time step failed; carries the step index at which it happened.
class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Malformed run configuration. `line` is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0, std::string key = {})
      : std::runtime_error(what), line_(line), key_(std::move(key)) {}
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

}  // namespace haarsim
