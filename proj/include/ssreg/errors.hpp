#pragma once

#include <stdexcept>
#include <string>

namespace ssreg {

// Error taxonomy shared across the library. Every throw site uses the most
// specific category so the CLI can surface a machine-readable error class.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* kind() const { return "error"; }
};

struct ConfigError : Error {
  using Error::Error;
  const char* kind() const override { return "configuration_error"; }
};

struct DataError : Error {
  using Error::Error;
  const char* kind() const override { return "data_error"; }
};

struct ParseError : Error {
  using Error::Error;
  const char* kind() const override { return "parse_error"; }
};

struct SolverError : Error {
  using Error::Error;
  const char* kind() const override { return "solver_error"; }
};

struct EstimandError : Error {
  using Error::Error;
  const char* kind() const override { return "estimand_error"; }
};

struct EstimationError : Error {
  using Error::Error;
  const char* kind() const override { return "estimation_error"; }
};

struct RankError : Error {
  using Error::Error;
  const char* kind() const override { return "rank_error"; }
};

struct RunError : Error {
  using Error::Error;
  const char* kind() const override { return "run_error"; }
};

}  // namespace ssreg
