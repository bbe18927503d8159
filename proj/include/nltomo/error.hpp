#pragma once

#include <stdexcept>
#include <string>

namespace nltomo {

// Base class for every failure raised by the library. `kind()` is a short
// machine-readable tag used by the CLI when emitting error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain", w) {}
};

struct SingularityError : Error {
  explicit SingularityError(const std::string& w) : Error("singularity", w) {}
};

struct InvalidCurveError : Error {
  explicit InvalidCurveError(const std::string& w) : Error("invalid_curve", w) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error("solver", w) {}
};

struct OutOfBranchError : Error {
  OutOfBranchError(const std::string& w, double attainable)
      : Error("out_of_branch", w), attainable_max(attainable) {}
  double attainable_max;
};

struct HypothesisError : Error {
  explicit HypothesisError(const std::string& w) : Error("hypothesis", w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};

}  // namespace nltomo
