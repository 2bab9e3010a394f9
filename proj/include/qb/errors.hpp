#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qb {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Objective returned a non-finite value or gradient.
class EvaluationError : public Error {
public:
  using Error::Error;
};

// Invalid configuration: bad parameters, mismatched statistic/bound, etc.
class ConfigError : public Error {
public:
  using Error::Error;
};

// A structural constant could not be certified on the requested box.
class CertificationError : public Error {
public:
  CertificationError(const std::string &what, std::vector<double> witness)
      : Error(what), witness_(std::move(witness)) {}
  const std::vector<double> &witness() const { return witness_; }

private:
  std::vector<double> witness_;
};

// Input outside the mathematical domain of an operation (e.g. log of a
// nonpositive value).
class DomainError : public Error {
public:
  using Error::Error;
};

// A step-size formula or bound is used outside its admissible regime.
// minimal_T is the smallest admissible horizon, or 0 when no horizon helps.
class RegimeError : public Error {
public:
  RegimeError(const std::string &what, std::int64_t minimal_T = 0)
      : Error(what), minimal_T_(minimal_T) {}
  std::int64_t minimal_T() const { return minimal_T_; }

private:
  std::int64_t minimal_T_;
};

// Iterates became non-finite or left the divergence radius.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string &what, std::int64_t step,
                  std::vector<double> last_finite)
      : Error(what), step_(step), last_finite_(std::move(last_finite)) {}
  std::int64_t step() const { return step_; }
  const std::vector<double> &last_finite() const { return last_finite_; }

private:
  std::int64_t step_;
  std::vector<double> last_finite_;
};

// An oracle stream position was reused within a run.
class DeterminismError : public Error {
public:
  using Error::Error;
};

// A stage of a two-phase method missed its intermediate target.
class StageFailure : public Error {
public:
  using Error::Error;
};

} // namespace qb
