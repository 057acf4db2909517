#ifndef MQSTAT_ERRORS_HPP
#define MQSTAT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mqstat {

/// Argument outside the domain of a function, e.g. a quantile level not in (0,1).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Model parameter outside its admissible set (rho outside [-1,1], negative rate, ...).
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
public:
  explicit DimensionMismatch(const std::string &what)
      : std::invalid_argument("dimension mismatch: " + what) {}
};

/// A function evaluation produced a non-finite value or failed. `index` is the
/// offending row / grid index when one is known.
class EvaluationError : public std::runtime_error {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit EvaluationError(const std::string &what, std::size_t index = npos)
      : std::runtime_error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

/// Numerical refinement that does not settle. Carries the sequence of
/// estimates that led to the verdict.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string &what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<double> &trace() const noexcept { return trace_; }

private:
  std::vector<double> trace_;
};

/// Bad configuration or input file content.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace mqstat

#endif // MQSTAT_ERRORS_HPP
