#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace superlase {

/// Raised when an input violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Time integration could not proceed (step underflow or non-finite state).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time_reached)
      : std::runtime_error(what), time_reached_(time_reached) {}

  double time_reached() const noexcept { return time_reached_; }

 private:
  double time_reached_;
};

/// Steady-state search ran out of simulated time. Carries the last state so
/// callers can inspect it (persistent oscillation is one possible cause).
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_state,
                   double time_reached, double last_residual)
      : std::runtime_error(what),
        last_state_(std::move(last_state)),
        time_reached_(time_reached),
        last_residual_(last_residual) {}

  const std::vector<double>& last_state() const noexcept { return last_state_; }
  double time_reached() const noexcept { return time_reached_; }
  double last_residual() const noexcept { return last_residual_; }

 private:
  std::vector<double> last_state_;
  double time_reached_;
  double last_residual_;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double pivot)
      : std::runtime_error(what), pivot_(pivot) {}

  double pivot() const noexcept { return pivot_; }

 private:
  double pivot_;
};

/// The spectrum has no single dominant peak, so linewidth and lineshift are
/// undefined.
class MultimodalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace superlase
