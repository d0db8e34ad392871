#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace superlase {

/// Autonomous right-hand side: fills dydt = f(y).
using RhsFunction = std::function<void(std::span<const double> y, std::span<double> dydt)>;

/// Called after every accepted step with the new state and f(new state).
/// Returning false stops the integration.
using StepObserver = std::function<bool(double t, std::span<const double> y, std::span<const double> dydt)>;

/// Extra acceptance test for a candidate steady state. Returns an empty
/// string on success, otherwise a reason.
using StateValidator = std::function<std::string(std::span<const double> y)>;

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 5.0;           // 1/kappa
  double max_time = 2e5;           // 1/kappa
  double stall_window = 50.0;      // 1/kappa
  double stall_threshold = 1e-9;   // on ||f(y)||_inf / ||y||_inf
  double initial_step = 0.0;       // 0 picks one automatically
  double fixed_step = 0.0;         // > 0 switches error control off
  bool newton_polish = true;
  double newton_trigger = 1e-5;    // try Newton early once the residual drops below this
  double newton_retry_interval = 500.0;
  int newton_max_iterations = 20;

  void validate() const;
};

struct Sample {
  double t = 0.0;
  std::vector<double> y;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
};

/// Dormand-Prince 5(4) with error control on atol + rtol * |y|.
/// Samples are taken exactly at `sample_times` (steps are clipped to land on
/// them); with no sample times only the initial and final states are kept.
Trajectory integrate(const RhsFunction& f, std::span<const double> y0, double t_end,
                     const IntegratorConfig& cfg, std::span<const double> sample_times = {});

/// Lower-level entry point: advances `y` in place from t0 towards t_end,
/// invoking `observer` after each accepted step. Returns the time reached.
double integrate_observed(const RhsFunction& f, std::vector<double>& y, double t0, double t_end,
                          const IntegratorConfig& cfg, const StepObserver& observer,
                          Trajectory* stats = nullptr);

/// ||f(y)||_inf / max(||y||_inf, tiny).
double scaled_residual(std::span<const double> y, std::span<const double> dydt);

struct NewtonResult {
  std::vector<double> y;
  double residual = 0.0;  // scaled
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton on f(y) = 0 with a central finite-difference Jacobian
/// (relative step 1e-6). Stops when the scaled residual reaches `target`.
NewtonResult newton_solve(const RhsFunction& f, std::span<const double> y0, double target, int max_iterations);

struct SteadyStateReport {
  bool converged = false;
  std::string method;            // "integration" or "integration+newton"
  std::size_t steps = 0;
  std::size_t rhs_evaluations = 0;
  int newton_iterations = 0;
  double final_residual = 0.0;
  double simulated_time = 0.0;
  double wall_seconds = 0.0;
};

struct SteadyState {
  std::vector<double> state;
  SteadyStateReport report;
};

/// Integrates until the scaled residual stays below cfg.stall_threshold for
/// cfg.stall_window, optionally short-cutting or polishing with Newton.
/// Throws ConvergenceError (carrying the last state) when cfg.max_time runs out.
SteadyState find_steady_state(const RhsFunction& f, std::span<const double> y0, const IntegratorConfig& cfg,
                              const StateValidator& accept = {});

/// "key=value" lines.
std::string to_key_value(const SteadyStateReport& r);

}  // namespace superlase
