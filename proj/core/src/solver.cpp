#include "superlase/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "superlase/errors.hpp"

namespace superlase {

namespace {

// Dormand-Prince 5(4) tableau (autonomous form, so the nodes c_i are not needed).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Workspace {
  explicit Workspace(std::size_t n)
      : k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n) {}
  std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp, y5;
};

// One Dormand-Prince step from y with derivative ws.k1. Leaves the 5th-order
// solution in ws.y5, f(y5) in ws.k7 and returns the weighted RMS error.
double dopri_step(const RhsFunction& f, std::span<const double> y, double h, Workspace& ws,
                  const IntegratorConfig& cfg) {
  const std::size_t n = y.size();
  auto& t = ws.tmp;
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] + h * a21 * ws.k1[i];
  f(t, ws.k2);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] + h * (a31 * ws.k1[i] + a32 * ws.k2[i]);
  f(t, ws.k3);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] + h * (a41 * ws.k1[i] + a42 * ws.k2[i] + a43 * ws.k3[i]);
  f(t, ws.k4);
  for (std::size_t i = 0; i < n; ++i)
    t[i] = y[i] + h * (a51 * ws.k1[i] + a52 * ws.k2[i] + a53 * ws.k3[i] + a54 * ws.k4[i]);
  f(t, ws.k5);
  for (std::size_t i = 0; i < n; ++i)
    t[i] = y[i] + h * (a61 * ws.k1[i] + a62 * ws.k2[i] + a63 * ws.k3[i] + a64 * ws.k4[i] + a65 * ws.k5[i]);
  f(t, ws.k6);
  for (std::size_t i = 0; i < n; ++i)
    ws.y5[i] = y[i] + h * (a71 * ws.k1[i] + a73 * ws.k3[i] + a74 * ws.k4[i] + a75 * ws.k5[i] + a76 * ws.k6[i]);
  f(ws.y5, ws.k7);

  double err2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = h * (e1 * ws.k1[i] + e3 * ws.k3[i] + e4 * ws.k4[i] + e5 * ws.k5[i] + e6 * ws.k6[i] +
                          e7 * ws.k7[i]);
    const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ws.y5[i]));
    err2 += (e / sc) * (e / sc);
  }
  return std::sqrt(err2 / static_cast<double>(std::max<std::size_t>(n, 1)));
}

double initial_step(std::span<const double> y, std::span<const double> dydt, const IntegratorConfig& cfg) {
  if (cfg.initial_step > 0.0) return cfg.initial_step;
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    d1 += (dydt[i] / sc) * (dydt[i] / sc);
  }
  d0 = std::sqrt(d0 / static_cast<double>(y.size()));
  d1 = std::sqrt(d1 / static_cast<double>(y.size()));
  const double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  return std::min(h, cfg.max_step);
}

}  // namespace

void IntegratorConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(rel_tol) || !positive(abs_tol) || rel_tol > 1e-2 || abs_tol > 1e-2)
    throw PreconditionError("integrator tolerances must lie in (0, 1e-2]");
  if (!positive(max_step) || !positive(max_time) || !positive(stall_window) || !positive(stall_threshold))
    throw PreconditionError("max_step, max_time, stall_window and stall_threshold must be positive");
  if (fixed_step < 0.0 || initial_step < 0.0) throw PreconditionError("step sizes must be >= 0");
  if (!(newton_trigger >= 0.0) || !(newton_retry_interval > 0.0) || newton_max_iterations < 0)
    throw PreconditionError("invalid Newton settings");
}

double scaled_residual(std::span<const double> y, std::span<const double> dydt) {
  return inf_norm(dydt) / std::max(inf_norm(y), std::numeric_limits<double>::min());
}

double integrate_observed(const RhsFunction& f, std::vector<double>& y, double t0, double t_end,
                          const IntegratorConfig& cfg, const StepObserver& observer, Trajectory* stats) {
  cfg.validate();
  const std::size_t n = y.size();
  Workspace ws(n);
  f(y, ws.k1);
  std::size_t evals = 1;
  if (!all_finite(y) || !all_finite(ws.k1)) throw IntegrationError("non-finite initial state", t0);

  double t = t0;
  const bool fixed = cfg.fixed_step > 0.0;
  double h = fixed ? cfg.fixed_step : initial_step(y, ws.k1, cfg);
  std::size_t accepted = 0, rejected = 0;

  while (t < t_end) {
    const double remaining = t_end - t;
    double step = std::min({h, cfg.max_step, remaining});
    const bool last = step >= remaining;
    if (last) step = remaining;

    const double err = dopri_step(f, y, step, ws, cfg);
    evals += 6;
    if (fixed || err <= 1.0) {
      if (!all_finite(ws.y5) || !all_finite(ws.k7)) {
        std::ostringstream msg;
        msg << "state became non-finite at t = " << t + step;
        throw IntegrationError(msg.str(), t);
      }
      t = last ? t_end : t + step;
      y.swap(ws.y5);
      ws.k1.swap(ws.k7);
      ++accepted;
      if (!fixed && !last) {
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h = step * factor;
      }
      if (observer && !observer(t, y, ws.k1)) break;
    } else {
      ++rejected;
      h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream msg;
        msg << "step size underflow at t = " << t << " (problem too stiff for the requested tolerance)";
        throw IntegrationError(msg.str(), t);
      }
    }
  }
  if (stats) {
    stats->accepted_steps += accepted;
    stats->rejected_steps += rejected;
    stats->rhs_evaluations += evals;
  }
  return t;
}

Trajectory integrate(const RhsFunction& f, std::span<const double> y0, double t_end, const IntegratorConfig& cfg,
                     std::span<const double> sample_times) {
  if (!(t_end >= 0.0)) throw PreconditionError("t_end must be >= 0");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (sample_times[i] < 0.0 || sample_times[i] > t_end || (i > 0 && sample_times[i] <= sample_times[i - 1]))
      throw PreconditionError("sample times must be increasing and inside [0, t_end]");
  }
  Trajectory traj;
  std::vector<double> y(y0.begin(), y0.end());
  {
    // Dimension check even when t_end == 0.
    std::vector<double> probe(y.size());
    f(y, probe);
  }
  double t = 0.0;
  std::size_t next = 0;
  if (sample_times.empty()) {
    traj.samples.push_back({0.0, y});
  } else if (sample_times[0] == 0.0) {
    traj.samples.push_back({0.0, y});
    ++next;
  }
  // Segments between consecutive sample times keep the step sequence
  // independent of anything but the configuration and the sample grid.
  IntegratorConfig seg_cfg = cfg;
  while (t < t_end) {
    const double target = next < sample_times.size() ? sample_times[next] : t_end;
    if (target > t) t = integrate_observed(f, y, t, target, seg_cfg, {}, &traj);
    if (next < sample_times.size()) {
      traj.samples.push_back({t, y});
      ++next;
    } else {
      break;
    }
  }
  if (sample_times.empty()) traj.samples.push_back({t, y});
  return traj;
}

NewtonResult newton_solve(const RhsFunction& f, std::span<const double> y0, double target, int max_iterations) {
  const std::size_t n = y0.size();
  NewtonResult out;
  out.y.assign(y0.begin(), y0.end());
  std::vector<double> fy(n), fp(n), fm(n), trial(n), ftrial(n);
  f(out.y, fy);
  out.residual = scaled_residual(out.y, fy);
  if (out.residual <= target) {
    out.converged = true;
    return out;
  }

  // Blocked LU from Eigen: the Jacobian of a 31-cluster model is ~1000 x 1000.
  Eigen::MatrixXd jac(n, n);
  std::vector<double> probe(n);
  for (int it = 0; it < max_iterations; ++it) {
    const double ynorm = inf_norm(out.y);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max({std::abs(out.y[j]), 1e-3 * ynorm, 1e-12});
      probe = out.y;
      probe[j] = out.y[j] + h;
      f(probe, fp);
      probe[j] = out.y[j] - h;
      f(probe, fm);
      for (std::size_t i = 0; i < n; ++i)
        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2.0 * h);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const Eigen::VectorXd step = lu.solve(-Eigen::Map<const Eigen::VectorXd>(fy.data(), static_cast<Eigen::Index>(n)));
    if (!step.allFinite()) return out;
    const std::vector<double> delta(step.data(), step.data() + n);

    const double fnorm = inf_norm(fy);
    double lambda = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 12; ++halving, lambda *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = out.y[i] + lambda * delta[i];
      f(trial, ftrial);
      if (all_finite(ftrial) && inf_norm(ftrial) < (1.0 - 1e-4 * lambda) * fnorm) {
        improved = true;
        break;
      }
    }
    out.iterations = it + 1;
    if (!improved) break;
    out.y.swap(trial);
    fy.swap(ftrial);
    out.residual = scaled_residual(out.y, fy);
    if (out.residual <= target) {
      out.converged = true;
      break;
    }
  }
  return out;
}

SteadyState find_steady_state(const RhsFunction& f, std::span<const double> y0, const IntegratorConfig& cfg,
                              const StateValidator& accept) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const double thr = cfg.stall_threshold;
  const double newton_target = 1e-3 * thr;

  SteadyState result;
  std::vector<double> y(y0.begin(), y0.end());
  Trajectory stats;
  double below_since = -1.0;
  double last_newton = -std::numeric_limits<double>::infinity();
  double last_residual = std::numeric_limits<double>::infinity();
  bool stalled = false;
  bool newton_done = false;
  int newton_iterations = 0;
  std::vector<double> newton_state;

  auto valid = [&](std::span<const double> s) { return !accept || accept(s).empty(); };

  auto observer = [&](double t, std::span<const double> ys, std::span<const double> dy) {
    last_residual = scaled_residual(ys, dy);
    if (last_residual < thr) {
      if (below_since < 0.0) below_since = t;
      if (t - below_since >= cfg.stall_window) {
        stalled = true;
        return false;
      }
    } else {
      below_since = -1.0;
    }
    if (cfg.newton_polish && last_residual < cfg.newton_trigger && t - last_newton >= cfg.newton_retry_interval) {
      last_newton = t;
      auto nr = newton_solve(f, ys, newton_target, cfg.newton_max_iterations);
      newton_iterations += nr.iterations;
      if (nr.residual <= thr && valid(nr.y)) {
        newton_state = std::move(nr.y);
        last_residual = nr.residual;
        newton_done = true;
        return false;
      }
    }
    return true;
  };

  // A zero-derivative start is already stationary.
  {
    std::vector<double> dy(y.size());
    f(y, dy);
    last_residual = scaled_residual(y, dy);
  }
  double t = 0.0;
  if (last_residual == 0.0) {
    stalled = true;
  } else {
    t = integrate_observed(f, y, 0.0, cfg.max_time, cfg, observer, &stats);
  }

  if (newton_done) {
    result.state = std::move(newton_state);
    result.report.method = "integration+newton";
  } else if (stalled) {
    result.state = y;
    result.report.method = "integration";
    if (cfg.newton_polish && last_residual > 0.0) {
      auto nr = newton_solve(f, y, newton_target, cfg.newton_max_iterations);
      newton_iterations += nr.iterations;
      if (nr.residual <= last_residual && valid(nr.y)) {
        result.state = std::move(nr.y);
        last_residual = nr.residual;
        result.report.method = "integration+newton";
      }
    }
  } else {
    std::ostringstream msg;
    msg << "no steady state within t = " << cfg.max_time << " (last scaled residual " << last_residual << ")";
    throw ConvergenceError(msg.str(), std::move(y), t, last_residual);
  }

  if (accept) {
    const auto why = accept(result.state);
    if (!why.empty()) throw ConvergenceError("steady state rejected: " + why, result.state, t, last_residual);
  }

  result.report.converged = true;
  result.report.steps = stats.accepted_steps;
  result.report.rhs_evaluations = stats.rhs_evaluations;
  result.report.newton_iterations = newton_iterations;
  result.report.final_residual = last_residual;
  result.report.simulated_time = t;
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string to_key_value(const SteadyStateReport& r) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "converged=" << (r.converged ? "true" : "false") << '\n'
     << "method=" << r.method << '\n'
     << "iterations=" << r.steps << '\n'
     << "rhs_evaluations=" << r.rhs_evaluations << '\n'
     << "newton_iterations=" << r.newton_iterations << '\n'
     << "final_residual=" << r.final_residual << '\n'
     << "simulated_time=" << r.simulated_time << '\n'
     << "wall_time=" << r.wall_seconds << '\n';
  return os.str();
}

}  // namespace superlase
