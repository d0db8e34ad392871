#include <gtest/gtest.h>

#include <cmath>

#include "superlase/errors.hpp"
#include "superlase/solver.hpp"

using namespace superlase;

namespace {

void decay(std::span<const double> y, std::span<double> d) {
  d[0] = -0.5 * y[0];
  d[1] = -2.0 * y[1];
}

void oscillator(std::span<const double> y, std::span<double> d) {
  d[0] = y[1];
  d[1] = -y[0];
}

}  // namespace

TEST(Integrate, ExponentialDecayMatchesClosedForm) {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-14;
  const std::vector<double> y0{1.0, 3.0};
  const std::vector<double> ts{1.0, 2.5, 4.0};
  const auto tr = integrate(decay, y0, 4.0, cfg, ts);
  ASSERT_EQ(tr.samples.size(), 3u);
  for (const auto& s : tr.samples) {
    EXPECT_NEAR(s.y[0], std::exp(-0.5 * s.t), 1e-9);
    EXPECT_NEAR(s.y[1], 3.0 * std::exp(-2.0 * s.t), 1e-9);
  }
  EXPECT_DOUBLE_EQ(tr.samples[1].t, 2.5);
  EXPECT_GT(tr.accepted_steps, 0u);
}

TEST(Integrate, OscillatorConservesPhase) {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  cfg.max_step = 0.5;
  const std::vector<double> y0{1.0, 0.0};
  const auto tr = integrate(oscillator, y0, 20.0, cfg);
  EXPECT_NEAR(tr.samples.back().y[0], std::cos(20.0), 1e-7);
  EXPECT_NEAR(tr.samples.back().y[1], -std::sin(20.0), 1e-7);
}

TEST(Integrate, FixedStepIsFifthOrder) {
  // Halving the step must shrink the global error by roughly 2^5.
  auto err = [](double h) {
    IntegratorConfig cfg;
    cfg.fixed_step = h;
    cfg.max_step = h;
    const std::vector<double> y0{1.0, 0.0};
    const auto tr = integrate(oscillator, y0, 5.0, cfg);
    return std::abs(tr.samples.back().y[0] - std::cos(5.0));
  };
  const double ratio = err(0.04) / err(0.02);
  EXPECT_GT(ratio, 20.0);
  EXPECT_LT(ratio, 50.0);
}

TEST(Integrate, ObserverCanStop) {
  IntegratorConfig cfg;
  std::vector<double> y{1.0, 1.0};
  int calls = 0;
  const double t = integrate_observed(decay, y, 0.0, 100.0, cfg, [&](double, auto, auto) { return ++calls < 3; });
  EXPECT_EQ(calls, 3);
  EXPECT_LT(t, 100.0);
}

TEST(Integrate, RejectsBadInput) {
  IntegratorConfig cfg;
  const std::vector<double> y0{1.0, 1.0};
  EXPECT_THROW(integrate(decay, y0, -1.0, cfg), PreconditionError);
  const std::vector<double> bad_times{2.0, 1.0};
  EXPECT_THROW(integrate(decay, y0, 3.0, cfg, bad_times), PreconditionError);
  cfg.rel_tol = 0.0;
  EXPECT_THROW(integrate(decay, y0, 1.0, cfg), PreconditionError);
  cfg = {};
  const std::vector<double> nan_state{std::nan(""), 0.0};
  EXPECT_THROW(integrate(decay, nan_state, 1.0, cfg), IntegrationError);
}

TEST(Newton, SolvesNonlinearSystem) {
  // x^2 + y^2 = 4, x = y, root (sqrt2, sqrt2).
  auto f = [](std::span<const double> v, std::span<double> d) {
    d[0] = v[0] * v[0] + v[1] * v[1] - 4.0;
    d[1] = v[0] - v[1];
  };
  const std::vector<double> y0{1.0, 2.0};
  const auto r = newton_solve(f, y0, 1e-12, 30);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.y[0], std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(r.y[1], std::sqrt(2.0), 1e-10);
}

TEST(SteadyState, LinearRelaxation) {
  // y' = a - B y has the fixed point B^-1 a.
  auto f = [](std::span<const double> y, std::span<double> d) {
    d[0] = 1.0 - 0.3 * y[0] + 0.1 * y[1];
    d[1] = 2.0 - 0.05 * y[1];
  };
  const std::vector<double> y0{0.0, 0.0};
  for (bool polish : {false, true}) {
    IntegratorConfig cfg;
    cfg.newton_polish = polish;
    const auto ss = find_steady_state(f, y0, cfg);
    EXPECT_TRUE(ss.report.converged);
    EXPECT_NEAR(ss.state[1], 40.0, 1e-6);
    EXPECT_NEAR(ss.state[0], (1.0 + 4.0) / 0.3, 1e-6);
    EXPECT_LE(ss.report.final_residual, cfg.stall_threshold);
    EXPECT_FALSE(to_key_value(ss.report).empty());
  }
}

TEST(SteadyState, PersistentOscillationFails) {
  IntegratorConfig cfg;
  cfg.max_time = 200.0;
  cfg.newton_polish = false;
  const std::vector<double> y0{1.0, 0.0};
  try {
    find_steady_state(oscillator, y0, cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.last_state().size(), 2u);
    EXPECT_GE(e.time_reached(), 200.0 - 1e-9);
    EXPECT_GT(e.last_residual(), 0.1);
  }
}

TEST(SteadyState, ValidatorCanReject) {
  auto f = [](std::span<const double> y, std::span<double> d) { d[0] = -1.0 - y[0]; };
  const std::vector<double> y0{0.0};
  IntegratorConfig cfg;
  EXPECT_THROW(find_steady_state(f, y0, cfg,
                                 [](std::span<const double> y) { return y[0] < 0 ? "negative" : ""; }),
               ConvergenceError);
}
