#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "superlase/errors.hpp"
#include "superlase/experiments.hpp"

using namespace superlase;

namespace {

ModelConfig gaussian_model(int clusters, std::int64_t atoms, double sigma, double pump) {
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.rates.pump = pump;
  c.ensemble.clusters = clusters;
  c.ensemble.total_atoms = atoms;
  c.ensemble.sigma = sigma;
  c.ensemble.span = sigma;
  c.ensemble.coupling = 0.002;
  return c;
}

void expect_same(const PointResult& a, const PointResult& b) {
  EXPECT_EQ(a.converged, b.converged);
  EXPECT_EQ(a.error, b.error);
  EXPECT_EQ(a.photon_number, b.photon_number);
  EXPECT_EQ(a.fwhm, b.fwhm);
  EXPECT_EQ(a.lineshift, b.lineshift);
  EXPECT_EQ(a.peak_count, b.peak_count);
  EXPECT_EQ(a.weight, b.weight);
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto m : {EnsembleMode::gaussian, EnsembleMode::explicit_clusters, EnsembleMode::composite})
    EXPECT_EQ(ensemble_mode_from_string(to_string(m)), m);
  for (auto a : {SweepAxis::atoms, SweepAxis::pump, SweepAxis::coupling, SweepAxis::cav_dephasing,
                 SweepAxis::atom_dephasing, SweepAxis::sigma})
    EXPECT_EQ(sweep_axis_from_string(to_string(a)), a);
  EXPECT_THROW(ensemble_mode_from_string("lorentzian"), PreconditionError);
  EXPECT_THROW(sweep_axis_from_string("kappa"), PreconditionError);
}

TEST(EnsembleSpec, BuildsEachMode) {
  EnsembleSpec s;
  s.clusters = 5;
  s.total_atoms = 1000;
  s.sigma = 0.1;
  s.span = 0.1;
  s.coupling = 0.002;
  EXPECT_EQ(s.build().total_atoms(), 1000);
  EXPECT_EQ(s.build().size(), 5u);

  s.mode = EnsembleMode::composite;
  s.coupling_clusters = 5;
  s.g0 = 0.0013;
  const auto comp = s.build();
  EXPECT_EQ(comp.total_atoms(), 1000);
  EXPECT_EQ(comp.size(), 25u);

  s.mode = EnsembleMode::explicit_clusters;
  s.explicit_clusters = {{0.0, 0.001, 3}};
  EXPECT_EQ(s.build().size(), 1u);
  s.explicit_clusters.clear();
  EXPECT_THROW(s.validate(), PreconditionError);
}

TEST(ApplyAxis, SetsTheRightField) {
  auto c = gaussian_model(5, 1000, 0.1, 0.01);
  EXPECT_EQ(apply_axis(c, SweepAxis::atoms, 5000).ensemble.total_atoms, 5000);
  EXPECT_THROW(apply_axis(c, SweepAxis::atoms, 10.5), PreconditionError);
  EXPECT_THROW(apply_axis(c, SweepAxis::atoms, 0.0), PreconditionError);
  EXPECT_EQ(apply_axis(c, SweepAxis::pump, 0.3).rates.pump, 0.3);
  EXPECT_EQ(apply_axis(c, SweepAxis::cav_dephasing, 2.0).rates.cav_dephasing, 2.0);
  EXPECT_EQ(apply_axis(c, SweepAxis::atom_dephasing, 0.1).rates.atom_dephasing, 0.1);
  EXPECT_EQ(apply_axis(c, SweepAxis::sigma, 0.2).ensemble.sigma, 0.2);
  EXPECT_EQ(apply_axis(c, SweepAxis::coupling, 0.004).ensemble.coupling, 0.004);
  c.ensemble.mode = EnsembleMode::composite;
  EXPECT_EQ(apply_axis(c, SweepAxis::coupling, 0.004).ensemble.g0, 0.004);
  c.ensemble.mode = EnsembleMode::explicit_clusters;
  c.ensemble.explicit_clusters = {{0.0, 0.001, 3}, {0.1, 0.002, 4}};
  for (const auto& cl : apply_axis(c, SweepAxis::coupling, 0.004).ensemble.explicit_clusters)
    EXPECT_EQ(cl.coupling, 0.004);
}

TEST(SolveSteady, RejectsInvalidModel) {
  auto c = gaussian_model(5, 1000, 0.1, 0.01);
  c.rates.gamma = -1.0;
  EXPECT_THROW(solve_steady(c), PreconditionError);
  const auto r = evaluate_point(c);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.error.empty());
}

TEST(SolveSteady, SingleClusterOnResonanceIsReal) {
  // On resonance <a sigma+> is purely imaginary and photons flow out of the atoms.
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.rates.pump = 0.01;
  c.ensemble.total_atoms = 5000;
  c.ensemble.coupling = 0.002;
  const auto run = solve_steady(c);
  EXPECT_TRUE(run.report.converged);
  EXPECT_NEAR(run.state.field_atom(0).real(), 0.0, 1e-12);
  EXPECT_LT(run.state.field_atom(0).imag(), 0.0);
  // Photon balance: kappa n = -2 g N Im<a sigma+>.
  EXPECT_NEAR(run.state.photon_number(), -2.0 * 0.002 * 5000 * run.state.field_atom(0).imag(),
              1e-6 * run.state.photon_number());
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned workers : {1u, 3u, 0u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 2, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Sweep, SinglePointEqualsDirectEvaluation) {
  const auto c = gaussian_model(5, 1000, 0.1, 0.01);
  const auto s = sweep(c, {{SweepAxis::pump, {0.02}}});
  ASSERT_EQ(s.records.size(), 1u);
  expect_same(s.records[0].result, evaluate_point(apply_axis(c, SweepAxis::pump, 0.02)));
}

TEST(Sweep, RowMajorAndDeterministic) {
  const auto c = gaussian_model(3, 500, 0.05, 0.01);
  const std::vector<AxisSpec> axes{{SweepAxis::atoms, {200, 800}}, {SweepAxis::pump, {0.005, 0.01, 0.02}}};
  SweepOptions one, many;
  one.workers = 1;
  many.workers = 4;
  const auto a = sweep(c, axes, one);
  const auto b = sweep(c, axes, many);
  ASSERT_EQ(a.records.size(), 6u);
  EXPECT_EQ(a.records[1].parameters, (std::vector<double>{200, 0.01}));
  EXPECT_EQ(a.records[3].parameters, (std::vector<double>{800, 0.005}));
  for (std::size_t i = 0; i < 6; ++i) expect_same(a.records[i].result, b.records[i].result);
}

TEST(Sweep, ValidatesBeforeComputing) {
  const auto c = gaussian_model(3, 500, 0.05, 0.01);
  EXPECT_THROW(sweep(c, {{SweepAxis::pump, {0.01, -1.0}}}), PreconditionError);
  EXPECT_THROW(sweep(c, {}), PreconditionError);
  SweepOptions small;
  small.max_points = 3;
  EXPECT_THROW(sweep(c, {{SweepAxis::pump, {0.01, 0.02, 0.03, 0.04}}}, small), PreconditionError);
}

TEST(CriticalPump, SingleClusterIsBelowRange) {
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.ensemble.total_atoms = 2000;
  c.ensemble.coupling = 0.002;
  const auto r = critical_pump(c, 0.001, 0.1, 0.001);
  EXPECT_EQ(r.status, CriticalPumpResult::Status::below_range);
}

TEST(CriticalPump, MultimodalAtMaximumIsAboveRange) {
  // Far-detuned clusters below threshold: the peaks never merge at tiny pump.
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.ensemble.mode = EnsembleMode::explicit_clusters;
  c.ensemble.explicit_clusters = {{-0.3, 0.002, 50}, {0.3, 0.002, 50}};
  try {
    critical_pump(c, 0.001, 0.002, 1e-4);
    FAIL() << "expected an above-range error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("above-range"), std::string::npos);
  }
}

TEST(CriticalPump, BracketsTheMerger) {
  const auto c = gaussian_model(5, 2000, 0.05, 0.0);
  const auto r = critical_pump(c, 0.001, 0.2, 0.002);
  ASSERT_EQ(r.status, CriticalPumpResult::Status::bracketed);
  EXPECT_LE(r.bracket_hi - r.bracket_lo, 0.002 + 1e-12);
  EXPECT_DOUBLE_EQ(r.critical_pump, 0.5 * (r.bracket_lo + r.bracket_hi));
  // The reported pump is unimodal and the lower bracket is not.
  EXPECT_EQ(evaluate_point(apply_axis(c, SweepAxis::pump, r.bracket_hi)).peak_count, 1u);
  EXPECT_GT(evaluate_point(apply_axis(c, SweepAxis::pump, r.bracket_lo)).peak_count, 1u);
}

TEST(CrossCorrelation, MatrixIsHermitian) {
  const auto e = build_gaussian_clusters(5, 1000, 0.05, 0.05, 0.002);
  SystemRates r;
  r.gamma = 0.001;
  const std::vector<double> pumps{0.005, 0.02};
  const auto scan = cross_correlation_scan(e, r, pumps, IntegratorConfig{});
  EXPECT_EQ(scan.first, 0u);
  EXPECT_EQ(scan.central, 2u);
  for (const auto& p : scan.points) {
    ASSERT_TRUE(p.converged) << p.error;
    for (std::size_t m = 0; m < 5; ++m) {
      EXPECT_NEAR(p.at(m, m).imag(), 0.0, 1e-12);
      for (std::size_t j = 0; j < 5; ++j) EXPECT_LT(std::abs(p.at(m, j) - std::conj(p.at(j, m))), 1e-15);
    }
    EXPECT_EQ(p.traced, p.at(0, 2));
  }
  const std::vector<double> bad{0.02, 0.01};
  EXPECT_THROW(cross_correlation_scan(e, r, bad, IntegratorConfig{}), PreconditionError);
}

TEST(LinewidthStudy, NarrowsAboveThreshold) {
  LinewidthStudy study;
  study.sigma = 0.01;
  study.frequency_clusters = 5;
  study.coupling.g = 0.002;
  study.rates.gamma = 0.001;
  study.rates.pump = 0.02;
  const std::vector<std::int64_t> atoms{10, 100, 1000, 10000};
  const auto curve = linewidth_vs_atoms(study, atoms);
  ASSERT_EQ(curve.sweep.records.size(), 4u);
  const auto& rec = curve.sweep.records;
  ASSERT_TRUE(rec[0].result.fwhm && rec[3].result.fwhm);
  EXPECT_LT(*rec[3].result.fwhm, *rec[0].result.fwhm);
  EXPECT_GT(rec[3].result.photon_number, rec[0].result.photon_number);
  ASSERT_TRUE(curve.threshold_atoms);
  EXPECT_GE(*curve.threshold_atoms, 10.0);
  EXPECT_LE(*curve.threshold_atoms, 10000.0);
}
