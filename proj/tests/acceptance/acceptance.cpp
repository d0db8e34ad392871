// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "superlase/ensemble.hpp"
#include "superlase/errors.hpp"
#include "superlase/experiments.hpp"
#include "superlase/moments.hpp"
#include "superlase/solver.hpp"
#include "superlase/spectrum.hpp"

using namespace superlase;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Weight/photon pairs gathered by criteria 3-8 and judged by criterion 9.
struct WeightSample {
  std::string label;
  bool converged = false;
  double weight = 0.0;
  double photons = 0.0;
};
std::vector<WeightSample> g_weights;

void record_weight(const std::string& label, const PointResult& r) {
  g_weights.push_back({label, r.converged, r.weight, r.photon_number});
}

void record_weight(const std::string& label, const SpectrumRun& r) {
  g_weights.push_back({label, true, r.spectrum.weight, r.steady.state.photon_number()});
}

ModelConfig gaussian_model(int clusters, std::int64_t atoms, double sigma, double span, double g, double pump) {
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.rates.pump = pump;
  c.ensemble.clusters = clusters;
  c.ensemble.total_atoms = atoms;
  c.ensemble.sigma = sigma;
  c.ensemble.span = span;
  c.ensemble.coupling = g;
  return c;
}

std::vector<double> log_points(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, i / static_cast<double>(n - 1)));
  v.front() = lo;
  v.back() = hi;
  return v;
}

// Full width at half maximum of the peak at sample index `idx`, measured
// locally by walking out to the half-height crossings.
std::optional<double> local_fwhm(const SpectrumResult& s, std::size_t idx) {
  const auto& x = s.frequencies;
  const auto& y = s.values;
  const double half = 0.5 * y[idx];
  auto cross = [&](std::size_t i, std::size_t j) { return x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]); };
  std::size_t l = idx;
  while (l > 0 && y[l - 1] > half) --l;
  std::size_t r = idx;
  while (r + 1 < y.size() && y[r + 1] > half) ++r;
  if (l == 0 || r + 1 == y.size()) return std::nullopt;
  return cross(r, r + 1) - cross(l - 1, l);
}

// ---------------------------------------------------------------- 1

Outcome cluster_atom_equivalence() {
  // Both systems are advanced with the same fixed-step Dormand-Prince map, so
  // any difference beyond rounding comes from the equations themselves.
  std::mt19937_64 gen(20240601);
  std::uniform_int_distribution<int> clusters(1, 5);
  std::uniform_real_distribution<double> det(-0.5, 0.5), unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(gen)); };

  IntegratorConfig cfg;
  cfg.fixed_step = 0.05;
  cfg.max_step = 0.05;
  std::vector<double> times;
  for (int k = 1; k <= 100; ++k) times.push_back(10.0 * k);

  double worst = 0.0;
  int trials = 0;
  for (; trials < 20; ++trials) {
    const int M = clusters(gen);
    std::vector<Cluster> cs;
    int budget = 50 - (M - 1);
    for (int m = 0; m < M; ++m) {
      std::uniform_int_distribution<int> pop(1, std::min(budget, 50 / M));
      const int n = pop(gen);
      budget -= n - 1;
      cs.push_back({det(gen), log_uniform(1e-4, 1e-2), n});
    }
    const ClusterEnsemble e(cs);
    SystemRates r;
    r.gamma = log_uniform(1e-4, 1e-2);
    r.pump = log_uniform(1e-3, 0.2);
    r.cav_dephasing = unit(gen) < 0.5 ? 0.0 : log_uniform(1e-3, 1.0);
    r.atom_dephasing = unit(gen) < 0.5 ? 0.0 : log_uniform(1e-5, 1e-2);

    const ClusteredSystem clustered(e, r);
    const PerAtomSystem per_atom(expanded_detunings(e), expanded_couplings(e), r);
    const auto y0 = clustered.initial_state();
    const auto p0 = expand(e, y0);
    const auto tc = integrate(std::cref(clustered), y0.values(), 1000.0, cfg, times);
    const auto tp = integrate(std::cref(per_atom), p0.values(), 1000.0, cfg, times);
    for (std::size_t k = 0; k < tc.samples.size(); ++k) {
      const auto& yc = tc.samples[k].y;
      const auto yp = contract(e, PerAtomState(p0.atoms(), tp.samples[k].y));
      double diff = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < yc.size(); ++i) {
        diff = std::max(diff, std::abs(yc[i] - yp.values()[i]));
        scale = std::max(scale, std::abs(yc[i]));
      }
      worst = std::max(worst, diff / scale);
    }
  }
  return {worst <= 1e-8, fmt("%d ensembles, max relative deviation %.2e (limit 1e-8)", trials, worst)};
}

// ---------------------------------------------------------------- 2

Outcome analytic_steady_state() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0), det(-0.3, 0.3);
  double worst_p = 0.0, worst_n = 0.0;
  for (int k = 0; k < 10; ++k) {
    SystemRates r;
    r.gamma = 1e-4 * std::pow(100.0, unit(gen));
    r.pump = 1e-3 * std::pow(200.0, unit(gen));
    const ClusterEnsemble e({{det(gen), 0.0, 100}, {det(gen), 0.0, 40}, {det(gen) + 0.5, 0.0, 1}});
    const auto run = solve_steady(e, r, IntegratorConfig{});
    const double expected = r.pump / (r.pump + r.gamma);
    for (std::size_t m = 0; m < e.size(); ++m)
      worst_p = std::max(worst_p, std::abs(run.state.population(m) - expected));
    worst_n = std::max(worst_n, std::abs(run.state.photon_number()));
  }
  return {worst_p <= 1e-9 && worst_n <= 1e-9,
          fmt("max |p - R/(R+Gamma)| = %.2e, max |n| = %.2e (limit 1e-9)", worst_p, worst_n)};
}

// ---------------------------------------------------------------- 3

Outcome five_peak_spectrum() {
  const std::vector<double> centres{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> central_fwhm;
  std::string detail;
  bool pass = true;
  for (std::int64_t n : {5, 500, 5000}) {
    const auto cfg = gaussian_model(5, n, 1.0, 1.0, 0.002, 0.01);
    const auto run = run_spectrum(cfg);
    record_weight(fmt("criterion 3, N=%lld", static_cast<long long>(n)), run);
    const auto& s = run.spectrum;
    const double cell = (s.frequencies.back() - s.frequencies.front()) / static_cast<double>(s.base_points - 1);

    // Central peak: the local maximum closest to the cavity resonance.
    const auto all = find_peaks(s.frequencies, s.values);
    const auto central = std::min_element(all.begin(), all.end(), [](const Peak& a, const Peak& b) {
      return std::abs(a.position) < std::abs(b.position);
    });
    std::optional<double> w;
    if (central != all.end() && std::abs(central->position) <= cell) w = local_fwhm(s, central->index);
    central_fwhm.push_back(w.value_or(NAN));
    if (!w) pass = false;

    if (n == 5000) {
      const auto counted = count_peaks(s, cfg.grid.prominence_frac);
      bool placed = counted == centres.size();
      for (const auto& p : s.peaks) {
        double nearest = INFINITY;
        for (double d : centres) nearest = std::min(nearest, std::abs(p.position - d));
        placed = placed && nearest <= cell;
      }
      std::string heights;
      for (const auto& p : all) heights += fmt(" %.3g@%.3f", p.height, p.position);
      detail += fmt("N=5000: %zu peaks above prominence threshold (need 5 within %.4g of the cluster detunings); "
                    "local maxima:%s. ",
                    counted, cell, heights.c_str());
      pass = pass && placed;
    }
  }
  const bool narrowing = central_fwhm[0] > central_fwhm[1] && central_fwhm[1] > central_fwhm[2];
  detail += fmt("central FWHM N=5,500,5000: %.3g, %.3g, %.3g", central_fwhm[0], central_fwhm[1], central_fwhm[2]);
  return {pass && narrowing, detail};
}

// ---------------------------------------------------------------- 4

Outcome synchronization_transition() {
  const std::vector<double> pumps{0.001, 0.01, 0.02, 0.05};
  std::vector<std::size_t> counts;
  for (double r : pumps) {
    const auto res = evaluate_point(gaussian_model(31, 10000, 0.1, 0.1, 0.002, r));
    if (!res.converged) return {false, fmt("R=%g failed: %s", r, res.error.c_str())};
    record_weight(fmt("criterion 4, R=%g", r), res);
    counts.push_back(res.peak_count);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < counts.size(); ++i) monotone = monotone && counts[i] <= counts[i - 1];
  const bool pass = counts.front() > 1 && counts.back() == 1 && monotone;
  return {pass, fmt("peak counts at R = 0.001, 0.01, 0.02, 0.05: %zu, %zu, %zu, %zu", counts[0], counts[1], counts[2],
                    counts[3])};
}

// ---------------------------------------------------------------- 5

Outcome critical_pump_law() {
  bool pass = true;
  std::string detail;
  for (double sigma : {0.05, 0.1, 0.2}) {
    const double law = 0.4 * sigma;
    double rc[2];
    int k = 0;
    for (std::int64_t n : {100, 10000}) {
      const auto cfg = gaussian_model(31, n, sigma, 3.0 * sigma, 0.001, 0.0);
      CriticalPumpResult res;
      try {
        res = critical_pump(cfg, 1e-3, 0.5, 0.02 * law);
      } catch (const std::exception& e) {
        return {false, fmt("sigma=%g N=%lld: %s", sigma, static_cast<long long>(n), e.what())};
      }
      if (res.status != CriticalPumpResult::Status::bracketed)
        return {false, fmt("sigma=%g N=%lld: unimodal already at R_min", sigma, static_cast<long long>(n))};
      rc[k++] = res.critical_pump;
      for (double r : {res.bracket_lo, res.bracket_hi})
        record_weight(fmt("criterion 5, sigma=%g N=%lld R=%.4g", sigma, static_cast<long long>(n), r),
                      evaluate_point(apply_axis(cfg, SweepAxis::pump, r)));
    }
    const bool law_ok = std::abs(rc[1] - law) <= 0.25 * law;
    const bool n_ok = std::abs(rc[0] - rc[1]) <= 0.25 * rc[1];
    pass = pass && law_ok && n_ok;
    detail += fmt("sigma=%g: R_c(N=1e4)=%.4g (0.4 sigma=%.4g%s), R_c(N=1e2)=%.4g (%s); ", sigma, rc[1], law,
                  law_ok ? "" : ", off", rc[0], n_ok ? "agree" : "differ");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 6, 7

ModelConfig identical_atoms(double pump) {
  ModelConfig c;
  c.rates.gamma = 0.001;
  c.rates.pump = pump;
  c.ensemble.total_atoms = 50000;
  c.ensemble.coupling = 0.002;
  return c;
}

// Coarse pump scan shared by criteria 6 and 7: three points per decade.
const std::vector<std::pair<double, PointResult>>& identical_atom_scan() {
  static const auto scan = [] {
    std::vector<std::pair<double, PointResult>> out;
    for (double r : log_points(1e-3, 1.0, 10)) {
      out.emplace_back(r, evaluate_point(identical_atoms(r)));
      record_weight(fmt("criterion 6, R=%.4g", r), out.back().second);
    }
    return out;
  }();
  return scan;
}

Outcome superradiant_linewidth() {
  const double target = 4.0 * 0.002 * 0.002;
  double best = INFINITY, best_r = 0.0;
  for (const auto& [r, res] : identical_atom_scan())
    if (res.fwhm && *res.fwhm < best) {
      best = *res.fwhm;
      best_r = r;
    }
  const bool pass = best <= 3.0 * target && best >= target / 3.0;
  return {pass, fmt("minimum FWHM %.4g at R=%.3g; 4g^2/kappa = %.3g (ratio %.3g)", best, best_r, target,
                    best / target)};
}

Outcome cavity_noise_robustness() {
  // The low-photon superradiant point: the weakest pump of the scan whose line
  // is already narrower than the atomic linewidth.
  const double gamma = 0.001;
  for (const auto& [r, res] : identical_atom_scan()) {
    if (!res.fwhm || *res.fwhm >= gamma) continue;
    auto noisy_cfg = identical_atoms(r);
    noisy_cfg.rates.cav_dephasing = 1.0;
    const auto noisy = evaluate_point(noisy_cfg);
    record_weight(fmt("criterion 7, R=%.4g xi=1", r), noisy);
    if (!noisy.fwhm) return {false, "xi=kappa run has no single line: " + noisy.error};
    const double ratio = *noisy.fwhm / *res.fwhm;
    return {ratio < 2.0, fmt("R=%.3g (n=%.3g): FWHM %.4g without and %.4g with xi=kappa, ratio %.3f (limit 2)", r,
                             res.photon_number, *res.fwhm, *noisy.fwhm, ratio)};
  }
  return {false, "no superradiant point in the pump scan"};
}

// ---------------------------------------------------------------- 8

Outcome coupling_cluster_equivalence() {
  const std::vector<std::int64_t> atoms{5000, 10000, 20000, 40000, 80000};
  LinewidthStudy study;
  study.sigma = 1.0 / 30.0;
  study.span_factor = 3.0;
  study.frequency_clusters = 11;
  study.composite_frequency_clusters = 11;
  study.rates.gamma = 0.001;
  study.rates.pump = 0.05;
  study.coupling = {1, 0.001, 0.0};
  const auto uniform = linewidth_vs_atoms(study, atoms);
  study.coupling = {5, 0.0, 0.0013};
  const auto composite = linewidth_vs_atoms(study, atoms);

  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& u = uniform.sweep.records[i].result;
    const auto& c = composite.sweep.records[i].result;
    record_weight(fmt("criterion 8 uniform, N=%lld", static_cast<long long>(atoms[i])), u);
    record_weight(fmt("criterion 8 K=5, N=%lld", static_cast<long long>(atoms[i])), c);
    if (!u.fwhm || !c.fwhm) {
      pass = false;
      detail += fmt("N=%lld: no single line; ", static_cast<long long>(atoms[i]));
      continue;
    }
    const double dev = std::abs(*c.fwhm / *u.fwhm - 1.0);
    pass = pass && dev <= 0.2;
    detail += fmt("N=%lld: %.3g vs %.3g (%.0f%%); ", static_cast<long long>(atoms[i]), *u.fwhm, *c.fwhm, 100 * dev);
  }
  const auto th = uniform.threshold_atoms;
  const bool spans = th && *th > static_cast<double>(atoms.front()) && *th <= static_cast<double>(atoms.back());
  detail += th ? fmt("threshold near N=%.0f", *th) : std::string("no threshold found");
  return {pass && spans, detail};
}

// ---------------------------------------------------------------- 9

Outcome spectral_weight_identity() {
  if (g_weights.empty()) return {false, "no configurations recorded (run criteria 3-8 first)"};
  double worst = 0.0;
  std::string worst_label, failures;
  int failed = 0;
  for (const auto& w : g_weights) {
    if (!w.converged) {
      ++failed;
      failures += w.label + " did not converge; ";
      continue;
    }
    const double dev = std::abs(w.weight - w.photons) / w.photons;
    if (dev > worst) {
      worst = dev;
      worst_label = w.label;
    }
  }
  return {failed == 0 && worst <= 0.02, failures + fmt("%zu configurations, worst relative deviation %.3g%% (%s)",
                                                       g_weights.size(), 100 * worst, worst_label.c_str())};
}

// ---------------------------------------------------------------- 10

Outcome appendix_cross_correlations() {
  const auto e = gaussian_model(31, 10000, 0.1, 0.1, 0.002, 0.0).ensemble.build();
  SystemRates r;
  r.gamma = 0.001;
  const auto pumps = log_points(1e-3, 0.2, 12);
  const auto scan = cross_correlation_scan(e, r, pumps, IntegratorConfig{});
  std::vector<double> mag;
  for (const auto& p : scan.points) {
    if (!p.converged) return {false, fmt("R=%.3g failed: %s", p.pump, p.error.c_str())};
    mag.push_back(std::abs(p.traced));
  }
  const auto peak = std::max_element(mag.begin() + 1, mag.end() - 1);
  const bool low = mag.front() < 1e-4;
  const bool interior = *peak > mag.front() && *peak > mag.back();
  return {low && interior, fmt("|c| = %.2e at R=%.3g, interior maximum %.2e at R=%.3g, %.2e at R=%.3g", mag.front(),
                               pumps.front(), *peak, pumps[static_cast<std::size_t>(peak - mag.begin())], mag.back(),
                               pumps.back())};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "cluster-atom oracle equivalence", cluster_atom_equivalence},
      {2, "analytic steady state at g=0", analytic_steady_state},
      {3, "five-peak spectrum", five_peak_spectrum},
      {4, "synchronization transition", synchronization_transition},
      {5, "critical pump law", critical_pump_law},
      {6, "superradiant linewidth scale", superradiant_linewidth},
      {7, "cavity-noise robustness", cavity_noise_robustness},
      {8, "coupling-cluster equivalence", coupling_cluster_equivalence},
      {9, "spectral-weight identity", spectral_weight_identity},
      {10, "cross-correlation maximum", appendix_cross_correlations},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
