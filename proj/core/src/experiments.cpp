#include "superlase/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "superlase/errors.hpp"

namespace superlase {

namespace {
constexpr int kMaxGridDoublings = 8;
}

// ---------------------------------------------------------------- config

const char* to_string(EnsembleMode m) {
  switch (m) {
    case EnsembleMode::gaussian: return "gaussian";
    case EnsembleMode::explicit_clusters: return "explicit";
    case EnsembleMode::composite: return "composite";
  }
  return "?";
}

EnsembleMode ensemble_mode_from_string(const std::string& s) {
  if (s == "gaussian") return EnsembleMode::gaussian;
  if (s == "explicit" || s == "explicit-clusters") return EnsembleMode::explicit_clusters;
  if (s == "composite") return EnsembleMode::composite;
  throw PreconditionError("unknown ensemble mode '" + s + "'");
}

void EnsembleSpec::validate() const {
  switch (mode) {
    case EnsembleMode::explicit_clusters:
      if (explicit_clusters.empty()) throw PreconditionError("explicit ensemble needs at least one cluster");
      break;
    case EnsembleMode::composite:
      if (coupling_clusters < 1) throw PreconditionError("composite ensemble needs K >= 1");
      if (!(g0 > 0.0)) throw PreconditionError("composite ensemble needs g0 > 0");
      [[fallthrough]];
    case EnsembleMode::gaussian:
      if (clusters < 1 || clusters % 2 == 0) throw PreconditionError("number of clusters must be odd and >= 1");
      if (total_atoms < clusters) throw PreconditionError("need at least one atom per cluster");
      if (!(sigma >= 0.0)) throw PreconditionError("sigma must be >= 0");
      if (clusters > 1 && !(span > 0.0)) throw PreconditionError("span must be positive when M > 1");
      if (mode == EnsembleMode::gaussian && !(coupling >= 0.0)) throw PreconditionError("coupling must be >= 0");
      break;
  }
  if (!(imbalance_fraction >= 0.0)) throw PreconditionError("imbalance fraction must be >= 0");
  if (!(fluctuation >= 0.0 && fluctuation < 1.0)) throw PreconditionError("fluctuation amplitude must lie in [0, 1)");
}

ClusterEnsemble EnsembleSpec::build() const {
  validate();
  if (mode == EnsembleMode::explicit_clusters) return ClusterEnsemble(explicit_clusters, seed);

  const double g = mode == EnsembleMode::composite ? g0 : coupling;
  ClusterEnsemble e = build_gaussian_clusters(clusters, total_atoms, sigma, span, g);
  if (imbalance_fraction > 0.0) e = apply_imbalance(e, imbalance_at, imbalance_fraction);
  if (fluctuation > 0.0) e = apply_fluctuations(e, fluctuation, seed);
  if (mode == EnsembleMode::composite) {
    const auto gs = build_coupling_clusters(coupling_clusters, g0);
    e = compose(e, gs);
  }
  return e;
}

void GridSpec::validate() const {
  if (points < 2) throw PreconditionError("spectrum grid needs at least 2 points");
  if (!(half_width >= 0.0)) throw PreconditionError("grid half-width must be >= 0");
  if (!(prominence_frac > 0.0 && prominence_frac < 1.0))
    throw PreconditionError("prominence fraction must lie in (0, 1)");
}

void ModelConfig::validate() const {
  rates.validate();
  ensemble.validate();
  solver.validate();
  grid.validate();
}

// ---------------------------------------------------------------- single runs

SteadyRun solve_steady(const ClusterEnsemble& e, const SystemRates& r, const IntegratorConfig& solver) {
  const ClusteredSystem sys(e, r);
  const auto layout = sys.layout();
  const RhsFunction rhs = [&sys](std::span<const double> y, std::span<double> dy) { sys(y, dy); };
  const StateValidator physical = [&layout](std::span<const double> y) {
    const MomentState s(layout, {y.begin(), y.end()});
    return physicality_violation(s, physical_tolerance(s));
  };
  const auto y0 = sys.initial_state();
  auto ss = find_steady_state(rhs, y0.values(), solver, physical);
  return SteadyRun{e, MomentState(layout, std::move(ss.state)), ss.report};
}

SteadyRun solve_steady(const ModelConfig& cfg) {
  cfg.validate();
  return solve_steady(cfg.ensemble.build(), cfg.rates, cfg.solver);
}

SpectrumRun run_spectrum(const ModelConfig& cfg) {
  auto steady = solve_steady(cfg);
  const double residual_tol = std::max(1e-6, 10.0 * cfg.solver.stall_threshold);
  auto regression = assemble_regression(steady.state, steady.ensemble, cfg.rates, residual_tol);
  auto grid = cfg.grid.half_width > 0.0 ? uniform_grid(-cfg.grid.half_width, cfg.grid.half_width, cfg.grid.points)
                                         : default_grid(steady.ensemble, cfg.rates, cfg.grid.points);
  SpectrumOptions opts;
  opts.refine = cfg.grid.refine;
  opts.prominence_frac = cfg.grid.prominence_frac;
  auto spectrum = evaluate_spectrum(regression, grid, opts);
  // A line broader than the window would lose its half-maximum crossings.
  for (int k = 0; cfg.grid.auto_extend && k < kMaxGridDoublings; ++k) {
    const auto& v = spectrum.values;
    const double vmax = *std::max_element(v.begin(), v.end());
    if (!(vmax > 0.0) || std::max(v.front(), v.back()) <= 0.5 * vmax) break;
    const double half = 2.0 * grid.back();
    grid = uniform_grid(-half, half, cfg.grid.points);
    spectrum = evaluate_spectrum(regression, grid, opts);
  }
  return SpectrumRun{std::move(steady), std::move(regression), std::move(spectrum)};
}

PointResult evaluate_point(const ModelConfig& cfg) {
  PointResult out;
  try {
    const auto run = run_spectrum(cfg);
    out.converged = true;
    out.photon_number = run.steady.state.photon_number();
    out.fwhm = run.spectrum.fwhm;
    out.lineshift = run.spectrum.lineshift;
    out.peak_count = count_peaks(run.spectrum, cfg.grid.prominence_frac);
    out.weight = run.spectrum.weight;
  } catch (const std::exception& e) {
    out.converged = false;
    out.error = e.what();
  }
  return out;
}

// ---------------------------------------------------------------- sweeps

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::atoms: return "N";
    case SweepAxis::pump: return "R";
    case SweepAxis::coupling: return "g";
    case SweepAxis::cav_dephasing: return "xi";
    case SweepAxis::atom_dephasing: return "nu";
    case SweepAxis::sigma: return "sigma";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "N") return SweepAxis::atoms;
  if (s == "R") return SweepAxis::pump;
  if (s == "g") return SweepAxis::coupling;
  if (s == "xi") return SweepAxis::cav_dephasing;
  if (s == "nu") return SweepAxis::atom_dephasing;
  if (s == "sigma") return SweepAxis::sigma;
  throw PreconditionError("unknown sweep axis '" + s + "' (expected N, R, g, xi, nu or sigma)");
}

ModelConfig apply_axis(ModelConfig cfg, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::atoms:
      if (!(value >= 1.0) || value != std::floor(value)) throw PreconditionError("N axis values must be positive integers");
      cfg.ensemble.total_atoms = static_cast<std::int64_t>(value);
      break;
    case SweepAxis::pump: cfg.rates.pump = value; break;
    case SweepAxis::coupling:
      if (cfg.ensemble.mode == EnsembleMode::composite) {
        cfg.ensemble.g0 = value;
      } else if (cfg.ensemble.mode == EnsembleMode::explicit_clusters) {
        for (auto& c : cfg.ensemble.explicit_clusters) c.coupling = value;
      } else {
        cfg.ensemble.coupling = value;
      }
      break;
    case SweepAxis::cav_dephasing: cfg.rates.cav_dephasing = value; break;
    case SweepAxis::atom_dephasing: cfg.rates.atom_dephasing = value; break;
    case SweepAxis::sigma: cfg.ensemble.sigma = value; break;
  }
  return cfg;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

SweepResult sweep(const ModelConfig& base, const std::vector<AxisSpec>& axes, const SweepOptions& opts) {
  if (axes.empty()) throw PreconditionError("sweep needs at least one axis");
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw PreconditionError(std::string("sweep axis ") + to_string(a.axis) + " has no values");
    total *= a.values.size();
  }
  if (total > opts.max_points)
    throw PreconditionError("sweep has " + std::to_string(total) + " points, limit is " +
                            std::to_string(opts.max_points));

  // Validate every point before any compute starts.
  std::vector<ModelConfig> configs(total, base);
  std::vector<std::vector<double>> params(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    std::vector<double> p(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      p[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
    for (std::size_t k = 0; k < axes.size(); ++k) configs[idx] = apply_axis(configs[idx], axes[k].axis, p[k]);
    configs[idx].validate();
    params[idx] = std::move(p);
  }

  SweepResult out;
  out.axes = axes;
  out.records.resize(total);
  parallel_for(total, opts.workers, [&](std::size_t i) {
    out.records[i] = SweepRecord{params[i], evaluate_point(configs[i])};
  });
  return out;
}

// ---------------------------------------------------------------- critical pump

CriticalPumpResult critical_pump(const ModelConfig& templ, double r_min, double r_max, double tol_r,
                                 const CriticalPumpOptions& opts) {
  if (!(r_min > 0.0) || !(r_max > r_min)) throw PreconditionError("critical pump needs 0 < R_min < R_max");
  if (!(tol_r > 0.0)) throw PreconditionError("pump tolerance must be positive");
  if (opts.prescan_points < 2) throw PreconditionError("pre-scan needs at least 2 points");
  templ.validate();

  CriticalPumpResult out;
  auto peaks_at = [&](double r) {
    ModelConfig cfg = templ;
    cfg.rates.pump = r;
    const auto run = run_spectrum(cfg);
    return count_peaks(run.spectrum, cfg.grid.prominence_frac);
  };
  auto record = [&](double r, std::size_t count) {
    out.evaluated.emplace_back(r, count);
    ++out.evaluations;
    return count == 1;
  };

  const auto n = static_cast<std::size_t>(opts.prescan_points);
  std::vector<double> scan_r(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    scan_r[i] = r_min * std::pow(r_max / r_min, f);
  }
  scan_r.front() = r_min;
  scan_r.back() = r_max;
  std::vector<std::size_t> scan_count(n);
  parallel_for(n, opts.workers, [&](std::size_t i) { scan_count[i] = peaks_at(scan_r[i]); });
  std::vector<bool> unimodal(n);
  for (std::size_t i = 0; i < n; ++i) unimodal[i] = record(scan_r[i], scan_count[i]);

  if (unimodal[0]) {
    out.status = CriticalPumpResult::Status::below_range;
    out.critical_pump = r_min;
    out.bracket_lo = out.bracket_hi = r_min;
    return out;
  }
  const auto first = std::find(unimodal.begin(), unimodal.end(), true);
  if (first == unimodal.end()) {
    std::ostringstream msg;
    msg << "above-range: spectrum still has " << scan_count.back() << " peaks at R_max = " << r_max;
    throw PreconditionError(msg.str());
  }
  const auto k = static_cast<std::size_t>(first - unimodal.begin());
  out.monotone_prescan = std::all_of(first, unimodal.end(), [](bool b) { return b; });

  double lo, hi;
  if (out.monotone_prescan) {
    lo = scan_r[k - 1];
    hi = scan_r[k];
    while (hi - lo > tol_r) {
      const double mid = 0.5 * (lo + hi);
      if (record(mid, peaks_at(mid)))
        hi = mid;
      else
        lo = mid;
    }
  } else {
    const double step = std::max(tol_r, (r_max - r_min) / opts.max_linear_scan);
    lo = r_min;
    hi = r_max;
    for (double r = r_min + step; r < r_max; r += step) {
      if (record(r, peaks_at(r))) {
        hi = r;
        break;
      }
      lo = r;
    }
  }
  out.status = CriticalPumpResult::Status::bracketed;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.critical_pump = 0.5 * (lo + hi);
  return out;
}

// ---------------------------------------------------------------- linewidth vs N

LinewidthCurve linewidth_vs_atoms(const LinewidthStudy& study, std::span<const std::int64_t> atom_grid,
                                  const SweepOptions& opts) {
  if (atom_grid.empty()) throw PreconditionError("atom grid is empty");
  for (std::size_t i = 1; i < atom_grid.size(); ++i)
    if (!(atom_grid[i] > atom_grid[i - 1])) throw PreconditionError("atom grid must be increasing");

  ModelConfig base;
  base.rates = study.rates;
  base.solver = study.solver;
  base.grid = study.grid;
  auto& es = base.ensemble;
  es.sigma = study.sigma;
  es.span = study.span > 0.0 ? study.span : study.span_factor * study.sigma;
  if (study.coupling.coupling_clusters > 1) {
    es.mode = EnsembleMode::composite;
    es.clusters = study.composite_frequency_clusters;
    es.coupling_clusters = study.coupling.coupling_clusters;
    es.g0 = study.coupling.g0;
  } else {
    es.mode = EnsembleMode::gaussian;
    es.clusters = study.frequency_clusters;
    es.coupling = study.coupling.g;
  }
  es.total_atoms = atom_grid.front();

  AxisSpec axis{SweepAxis::atoms, {}};
  for (auto n : atom_grid) axis.values.push_back(static_cast<double>(n));

  LinewidthCurve out;
  out.sweep = sweep(base, {axis}, opts);

  // Threshold: the sharpest linewidth drop that comes with a photon-number rise.
  double best = 0.0;
  const auto& rec = out.sweep.records;
  for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
    const auto& a = rec[i].result;
    const auto& b = rec[i + 1].result;
    if (!a.fwhm || !b.fwhm || !(b.photon_number > a.photon_number)) continue;
    const double drop = std::log(*a.fwhm / *b.fwhm);
    if (drop > best) {
      best = drop;
      out.threshold_atoms = rec[i + 1].parameters[0];
    }
  }
  return out;
}

// ---------------------------------------------------------------- cross-correlations

CrossCorrelationScan cross_correlation_scan(const ClusterEnsemble& e, const SystemRates& base,
                                            std::span<const double> pump_grid, const IntegratorConfig& solver,
                                            unsigned workers) {
  if (e.empty()) throw PreconditionError("ensemble is empty");
  if (pump_grid.empty()) throw PreconditionError("pump grid is empty");
  for (std::size_t i = 1; i < pump_grid.size(); ++i)
    if (!(pump_grid[i] > pump_grid[i - 1])) throw PreconditionError("pump grid must be increasing");

  const std::size_t M = e.size();
  CrossCorrelationScan out;
  out.first = 0;
  out.central = (M + 1) / 2 - 1;
  out.points.resize(pump_grid.size());
  parallel_for(pump_grid.size(), workers, [&](std::size_t i) {
    auto& pt = out.points[i];
    pt.pump = pump_grid[i];
    pt.clusters = M;
    try {
      SystemRates r = base;
      r.pump = pump_grid[i];
      const auto run = solve_steady(e, r, solver);
      pt.matrix.assign(M * M, complex{});
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t j = 0; j < M; ++j)
          pt.matrix[m * M + j] = m == j ? run.state.intra_coherence(m) : run.state.inter_coherence(m, j);
      }
      pt.traced = pt.matrix[out.first * M + out.central];
      pt.converged = true;
    } catch (const std::exception& ex) {
      pt.error = ex.what();
    }
  });
  return out;
}

}  // namespace superlase
