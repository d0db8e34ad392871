#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superlase/ensemble.hpp"
#include "superlase/moments.hpp"
#include "superlase/solver.hpp"
#include "superlase/spectrum.hpp"

namespace superlase {

enum class EnsembleMode { gaussian, explicit_clusters, composite };

const char* to_string(EnsembleMode m);
EnsembleMode ensemble_mode_from_string(const std::string& s);

/// Recipe for building a ClusterEnsemble.
struct EnsembleSpec {
  EnsembleMode mode = EnsembleMode::gaussian;
  int clusters = 1;            // M (frequency clusters)
  int coupling_clusters = 5;   // K, composite mode only
  std::int64_t total_atoms = 1;
  double sigma = 0.0;
  double span = 0.0;           // half-width of the detuning range
  double coupling = 0.0;       // uniform g (gaussian / explicit modes)
  double g0 = 0.0;             // antinode coupling (composite mode)
  double imbalance_at = 0.0;
  double imbalance_fraction = 0.0;
  double fluctuation = 0.0;
  std::uint64_t seed = 0;
  std::vector<Cluster> explicit_clusters;

  void validate() const;
  ClusterEnsemble build() const;
};

struct GridSpec {
  std::size_t points = 2001;
  double half_width = 0.0;  // 0 picks 1.5 max|Delta| + 10 Gamma
  bool refine = true;
  double prominence_frac = 1e-3;
  bool auto_extend = true;  // double the span while the line edge is above half maximum

  void validate() const;
};

struct ModelConfig {
  SystemRates rates;
  EnsembleSpec ensemble;
  IntegratorConfig solver;
  GridSpec grid;

  void validate() const;
};

struct SteadyRun {
  ClusterEnsemble ensemble;
  MomentState state;
  SteadyStateReport report;
};

/// Steady state of the clustered equations from the default initial state.
SteadyRun solve_steady(const ModelConfig& cfg);
SteadyRun solve_steady(const ClusterEnsemble& e, const SystemRates& r, const IntegratorConfig& solver);

struct SpectrumRun {
  SteadyRun steady;
  RegressionSystem regression;
  SpectrumResult spectrum;
};

SpectrumRun run_spectrum(const ModelConfig& cfg);

/// Observables of one parameter point. Failures are recorded, not thrown.
struct PointResult {
  bool converged = false;
  std::string error;
  double photon_number = 0.0;
  std::optional<double> fwhm;
  std::optional<double> lineshift;
  std::size_t peak_count = 0;
  double weight = 0.0;

  bool multimodal() const noexcept { return converged && !fwhm; }
};

PointResult evaluate_point(const ModelConfig& cfg);

enum class SweepAxis { atoms, pump, coupling, cav_dephasing, atom_dephasing, sigma };

const char* to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);
/// Copy of cfg with one axis set to value.
ModelConfig apply_axis(ModelConfig cfg, SweepAxis axis, double value);

struct AxisSpec {
  SweepAxis axis;
  std::vector<double> values;
};

struct SweepRecord {
  std::vector<double> parameters;  // one per axis, in axis order
  PointResult result;
};

struct SweepResult {
  std::vector<AxisSpec> axes;
  std::vector<SweepRecord> records;  // row-major over the axes
};

struct SweepOptions {
  unsigned workers = 0;  // 0 = hardware concurrency
  std::size_t max_points = 10000;
};

/// Runs `count` independent tasks on a bounded pool; task i writes only its own slot.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

SweepResult sweep(const ModelConfig& base, const std::vector<AxisSpec>& axes, const SweepOptions& opts = {});

struct CriticalPumpResult {
  enum class Status { bracketed, below_range };
  Status status = Status::bracketed;
  double critical_pump = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool monotone_prescan = true;
  int evaluations = 0;
  std::vector<std::pair<double, std::size_t>> evaluated;  // (R, peak count)
};

struct CriticalPumpOptions {
  int prescan_points = 8;
  int max_linear_scan = 400;
  unsigned workers = 0;
};

/// Smallest pump at which the spectrum has a single peak. Throws
/// PreconditionError("above-range") when R_max is still multimodal.
CriticalPumpResult critical_pump(const ModelConfig& templ, double r_min, double r_max, double tol_r,
                                 const CriticalPumpOptions& opts = {});

/// Uniform coupling g, or K spatial coupling clusters from g0.
struct CouplingSpec {
  int coupling_clusters = 1;  // K; 1 = uniform
  double g = 0.001;
  double g0 = 0.0013;
};

struct LinewidthStudy {
  double sigma = 0.0;
  double span_factor = 3.0;  // detunings on [-span_factor sigma, +span_factor sigma]
  double span = 0.0;         // > 0 overrides span_factor
  int frequency_clusters = 31;
  int composite_frequency_clusters = 11;
  CouplingSpec coupling;
  SystemRates rates;  // pump, gamma and dephasing rates used at every N
  IntegratorConfig solver;
  GridSpec grid;
};

struct LinewidthCurve {
  SweepResult sweep;
  std::optional<double> threshold_atoms;
};

LinewidthCurve linewidth_vs_atoms(const LinewidthStudy& study, std::span<const std::int64_t> atom_grid,
                                  const SweepOptions& opts = {});

struct CrossCorrelationPoint {
  double pump = 0.0;
  bool converged = false;
  std::string error;
  std::size_t clusters = 0;
  std::vector<complex> matrix;  // row-major M x M; diagonal holds the intra-cluster coherence
  complex traced{};             // <s+_first s-_central>

  complex at(std::size_t m, std::size_t j) const { return matrix[m * clusters + j]; }
};

struct CrossCorrelationScan {
  std::size_t first = 0;
  std::size_t central = 0;
  std::vector<CrossCorrelationPoint> points;
};

CrossCorrelationScan cross_correlation_scan(const ClusterEnsemble& e, const SystemRates& base,
                                            std::span<const double> pump_grid, const IntegratorConfig& solver,
                                            unsigned workers = 0);

}  // namespace superlase
