#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superlase/ensemble.hpp"
#include "superlase/linalg.hpp"
#include "superlase/moments.hpp"

namespace superlase {

/// Linear system d/dtau v = A v for v = (<a^dag(tau) a(0)>, <s+_m(tau) a(0)>...),
/// one atomic row per cluster.
struct RegressionSystem {
  ComplexMatrix matrix;
  std::vector<complex> initial_vector;

  std::size_t size() const noexcept { return initial_vector.size(); }
};

/// Builds A and v(0) from a converged steady state. The steady state is
/// rejected when its scaled residual exceeds `residual_tol`.
RegressionSystem assemble_regression(const MomentState& steady, const ClusterEnsemble& e, const SystemRates& r,
                                     double residual_tol = 1e-6);

/// Eigenvalues of A (all should have non-positive real part).
std::vector<complex> regression_eigenvalues(const RegressionSystem& sys);

struct Peak {
  double position = 0.0;
  double height = 0.0;
  double prominence = 0.0;
  std::size_t index = 0;
};

struct SpectrumResult {
  std::vector<double> frequencies;  // omega / kappa, rotating frame of the cavity
  std::vector<double> values;       // S(omega)
  std::vector<Peak> peaks;          // prominence >= prominence_frac * max S
  std::optional<double> fwhm;
  std::optional<double> lineshift;
  double weight = 0.0;  // (1 / 2 pi) * integral of S over the whole line
  std::size_t base_points = 0;
  int refinement_passes = 0;
  std::vector<std::string> warnings;
};

struct SpectrumOptions {
  bool refine = true;
  double refine_tolerance = 1e-3;    // midpoint interpolation error / peak height
  double area_tolerance = 1e-6;      // midpoint error * width / integrated weight
  std::size_t max_points = 200000;
  int max_passes = 80;
  double prominence_frac = 1e-3;
  double dominance_ratio = 10.0;
};

std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

/// 2001-point style grid spanning +-(1.5 max|Delta_m| + 10 Gamma).
std::vector<double> default_grid(const ClusterEnsemble& e, const SystemRates& r, std::size_t points = 2001);

/// S(omega) = 2 Re[(i omega - A)^-1 v(0)]_0 from one LU solve.
double spectral_density(const RegressionSystem& sys, double omega);

/// Resolvent evaluation on `grid` with adaptive refinement around peaks,
/// followed by peak, linewidth, lineshift and weight analysis.
SpectrumResult evaluate_spectrum(const RegressionSystem& sys, std::span<const double> grid,
                                 const SpectrumOptions& opts = {});

/// Strict local maxima (plateaus count once) with their topographic prominence.
std::vector<Peak> find_peaks(std::span<const double> x, std::span<const double> y);

std::size_t count_peaks(const SpectrumResult& s, double prominence_frac = 1e-3);

/// Full width at half maximum of the dominant peak; throws MultimodalError
/// when no peak dominates by `dominance_ratio`.
double fwhm(const SpectrumResult& s, double dominance_ratio = 10.0);

/// Position of the dominant peak relative to the cavity resonance.
double lineshift(const SpectrumResult& s, double dominance_ratio = 10.0);

/// Cross-check path: propagates v(tau) on a uniform grid of n_samples steps
/// up to t_max and sums 2 Re sum_k e^{-i omega tau_k} v_0(tau_k) dtau.
SpectrumResult time_domain_spectrum(const RegressionSystem& sys, double t_max, std::size_t n_samples,
                                    std::span<const double> grid);

/// Smallest |Re lambda| over the eigenvalues of A.
double slowest_decay_rate(const RegressionSystem& sys);

/// Trapezoid over the grid plus Gauss-Kronrod tails out to +-infinity.
double spectral_weight(const RegressionSystem& sys, std::span<const double> x, std::span<const double> y);

}  // namespace superlase
