#include "superlase/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "superlase/errors.hpp"
#include "superlase/solver.hpp"

namespace superlase {

namespace {

constexpr complex I{0.0, 1.0};

// Index of the highest peak if it dominates every other one.
std::optional<std::size_t> dominant_peak(const std::vector<Peak>& peaks, double ratio) {
  if (peaks.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < peaks.size(); ++k)
    if (peaks[k].height > peaks[best].height) best = k;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    if (k != best && peaks[best].height < ratio * peaks[k].prominence) return std::nullopt;
  }
  return best;
}

double half_max_width(std::span<const double> x, std::span<const double> y, std::size_t peak) {
  const double half = 0.5 * y[peak];
  std::size_t l = peak;
  while (l > 0 && y[l - 1] > half) --l;
  std::size_t r = peak;
  while (r + 1 < y.size() && y[r + 1] > half) ++r;
  if (l == 0 || r + 1 == y.size())
    throw PreconditionError("spectrum grid does not contain both half-maximum crossings");
  auto cross = [&](std::size_t a, std::size_t b) {
    // Linear interpolation between a (below half) and b (above half).
    const double t = (half - y[a]) / (y[b] - y[a]);
    return x[a] + t * (x[b] - x[a]);
  };
  return cross(r + 1, r) - cross(l - 1, l);
}

// Vertex of the parabola through three neighbouring samples.
double parabolic_vertex(std::span<const double> x, std::span<const double> y, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return x[i];
  const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
  const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curv = (d12 - d01) / (x2 - x0);
  if (!(curv < 0.0)) return x1;
  const double v = 0.5 * (x0 + x1) - 0.5 * d01 / curv;
  return std::clamp(v, x0, x2);
}

std::vector<Peak> significant(const std::vector<Peak>& peaks, double max_value, double frac) {
  std::vector<Peak> out;
  for (const auto& p : peaks)
    if (p.prominence >= frac * max_value) out.push_back(p);
  return out;
}

double max_of(std::span<const double> y) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : y) m = std::max(m, v);
  return m;
}

void analyse(SpectrumResult& s, const SpectrumOptions& opts) {
  const auto all = find_peaks(s.frequencies, s.values);
  const double vmax = max_of(s.values);
  s.peaks = significant(all, vmax, opts.prominence_frac);
  s.fwhm.reset();
  s.lineshift.reset();
  if (const auto dom = dominant_peak(all, opts.dominance_ratio)) {
    const auto idx = all[*dom].index;
    try {
      s.fwhm = half_max_width(s.frequencies, s.values, idx);
    } catch (const PreconditionError& e) {
      s.warnings.emplace_back(e.what());
    }
    s.lineshift = parabolic_vertex(s.frequencies, s.values, idx);
  }
}

}  // namespace

RegressionSystem assemble_regression(const MomentState& steady, const ClusterEnsemble& e, const SystemRates& r,
                                     double residual_tol) {
  const ClusteredSystem sys(e, r);
  if (!(steady.layout() == sys.layout())) throw PreconditionError("steady state does not match ensemble");
  std::vector<double> dydt(sys.dimension());
  sys(steady.values(), dydt);
  const double res = scaled_residual(steady.values(), dydt);
  if (!(res <= residual_tol)) {
    std::ostringstream msg;
    msg << "moment state is not a converged steady state (scaled residual " << res << " > " << residual_tol << ")";
    throw PreconditionError(msg.str());
  }

  const std::size_t M = e.size();
  RegressionSystem out;
  out.matrix = ComplexMatrix(M + 1, M + 1);
  out.initial_vector.resize(M + 1);
  auto& A = out.matrix;
  A(0, 0) = -(r.kappa + r.cav_dephasing) / 2.0;
  out.initial_vector[0] = steady.photon_number();
  const double atom_decay = (r.gamma + r.pump + r.atom_dephasing) / 2.0;
  for (std::size_t m = 0; m < M; ++m) {
    const double g = e[m].coupling;
    A(0, m + 1) = I * g * static_cast<double>(e[m].population);
    A(m + 1, 0) = -I * g * steady.sigma_z(m);
    A(m + 1, m + 1) = -(atom_decay + I * e[m].detuning);
    out.initial_vector[m + 1] = steady.field_atom(m);
  }
  return out;
}

std::vector<complex> regression_eigenvalues(const RegressionSystem& sys) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXcd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = sys.matrix(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(a, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue computation failed");
  std::vector<complex> out(solver.eigenvalues().begin(), solver.eigenvalues().end());
  return out;
}

double slowest_decay_rate(const RegressionSystem& sys) {
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& l : regression_eigenvalues(sys)) slowest = std::min(slowest, std::abs(l.real()));
  return slowest;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw PreconditionError("uniform_grid needs hi > lo and >= 2 points");
  std::vector<double> g(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  // Odd symmetric grids contain omega = 0 exactly.
  if (lo == -hi && points % 2 == 1) g[points / 2] = 0.0;
  return g;
}

std::vector<double> default_grid(const ClusterEnsemble& e, const SystemRates& r, std::size_t points) {
  double max_detuning = 0.0;
  for (const auto& c : e.clusters()) max_detuning = std::max(max_detuning, std::abs(c.detuning));
  double half = 1.5 * max_detuning + 10.0 * r.gamma;
  if (!(half > 0.0)) half = 10.0 * std::max(r.gamma + r.pump + r.atom_dephasing, 1e-3 * r.kappa);
  return uniform_grid(-half, half, points);
}

double spectral_density(const RegressionSystem& sys, double omega) {
  const std::size_t n = sys.size();
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = -sys.matrix(i, j);
    m(i, i) += I * omega;
  }
  try {
    const LuDecomposition<complex> lu(std::move(m));
    return 2.0 * lu.solve(sys.initial_vector)[0].real();
  } catch (const SingularMatrixError& err) {
    std::ostringstream msg;
    msg << "resolvent is singular at omega = " << omega << " (undamped mode): " << err.what();
    throw SingularMatrixError(msg.str(), err.pivot());
  }
}

std::vector<Peak> find_peaks(std::span<const double> x, std::span<const double> y) {
  std::vector<Peak> peaks;
  const std::size_t n = y.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (y[i] > y[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && y[j + 1] == y[i]) ++j;
      if (j + 1 < n && y[j + 1] < y[i]) {
        Peak p;
        p.index = (i + j) / 2;
        p.position = x[p.index];
        p.height = y[p.index];
        peaks.push_back(p);
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  for (auto& p : peaks) {
    double left_min = p.height;
    for (std::size_t k = p.index; k-- > 0;) {
      if (y[k] > p.height) break;
      left_min = std::min(left_min, y[k]);
    }
    double right_min = p.height;
    for (std::size_t k = p.index + 1; k < n; ++k) {
      if (y[k] > p.height) break;
      right_min = std::min(right_min, y[k]);
    }
    p.prominence = p.height - std::max(left_min, right_min);
  }
  return peaks;
}

double spectral_weight(const RegressionSystem& sys, std::span<const double> x, std::span<const double> y) {
  double interior = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) interior += 0.5 * (y[i] + y[i + 1]) * (x[i + 1] - x[i]);

  // omega = edge +- scale * tan(theta) maps each tail onto [0, pi/2).
  const double scale = std::max(x.back() - x.front(), 1.0);
  auto tail = [&](double edge, double sign) {
    auto integrand = [&](double theta) {
      const double t = std::tan(theta);
      const double c = std::cos(theta);
      return spectral_density(sys, edge + sign * scale * t) * scale / (c * c);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0,
                                                                        std::numbers::pi / 2.0, 12, 1e-10);
  };
  const double total = interior + tail(x.front(), -1.0) + tail(x.back(), 1.0);
  return total / (2.0 * std::numbers::pi);
}

SpectrumResult evaluate_spectrum(const RegressionSystem& sys, std::span<const double> grid,
                                 const SpectrumOptions& opts) {
  if (grid.empty()) throw PreconditionError("frequency grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw PreconditionError("frequency grid must be strictly increasing");

  SpectrumResult s;
  s.base_points = grid.size();
  std::vector<double> x(grid.begin(), grid.end());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = spectral_density(sys, x[i]);
  std::vector<char> ok(x.size(), 0);  // ok[i]: interval (i, i+1) already resolved

  for (int pass = 0; opts.refine && pass < opts.max_passes && x.size() > 1; ++pass) {
    const double vmax = max_of(y);
    if (!(vmax > 0.0)) break;
    const auto peaks = significant(find_peaks(x, y), vmax, opts.prominence_frac);
    if (peaks.empty()) break;

    // Intervals near each peak, with the height used to judge them.
    std::vector<double> judge(x.size(), 0.0);
    for (const auto& p : peaks) {
      const double floor = 0.02 * p.height;
      std::size_t lo = p.index, hi = p.index;
      while (lo > 0 && y[lo - 1] >= floor && y[lo - 1] <= p.height) --lo;
      while (hi + 1 < y.size() && y[hi + 1] >= floor && y[hi + 1] <= p.height) ++hi;
      if (lo > 0) --lo;
      if (hi + 1 < y.size()) ++hi;
      for (std::size_t i = lo; i < hi; ++i) judge[i] = std::max(judge[i], p.height);
    }

    // Far tails are judged by their contribution to the integrated weight.
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) area += 0.5 * (std::abs(y[i]) + std::abs(y[i + 1])) * (x[i + 1] - x[i]);
    const double area_tol = opts.area_tolerance * area;

    std::vector<std::pair<std::size_t, std::pair<double, double>>> inserts;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      if (ok[i]) continue;
      const double xm = 0.5 * (x[i] + x[i + 1]);
      if (!(xm > x[i] && xm < x[i + 1]) || (x[i + 1] - x[i]) < 1e-15 * std::max(1.0, std::abs(xm))) {
        ok[i] = 1;
        continue;
      }
      const double ym = spectral_density(sys, xm);
      const double dev = std::abs(ym - 0.5 * (y[i] + y[i + 1]));
      if ((judge[i] > 0.0 && dev > opts.refine_tolerance * judge[i]) || dev * (x[i + 1] - x[i]) > area_tol)
        inserts.push_back({i, {xm, ym}});
      else
        ok[i] = 1;
    }
    s.refinement_passes = pass + 1;
    if (inserts.empty()) break;

    std::vector<double> nx, ny;
    std::vector<char> nok;
    nx.reserve(x.size() + inserts.size());
    ny.reserve(x.size() + inserts.size());
    nok.reserve(x.size() + inserts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      nx.push_back(x[i]);
      ny.push_back(y[i]);
      if (k < inserts.size() && inserts[k].first == i) {
        nok.push_back(0);
        nx.push_back(inserts[k].second.first);
        ny.push_back(inserts[k].second.second);
        nok.push_back(0);
        ++k;
      } else {
        nok.push_back(ok[i]);
      }
    }
    x.swap(nx);
    y.swap(ny);
    ok.swap(nok);
    if (x.size() >= opts.max_points) {
      s.warnings.emplace_back("refinement stopped at the point limit");
      break;
    }
  }

  s.frequencies = std::move(x);
  s.values = std::move(y);
  analyse(s, opts);
  s.weight = s.frequencies.size() > 1 ? spectral_weight(sys, s.frequencies, s.values) : 0.0;
  return s;
}

std::size_t count_peaks(const SpectrumResult& s, double prominence_frac) {
  if (!(prominence_frac > 0.0 && prominence_frac < 1.0))
    throw PreconditionError("prominence fraction must lie in (0, 1)");
  const double vmax = max_of(s.values);
  if (!(vmax > 0.0)) return 0;
  return significant(find_peaks(s.frequencies, s.values), vmax, prominence_frac).size();
}

double fwhm(const SpectrumResult& s, double dominance_ratio) {
  const auto peaks = find_peaks(s.frequencies, s.values);
  const auto dom = dominant_peak(peaks, dominance_ratio);
  if (!dom) throw MultimodalError("spectrum is multimodal: no single dominant peak");
  return half_max_width(s.frequencies, s.values, peaks[*dom].index);
}

double lineshift(const SpectrumResult& s, double dominance_ratio) {
  const auto peaks = find_peaks(s.frequencies, s.values);
  const auto dom = dominant_peak(peaks, dominance_ratio);
  if (!dom) throw MultimodalError("spectrum is multimodal: no single dominant peak");
  return parabolic_vertex(s.frequencies, s.values, peaks[*dom].index);
}

SpectrumResult time_domain_spectrum(const RegressionSystem& sys, double t_max, std::size_t n_samples,
                                    std::span<const double> grid) {
  if (!(t_max > 0.0) || n_samples < 2) throw PreconditionError("time-domain spectrum needs t_max > 0, >= 2 samples");
  if (grid.empty()) throw PreconditionError("frequency grid is empty");
  const std::size_t n = sys.size();
  const double dt = t_max / static_cast<double>(n_samples);

  SpectrumResult s;
  s.base_points = grid.size();
  const double slowest = slowest_decay_rate(sys);
  const double coverage = slowest * t_max;
  if (coverage < 20.0) {
    std::ostringstream msg;
    msg << "t_max covers only " << coverage << " decay times of the slowest mode";
    s.warnings.push_back(msg.str());
  }

  // One-step propagator exp(A dt), column by column, from the ODE integrator.
  const RhsFunction rhs = [&](std::span<const double> v, std::span<double> dv) {
    for (std::size_t i = 0; i < n; ++i) {
      complex acc{};
      for (std::size_t j = 0; j < n; ++j) acc += sys.matrix(i, j) * complex{v[2 * j], v[2 * j + 1]};
      dv[2 * i] = acc.real();
      dv[2 * i + 1] = acc.imag();
    }
  };
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-13;
  cfg.abs_tol = 1e-15;
  cfg.max_step = dt;
  ComplexMatrix prop(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(2 * n, 0.0);
    e[2 * j] = 1.0;
    const auto traj = integrate(rhs, e, dt, cfg);
    const auto& y = traj.samples.back().y;
    for (std::size_t i = 0; i < n; ++i) prop(i, j) = {y[2 * i], y[2 * i + 1]};
  }

  std::vector<complex> corr(n_samples + 1);
  std::vector<complex> v = sys.initial_vector;
  corr[0] = v[0];
  for (std::size_t k = 1; k <= n_samples; ++k) {
    v = prop.multiply(v);
    corr[k] = v[0];
  }
  const auto av0 = sys.matrix.multiply(sys.initial_vector)[0];
  const auto avT = sys.matrix.multiply(v)[0];

  s.frequencies.assign(grid.begin(), grid.end());
  s.values.resize(grid.size());
  for (std::size_t w = 0; w < grid.size(); ++w) {
    const double omega = grid[w];
    const complex step = std::exp(-I * omega * dt);
    complex phase{1.0, 0.0};
    complex sum = 0.5 * corr[0];
    for (std::size_t k = 1; k <= n_samples; ++k) {
      phase *= step;
      sum += (k == n_samples ? 0.5 : 1.0) * phase * corr[k];
    }
    sum *= dt;
    // Euler-Maclaurin end corrections, g(tau) = e^{-i omega tau} v_0(tau).
    const complex d0 = -I * omega * corr[0] + av0;
    const complex dT = phase * (-I * omega * corr[n_samples] + avT);
    sum += dt * dt / 12.0 * (d0 - dT);
    s.values[w] = 2.0 * sum.real();
  }
  SpectrumOptions opts;
  analyse(s, opts);
  if (s.frequencies.size() > 1) {
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < s.frequencies.size(); ++i)
      integral += 0.5 * (s.values[i] + s.values[i + 1]) * (s.frequencies[i + 1] - s.frequencies[i]);
    s.weight = integral / (2.0 * std::numbers::pi);
  }
  return s;
}

}  // namespace superlase
