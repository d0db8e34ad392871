#include <cmath>
#include <cstdio>

#include "commands.hpp"
#include "superlase/errors.hpp"

namespace superlase::cli {
namespace {

constexpr std::uint64_t kPresetSeed = 20230101;

RunConfig identical_atoms(std::int64_t n, double g, double gamma, double pump) {
  RunConfig c;
  c.model.ensemble.clusters = 1;
  c.model.ensemble.total_atoms = n;
  c.model.ensemble.coupling = g;
  c.model.ensemble.seed = kPresetSeed;
  c.model.rates.gamma = gamma;
  c.model.rates.pump = pump;
  return c;
}

RunConfig gaussian(int clusters, std::int64_t n, double sigma, double span, double g, double pump) {
  RunConfig c;
  auto& e = c.model.ensemble;
  e.clusters = clusters;
  e.total_atoms = n;
  e.sigma = sigma;
  e.span = span;
  e.coupling = g;
  e.seed = kPresetSeed;
  c.model.rates.gamma = 0.001;
  c.model.rates.pump = pump;
  return c;
}

RunConfig composite(std::int64_t n, double sigma, double span, double g0, double pump) {
  RunConfig c = gaussian(11, n, sigma, span, 0.0, pump);
  c.model.ensemble.mode = EnsembleMode::composite;
  c.model.ensemble.coupling_clusters = 5;
  c.model.ensemble.g0 = g0;
  return c;
}

std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a * std::pow(b / a, i / static_cast<double>(n - 1));
  v.front() = a;
  v.back() = b;
  return v;
}

// 1-2-5 sequence of atom numbers.
std::vector<double> atom_grid(double lo, double hi) {
  std::vector<double> v;
  for (double decade = 1.0; decade <= hi; decade *= 10.0)
    for (double m : {1.0, 2.0, 5.0})
      if (m * decade >= lo && m * decade <= hi) v.push_back(m * decade);
  return v;
}

std::string label(const char* fmt, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

}  // namespace

std::vector<std::string> preset_ids() {
  return {"fig2", "fig3", "fig4", "fig5a", "fig5b", "fig5c", "fig6", "fig7", "fig8", "fig9"};
}

std::vector<Job> preset_jobs(const std::string& id) {
  std::vector<Job> jobs;
  if (id == "fig2") {
    // Cuts through the (N, R) and (g, R) maps at R = 0.05 kappa.
    auto n_cut = identical_atoms(10, 0.002, 0.001, 0.05);
    n_cut.sweep.axes = {{SweepAxis::atoms, atom_grid(10, 1e6)}};
    jobs.push_back({"N_cut", Command::sweep, n_cut});
    for (auto [name, xi, nu] : {std::tuple{"g_cut", 0.0, 0.0}, std::tuple{"g_cut_xi", 1.0, 0.0},
                                std::tuple{"g_cut_xi_nu", 1.0, 0.01}}) {
      auto c = identical_atoms(50000, 0.002, 0.001, 0.05);
      c.model.rates.cav_dephasing = xi;
      c.model.rates.atom_dephasing = nu;
      c.sweep.axes = {{SweepAxis::coupling, log_grid(1e-4, 1e-2, 21)}};
      jobs.push_back({name, Command::sweep, c});
    }
  } else if (id == "fig3") {
    auto c = identical_atoms(50000, 0.001, 0.001, 0.01);
    c.sweep.axes = {{SweepAxis::cav_dephasing, log_grid(1e-3, 10.0, 9)},
                    {SweepAxis::atom_dephasing, log_grid(1e-5, 0.1, 9)}};
    jobs.push_back({"xi_nu", Command::sweep, c});
  } else if (id == "fig4") {
    for (std::int64_t n : {5, 500, 5000}) {
      auto c = gaussian(5, n, 1.0, 1.0, 0.002, 0.01);
      jobs.push_back({"N" + std::to_string(n), Command::spectrum, c});
    }
  } else if (id == "fig5a" || id == "fig5b" || id == "fig5c") {
    for (double r : {0.001, 0.01, 0.02, 0.05}) {
      auto c = gaussian(31, 10000, 0.1, 0.1, 0.002, r);
      if (id == "fig5b") {
        c.model.ensemble.imbalance_at = 0.027;
        c.model.ensemble.imbalance_fraction = 0.01;
      } else if (id == "fig5c") {
        c.model.ensemble.fluctuation = 0.1;
      }
      c.output.normalize = true;
      jobs.push_back({label("R%g", r), Command::spectrum, c});
    }
  } else if (id == "fig6") {
    for (std::int64_t n : {100, 10000}) {
      for (double sigma : {0.025, 0.05, 0.1, 0.2}) {
        auto c = gaussian(31, n, sigma, 3.0 * sigma, 0.001, 0.0);
        c.critical_pump.r_min = 1e-3;
        c.critical_pump.r_max = 0.5;
        c.critical_pump.tolerance = 0.01 * sigma;
        jobs.push_back({"N" + std::to_string(n) + label("_sigma%g", sigma), Command::critical_pump, c});
      }
    }
  } else if (id == "fig7") {
    for (double inv : {300.0, 30.0, 3.0}) {
      const double sigma = 1.0 / inv;
      auto c = gaussian(31, 1000, sigma, 3.0 * sigma, 0.001, 0.05);
      c.sweep.axes = {{SweepAxis::atoms, atom_grid(1000, 500000)}};
      jobs.push_back({label("sigma_kappa_over_%g", inv), Command::sweep, c});
    }
    auto c = composite(1000, 1.0 / 30.0, 0.1, 0.0013, 0.05);
    c.sweep.axes = {{SweepAxis::atoms, atom_grid(1000, 500000)}};
    jobs.push_back({"sigma_kappa_over_30_K5", Command::sweep, c});
  } else if (id == "fig8") {
    for (auto [name, xi, nu, r] : {std::tuple{"xi0", 0.0, 0.0, 0.05}, std::tuple{"xi1", 1.0, 0.0, 0.05},
                                   std::tuple{"xi0.01", 0.01, 0.0, 0.05}, std::tuple{"xi1_nu0.01", 1.0, 0.01, 0.005}}) {
      auto c = composite(1000, 1.0 / 30.0, 0.1, 0.0013, r);
      c.model.rates.cav_dephasing = xi;
      c.model.rates.atom_dephasing = nu;
      c.sweep.axes = {{SweepAxis::atoms, atom_grid(1000, 500000)}};
      jobs.push_back({name, Command::sweep, c});
    }
  } else if (id == "fig9") {
    auto c = gaussian(31, 10000, 0.1, 0.1, 0.002, 0.0);
    c.crosscorr.pumps = log_grid(1e-3, 0.2, 25);
    jobs.push_back({"crosscorr", Command::crosscorr, c});
  } else {
    throw PreconditionError("unknown preset '" + id + "'");
  }
  return jobs;
}

}  // namespace superlase::cli
