#include "superlase/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "superlase/errors.hpp"

namespace superlase {

namespace {

bool canonical_less(const Cluster& a, const Cluster& b) {
  if (a.detuning != b.detuning) return a.detuning < b.detuning;
  return a.coupling > b.coupling;
}

// Uniform double in [-1, 1] from a 64-bit engine, independent of the
// standard library's distribution implementation.
double symmetric_unit(std::mt19937_64& gen) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

}  // namespace

void SystemRates::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw PreconditionError("kappa must be positive");
  for (double r : {gamma, pump, cav_dephasing, atom_dephasing}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw PreconditionError("rates must be finite and >= 0");
  }
}

ClusterEnsemble::ClusterEnsemble(std::vector<Cluster> clusters, std::uint64_t seed)
    : clusters_(std::move(clusters)), seed_(seed) {
  for (const auto& c : clusters_) {
    if (c.population < 1) throw PreconditionError("cluster population must be >= 1");
    if (!(c.coupling >= 0.0) || !std::isfinite(c.coupling))
      throw PreconditionError("cluster coupling must be finite and >= 0");
    if (!std::isfinite(c.detuning)) throw PreconditionError("cluster detuning must be finite");
    total_atoms_ += c.population;
  }
  std::stable_sort(clusters_.begin(), clusters_.end(), canonical_less);
  for (std::size_t i = 1; i < clusters_.size(); ++i) {
    const auto& a = clusters_[i - 1];
    const auto& b = clusters_[i];
    if (a.detuning == b.detuning && a.coupling == b.coupling)
      throw PreconditionError("duplicate (detuning, coupling) cluster; merge populations instead");
  }
}

std::vector<double> ClusterEnsemble::detunings() const {
  std::vector<double> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(c.detuning);
  return out;
}

std::vector<double> ClusterEnsemble::couplings() const {
  std::vector<double> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(c.coupling);
  return out;
}

std::vector<std::int64_t> ClusterEnsemble::populations() const {
  std::vector<std::int64_t> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(c.population);
  return out;
}

ClusterEnsemble ClusterEnsemble::reflected() const {
  auto cs = clusters_;
  for (auto& c : cs) c.detuning = -c.detuning;
  return ClusterEnsemble(std::move(cs), seed_);
}

std::vector<std::int64_t> apportion(std::span<const double> weights, std::int64_t total) {
  const std::size_t n = weights.size();
  if (n == 0) throw PreconditionError("apportion: no weights");
  if (total < 0) throw PreconditionError("apportion: negative total");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("apportion: bad weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw PreconditionError("apportion: weights sum to zero");

  std::vector<std::int64_t> out(n);
  std::vector<double> remainder(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::int64_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(out[i]);
    assigned += out[i];
  }
  // Floating-point floors can overshoot by a unit in pathological cases.
  while (assigned > total) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double mid = 0.5 * static_cast<double>(n - 1);
  constexpr double tie = 1e-12;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(remainder[a] - remainder[b]) > tie) return remainder[a] > remainder[b];
    const double da = std::abs(static_cast<double>(a) - mid);
    const double db = std::abs(static_cast<double>(b) - mid);
    if (da != db) return da < db;
    return a < b;
  });
  for (std::int64_t k = 0; assigned < total; ++k, ++assigned)
    ++out[order[static_cast<std::size_t>(k) % n]];
  return out;
}

ClusterEnsemble build_gaussian_clusters(int num_clusters, std::int64_t total_atoms, double sigma,
                                        double span_halfwidth, double coupling) {
  if (num_clusters < 1 || num_clusters % 2 == 0)
    throw PreconditionError("number of clusters must be odd and >= 1 (a centre cluster is required)");
  if (total_atoms < num_clusters) throw PreconditionError("need at least one atom per cluster");
  if (!(sigma >= 0.0)) throw PreconditionError("sigma must be >= 0");
  if (num_clusters > 1 && !(span_halfwidth > 0.0))
    throw PreconditionError("span half-width must be positive");

  const auto m = static_cast<std::size_t>(num_clusters);
  const std::size_t centre = m / 2;
  std::vector<double> detuning(m, 0.0);
  std::vector<double> weight(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (m > 1) {
      // Symmetric construction keeps detuning[i] == -detuning[m-1-i] exactly.
      const double k = static_cast<double>(static_cast<std::ptrdiff_t>(i) -
                                           static_cast<std::ptrdiff_t>(centre));
      detuning[i] = span_halfwidth * k / static_cast<double>(centre);
    }
    if (sigma > 0.0) {
      const double x = detuning[i] / sigma;
      weight[i] = std::exp(-0.5 * x * x);
    } else {
      weight[i] = (i == centre) ? 1.0 : 0.0;
    }
  }
  // Symmetric weights are forced bit-identical so ties are resolved in pairs.
  for (std::size_t i = 0; i < centre; ++i) weight[m - 1 - i] = weight[i];

  auto pop = apportion(weight, total_atoms);

  // A pair split by a single leftover unit goes back to the centre cluster.
  for (std::size_t i = 0; i < centre; ++i) {
    auto& lo = pop[i];
    auto& hi = pop[m - 1 - i];
    if (lo != hi) {
      const std::int64_t excess = std::abs(lo - hi);
      (lo > hi ? lo : hi) -= excess;
      pop[centre] += excess;
    }
  }
  // Floor every cluster at one atom. The deficit comes from the centre while it
  // stays the most populated cluster, otherwise from the most populated pair.
  // Populations are symmetric here, so empty clusters come in pairs.
  for (std::size_t i = 0; i < centre; ++i) {
    while (pop[i] < 1) {
      std::size_t donor = centre;
      std::int64_t best_pair = 0;
      for (std::size_t j = 0; j < centre; ++j) {
        if (pop[j] > best_pair) {
          best_pair = pop[j];
          donor = j;
        }
      }
      if (pop[centre] - 2 >= best_pair - 1 && pop[centre] > 2) {
        pop[centre] -= 2;
      } else if (donor != centre && best_pair > 1) {
        --pop[donor];
        --pop[m - 1 - donor];
      } else {
        throw PreconditionError("too few atoms to give every cluster one atom");
      }
      ++pop[i];
      ++pop[m - 1 - i];
    }
  }

  std::vector<Cluster> cs(m);
  for (std::size_t i = 0; i < m; ++i) cs[i] = Cluster{detuning[i], coupling, pop[i]};
  return ClusterEnsemble(std::move(cs));
}

ClusterEnsemble apply_imbalance(const ClusterEnsemble& e, double at_detuning, double extra_fraction) {
  if (e.empty()) throw PreconditionError("apply_imbalance: empty ensemble");
  if (!(extra_fraction >= 0.0)) throw PreconditionError("imbalance fraction must be >= 0");
  const auto extra =
      static_cast<std::int64_t>(std::llround(extra_fraction * static_cast<double>(e.total_atoms())));
  std::vector<Cluster> cs(e.clusters().begin(), e.clusters().end());
  std::size_t best = 0;
  for (std::size_t i = 1; i < cs.size(); ++i) {
    if (std::abs(cs[i].detuning - at_detuning) < std::abs(cs[best].detuning - at_detuning)) best = i;
  }
  cs[best].population += extra;
  return ClusterEnsemble(std::move(cs), e.seed());
}

ClusterEnsemble apply_fluctuations(const ClusterEnsemble& e, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0) || !(amplitude < 1.0))
    throw PreconditionError("fluctuation amplitude must lie in [0, 1)");
  std::mt19937_64 gen(seed);
  std::vector<Cluster> cs(e.clusters().begin(), e.clusters().end());
  for (auto& c : cs) {
    const double u = symmetric_unit(gen);
    const double scaled = static_cast<double>(c.population) * (1.0 + amplitude * u);
    c.population = std::max<std::int64_t>(1, std::llround(scaled));
  }
  return ClusterEnsemble(std::move(cs), seed);
}

std::vector<double> build_coupling_clusters(int num_couplings, double g0) {
  if (num_couplings < 1) throw PreconditionError("need at least one coupling cluster");
  if (!(g0 > 0.0)) throw PreconditionError("g0 must be positive");
  const double pi = std::acos(-1.0);
  std::vector<double> g(static_cast<std::size_t>(num_couplings));
  for (int k = 0; k < num_couplings; ++k)
    g[static_cast<std::size_t>(k)] = g0 * std::cos(pi * k / (2.0 * num_couplings));
  return g;
}

ClusterEnsemble compose(const ClusterEnsemble& freq, std::span<const double> couplings) {
  if (freq.empty() || couplings.empty()) throw PreconditionError("compose: empty input");
  for (double g : couplings)
    if (!(g > 0.0)) throw PreconditionError("compose: couplings must be positive");
  const std::vector<double> equal(couplings.size(), 1.0);
  std::vector<Cluster> cs;
  cs.reserve(freq.size() * couplings.size());
  for (const auto& c : freq.clusters()) {
    const auto split = apportion(equal, c.population);
    for (std::size_t k = 0; k < couplings.size(); ++k) {
      if (split[k] > 0) cs.push_back(Cluster{c.detuning, couplings[k], split[k]});
    }
  }
  return ClusterEnsemble(std::move(cs), freq.seed());
}

double effective_coupling(const ClusterEnsemble& e) {
  if (e.empty()) throw PreconditionError("effective_coupling: empty ensemble");
  double num = 0.0;
  for (const auto& c : e.clusters())
    num += static_cast<double>(c.population) * c.coupling * c.coupling;
  return std::sqrt(num / static_cast<double>(e.total_atoms()));
}

void write_ensemble(std::ostream& os, const ClusterEnsemble& e) {
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "# seed=" << e.seed() << '\n';
  os << "detuning,coupling,population\n";
  for (const auto& c : e.clusters())
    os << c.detuning << ',' << c.coupling << ',' << c.population << '\n';
  os.precision(old_prec);
}

ClusterEnsemble read_ensemble(std::istream& is) {
  std::uint64_t seed = 0;
  std::vector<Cluster> cs;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# seed=", 0) == 0) {
      seed = std::stoull(line.substr(7));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != "detuning,coupling,population")
        throw PreconditionError("ensemble table: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    Cluster c;
    char sep1 = 0, sep2 = 0;
    if (!(row >> c.detuning >> sep1 >> c.coupling >> sep2 >> c.population) || sep1 != ',' ||
        sep2 != ',')
      throw PreconditionError("ensemble table: malformed row '" + line + "'");
    cs.push_back(c);
  }
  if (!header_seen) throw PreconditionError("ensemble table: missing header");
  return ClusterEnsemble(std::move(cs), seed);
}

}  // namespace superlase
