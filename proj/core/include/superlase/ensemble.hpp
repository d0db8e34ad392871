#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace superlase {

/// Decay, pump and dephasing rates. Everything is measured in units of the
/// cavity loss rate, so kappa is normally 1.
struct SystemRates {
  double kappa = 1.0;
  double gamma = 0.0;           // spontaneous emission
  double pump = 0.0;            // incoherent repump R
  double cav_dephasing = 0.0;   // xi
  double atom_dephasing = 0.0;  // nu

  void validate() const;

  friend bool operator==(const SystemRates&, const SystemRates&) = default;
};

/// A group of identical atoms sharing one detuning and one coupling.
struct Cluster {
  double detuning = 0.0;  // omega_c - omega_m
  double coupling = 0.0;
  std::int64_t population = 1;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// Immutable list of clusters. Clusters are kept in canonical order:
/// detuning ascending, then coupling descending.
class ClusterEnsemble {
 public:
  ClusterEnsemble() = default;
  explicit ClusterEnsemble(std::vector<Cluster> clusters, std::uint64_t seed = 0);

  std::span<const Cluster> clusters() const noexcept { return clusters_; }
  std::size_t size() const noexcept { return clusters_.size(); }
  bool empty() const noexcept { return clusters_.empty(); }
  const Cluster& operator[](std::size_t i) const { return clusters_[i]; }

  std::int64_t total_atoms() const noexcept { return total_atoms_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::vector<double> detunings() const;
  std::vector<double> couplings() const;
  std::vector<std::int64_t> populations() const;

  /// Copy with every detuning negated (re-sorted into canonical order).
  ClusterEnsemble reflected() const;

  friend bool operator==(const ClusterEnsemble&, const ClusterEnsemble&) = default;

 private:
  std::vector<Cluster> clusters_;
  std::int64_t total_atoms_ = 0;
  std::uint64_t seed_ = 0;
};

/// Largest-remainder apportionment of `total` units over non-negative
/// weights. Ties go to the entry closest to the middle of the list, then to
/// the lower index.
std::vector<std::int64_t> apportion(std::span<const double> weights, std::int64_t total);

/// M equidistant clusters on [-span_halfwidth, span_halfwidth] populated
/// with Gaussian weights of width sigma. M must be odd. Every cluster keeps
/// at least one atom, taken from the centre (or the largest pair once the
/// centre is no longer the mode).
ClusterEnsemble build_gaussian_clusters(int num_clusters, std::int64_t total_atoms, double sigma,
                                        double span_halfwidth, double coupling = 0.0);

/// Adds round(extra_fraction * N) atoms to the cluster nearest at_detuning.
ClusterEnsemble apply_imbalance(const ClusterEnsemble& e, double at_detuning,
                                double extra_fraction = 0.01);

/// Multiplies each population by (1 + amplitude * u), u uniform in [-1, 1].
ClusterEnsemble apply_fluctuations(const ClusterEnsemble& e, double amplitude, std::uint64_t seed);

/// Couplings g0 cos(pi k / 2K), k = 0..K-1: equidistant positions on [0, lambda/4).
std::vector<double> build_coupling_clusters(int num_couplings, double g0);

/// Cartesian product of frequency clusters and coupling values. Each
/// frequency cluster's atoms are split evenly over the couplings; empty
/// sub-clusters are dropped.
ClusterEnsemble compose(const ClusterEnsemble& freq, std::span<const double> couplings);

/// Population-weighted RMS coupling.
double effective_coupling(const ClusterEnsemble& e);

/// Plain-text table, one cluster per line: detuning,coupling,population.
void write_ensemble(std::ostream& os, const ClusterEnsemble& e);
ClusterEnsemble read_ensemble(std::istream& is);

}  // namespace superlase
