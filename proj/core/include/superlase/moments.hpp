#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "superlase/ensemble.hpp"

namespace superlase {

using complex = std::complex<double>;

/// Packing of the second-order moments into a flat real vector. Complex
/// entries are stored as consecutive (re, im) pairs:
///
///   [0]                      <a^dag a>
///   [1 + 2m]                 <a s+_m>                      m = 0..M-1
///   [1 + 2M + m]             <s+_am s-_am>                 m = 0..M-1
///   [1 + 3M + 2k]            <s+_am s-_bm>, a != b         one slot per cluster with N_m >= 2
///   [inter_base + 2p]        <s+_m s-_j>, m < j            p = row-major upper-triangle index
///
/// Only m < j inter-cluster pairs are stored; <s+_j s-_m> is the conjugate.
class MomentLayout {
 public:
  MomentLayout() = default;
  explicit MomentLayout(std::span<const std::int64_t> populations);

  std::size_t clusters() const noexcept { return clusters_; }
  std::size_t size() const noexcept { return size_; }

  static constexpr std::size_t photon() noexcept { return 0; }
  std::size_t field_atom(std::size_t m) const noexcept { return 1 + 2 * m; }
  std::size_t population(std::size_t m) const noexcept { return 1 + 2 * clusters_ + m; }
  bool has_intra(std::size_t m) const noexcept { return intra_offset_[m] != npos; }
  std::size_t intra(std::size_t m) const noexcept { return intra_offset_[m]; }
  std::size_t inter(std::size_t m, std::size_t j) const noexcept {
    return inter_base_ + 2 * (m * (2 * clusters_ - m - 1) / 2 + (j - m - 1));
  }
  std::size_t intra_count() const noexcept { return intra_count_; }
  std::size_t pair_count() const noexcept { return clusters_ * (clusters_ - 1) / 2; }

  /// Column labels matching the packing, e.g. "re_field_atom_3".
  std::vector<std::string> labels() const;

  friend bool operator==(const MomentLayout&, const MomentLayout&) = default;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t clusters_ = 0;
  std::size_t intra_count_ = 0;
  std::size_t inter_base_ = 1;
  std::size_t size_ = 1;
  std::vector<std::size_t> intra_offset_;
};

/// All first- and second-order moments of a clustered ensemble.
class MomentState {
 public:
  MomentState() = default;
  explicit MomentState(MomentLayout layout);
  MomentState(MomentLayout layout, std::vector<double> values);

  const MomentLayout& layout() const noexcept { return layout_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::size_t clusters() const noexcept { return layout_.clusters(); }

  double photon_number() const { return values_[0]; }
  complex field_atom(std::size_t m) const { return get(layout_.field_atom(m)); }
  double population(std::size_t m) const { return values_[layout_.population(m)]; }
  /// <sigma^z_m> = 2 <s+s-> - 1.
  double sigma_z(std::size_t m) const { return 2.0 * population(m) - 1.0; }
  /// Zero for single-atom clusters.
  complex intra_coherence(std::size_t m) const;
  /// <s+_m s-_j> for any m != j; the m > j half is reconstructed by conjugation.
  complex inter_coherence(std::size_t m, std::size_t j) const;

  void set_photon_number(double n) { values_[0] = n; }
  void set_field_atom(std::size_t m, complex z) { put(layout_.field_atom(m), z); }
  void set_population(std::size_t m, double p) { values_[layout_.population(m)] = p; }
  void set_intra_coherence(std::size_t m, complex z);
  void set_inter_coherence(std::size_t m, std::size_t j, complex z);

 private:
  complex get(std::size_t off) const { return {values_[off], values_[off + 1]}; }
  void put(std::size_t off, complex z) {
    values_[off] = z.real();
    values_[off + 1] = z.imag();
  }

  MomentLayout layout_;
  std::vector<double> values_;
};

/// Moments of N individually tracked atoms. Pair coherences are stored for
/// i < j only.
class PerAtomState {
 public:
  PerAtomState() = default;
  explicit PerAtomState(std::size_t atoms);
  PerAtomState(std::size_t atoms, std::vector<double> values);

  std::size_t atoms() const noexcept { return atoms_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double photon_number() const { return values_[0]; }
  complex field_atom(std::size_t i) const;
  double population(std::size_t i) const;
  complex pair_coherence(std::size_t i, std::size_t j) const;
  std::size_t pair_count() const noexcept { return atoms_ * (atoms_ - 1) / 2; }

  void set_photon_number(double n) { values_[0] = n; }
  void set_field_atom(std::size_t i, complex z);
  void set_population(std::size_t i, double p);
  void set_pair_coherence(std::size_t i, std::size_t j, complex z);

  static std::size_t dimension(std::size_t atoms) noexcept {
    return 1 + 3 * atoms + atoms * (atoms - 1);
  }
  std::size_t field_offset(std::size_t i) const noexcept { return 1 + 2 * i; }
  std::size_t population_offset(std::size_t i) const noexcept { return 1 + 2 * atoms_ + i; }
  std::size_t pair_offset(std::size_t i, std::size_t j) const noexcept {
    return 1 + 3 * atoms_ + 2 * (i * (2 * atoms_ - i - 1) / 2 + (j - i - 1));
  }

 private:
  std::size_t atoms_ = 0;
  std::vector<double> values_;
};

/// Closed clustered moment equations with cavity and atomic dephasing.
/// Evaluation is pure; one instance may be shared between threads.
class ClusteredSystem {
 public:
  ClusteredSystem(const ClusterEnsemble& e, const SystemRates& r);

  const MomentLayout& layout() const noexcept { return layout_; }
  std::size_t dimension() const noexcept { return layout_.size(); }
  const SystemRates& rates() const noexcept { return rates_; }

  void operator()(std::span<const double> y, std::span<double> dydt) const;

  /// Everything zero except populations at the uncoupled fixed point R/(R+Gamma).
  MomentState initial_state() const;

 private:
  MomentLayout layout_;
  SystemRates rates_;
  std::vector<double> detuning_;
  std::vector<double> coupling_;
  std::vector<double> weight_;  // N_m as double
};

/// Per-atom moment equations. Intended for small N (oracle use).
class PerAtomSystem {
 public:
  PerAtomSystem(std::vector<double> detunings, std::vector<double> couplings, const SystemRates& r);

  std::size_t atoms() const noexcept { return detuning_.size(); }
  std::size_t dimension() const noexcept { return PerAtomState::dimension(atoms()); }

  void operator()(std::span<const double> y, std::span<double> dydt) const;

 private:
  std::vector<double> detuning_;
  std::vector<double> coupling_;
  SystemRates rates_;
};

MomentState rhs_clustered(const MomentState& state, const ClusterEnsemble& e, const SystemRates& r);
PerAtomState rhs_per_atom(const PerAtomState& state, std::span<const double> detunings,
                          std::span<const double> couplings, const SystemRates& r);

inline constexpr std::int64_t kMaxExpandAtoms = 200;

/// Every atom of cluster m inherits the cluster's moments.
PerAtomState expand(const ClusterEnsemble& e, const MomentState& s);
/// Inverse of expand: cluster moments as averages over member atoms.
MomentState contract(const ClusterEnsemble& e, const PerAtomState& s);

std::vector<double> expanded_detunings(const ClusterEnsemble& e);
std::vector<double> expanded_couplings(const ClusterEnsemble& e);

/// Default tolerance for physicality checks: 1e-6 * max(1, <a^dag a>).
double physical_tolerance(const MomentState& s);
/// Empty string when populations and photon number are within bounds.
std::string physicality_violation(const MomentState& s, double tol);

/// One header row of labels, one row of values.
void write_moment_state(std::ostream& os, const MomentState& s);
MomentState read_moment_state(std::istream& is, const MomentLayout& layout);

}  // namespace superlase
