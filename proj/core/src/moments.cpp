#include "superlase/moments.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "superlase/errors.hpp"

namespace superlase {

namespace {

constexpr complex I{0.0, 1.0};

inline complex load(std::span<const double> y, std::size_t off) { return {y[off], y[off + 1]}; }
inline void store(std::span<double> y, std::size_t off, complex z) {
  y[off] = z.real();
  y[off + 1] = z.imag();
}

void check_dims(std::size_t expected, std::size_t y, std::size_t dydt) {
  if (y != expected || dydt != expected)
    throw PreconditionError("state dimension " + std::to_string(y) + " does not match system dimension " +
                            std::to_string(expected));
}

}  // namespace

// ---------------------------------------------------------------- layout

MomentLayout::MomentLayout(std::span<const std::int64_t> populations)
    : clusters_(populations.size()), intra_offset_(populations.size(), npos) {
  std::size_t off = 1 + 3 * clusters_;
  for (std::size_t m = 0; m < clusters_; ++m) {
    if (populations[m] < 1) throw PreconditionError("cluster population must be >= 1");
    if (populations[m] >= 2) {
      intra_offset_[m] = off;
      off += 2;
      ++intra_count_;
    }
  }
  inter_base_ = off;
  size_ = off + 2 * pair_count();
}

std::vector<std::string> MomentLayout::labels() const {
  std::vector<std::string> out(size_);
  out[0] = "photon_number";
  for (std::size_t m = 0; m < clusters_; ++m) {
    const auto s = std::to_string(m + 1);
    out[field_atom(m)] = "re_field_atom_" + s;
    out[field_atom(m) + 1] = "im_field_atom_" + s;
    out[population(m)] = "population_" + s;
    if (has_intra(m)) {
      out[intra(m)] = "re_intra_" + s;
      out[intra(m) + 1] = "im_intra_" + s;
    }
    for (std::size_t j = m + 1; j < clusters_; ++j) {
      const auto p = s + "_" + std::to_string(j + 1);
      out[inter(m, j)] = "re_inter_" + p;
      out[inter(m, j) + 1] = "im_inter_" + p;
    }
  }
  return out;
}

// ---------------------------------------------------------------- MomentState

MomentState::MomentState(MomentLayout layout)
    : layout_(std::move(layout)), values_(layout_.size(), 0.0) {}

MomentState::MomentState(MomentLayout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.size()) throw PreconditionError("moment vector does not match layout");
}

complex MomentState::intra_coherence(std::size_t m) const {
  return layout_.has_intra(m) ? get(layout_.intra(m)) : complex{};
}

complex MomentState::inter_coherence(std::size_t m, std::size_t j) const {
  if (m == j) throw PreconditionError("inter_coherence needs two distinct clusters");
  return m < j ? get(layout_.inter(m, j)) : std::conj(get(layout_.inter(j, m)));
}

void MomentState::set_intra_coherence(std::size_t m, complex z) {
  if (!layout_.has_intra(m)) throw PreconditionError("single-atom cluster has no intra-cluster coherence");
  put(layout_.intra(m), z);
}

void MomentState::set_inter_coherence(std::size_t m, std::size_t j, complex z) {
  if (m == j) throw PreconditionError("inter_coherence needs two distinct clusters");
  if (m < j)
    put(layout_.inter(m, j), z);
  else
    put(layout_.inter(j, m), std::conj(z));
}

// ---------------------------------------------------------------- PerAtomState

PerAtomState::PerAtomState(std::size_t atoms) : atoms_(atoms), values_(dimension(atoms), 0.0) {}

PerAtomState::PerAtomState(std::size_t atoms, std::vector<double> values)
    : atoms_(atoms), values_(std::move(values)) {
  if (values_.size() != dimension(atoms_)) throw PreconditionError("per-atom vector has wrong size");
}

complex PerAtomState::field_atom(std::size_t i) const { return load(values_, field_offset(i)); }
double PerAtomState::population(std::size_t i) const { return values_[population_offset(i)]; }
complex PerAtomState::pair_coherence(std::size_t i, std::size_t j) const {
  if (i == j) throw PreconditionError("pair_coherence needs two distinct atoms");
  return i < j ? load(values_, pair_offset(i, j)) : std::conj(load(values_, pair_offset(j, i)));
}
void PerAtomState::set_field_atom(std::size_t i, complex z) { store(values_, field_offset(i), z); }
void PerAtomState::set_population(std::size_t i, double p) { values_[population_offset(i)] = p; }
void PerAtomState::set_pair_coherence(std::size_t i, std::size_t j, complex z) {
  if (i == j) throw PreconditionError("pair_coherence needs two distinct atoms");
  if (i < j)
    store(values_, pair_offset(i, j), z);
  else
    store(values_, pair_offset(j, i), std::conj(z));
}

// ---------------------------------------------------------------- clustered RHS

ClusteredSystem::ClusteredSystem(const ClusterEnsemble& e, const SystemRates& r)
    : rates_(r), detuning_(e.detunings()), coupling_(e.couplings()) {
  r.validate();
  if (e.empty()) throw PreconditionError("ensemble has no clusters");
  const auto pops = e.populations();
  layout_ = MomentLayout(pops);
  weight_.assign(pops.begin(), pops.end());
}

void ClusteredSystem::operator()(std::span<const double> y, std::span<double> dydt) const {
  check_dims(layout_.size(), y.size(), dydt.size());
  const std::size_t M = layout_.clusters();
  const double kappa = rates_.kappa;
  const double gamma_r = rates_.gamma + rates_.pump;
  const double field_decay =
      0.5 * (kappa + rates_.gamma + rates_.pump + rates_.cav_dephasing + rates_.atom_dephasing);
  const double coherence_decay = gamma_r + rates_.atom_dephasing;
  const double n = y[0];

  double dn = -kappa * n;
  for (std::size_t m = 0; m < M; ++m) {
    const double g = coupling_[m];
    const double N = weight_[m];
    const complex c = load(y, layout_.field_atom(m));
    const double p = y[layout_.population(m)];
    const double one_minus_2p = 1.0 - 2.0 * p;

    // i g N c - i g N c^* = -2 g N Im c
    dn -= 2.0 * g * N * c.imag();

    complex dc = -(field_decay + I * detuning_[m]) * c + I * g * n - 2.0 * I * g * n * p - I * g * p;
    if (layout_.has_intra(m)) dc -= I * g * (N - 1.0) * load(y, layout_.intra(m));
    complex cross{};
    for (std::size_t j = 0; j < M; ++j) {
      if (j == m) continue;
      const complex s = m < j ? load(y, layout_.inter(m, j)) : std::conj(load(y, layout_.inter(j, m)));
      cross += coupling_[j] * weight_[j] * s;
    }
    dc -= I * cross;
    store(dydt, layout_.field_atom(m), dc);

    // i g c^* - i g c = 2 g Im c
    dydt[layout_.population(m)] = 2.0 * g * c.imag() - gamma_r * p + rates_.pump;

    if (layout_.has_intra(m)) {
      const complex q = load(y, layout_.intra(m));
      const complex dq = I * g * std::conj(c) * one_minus_2p - I * g * c * one_minus_2p - coherence_decay * q;
      store(dydt, layout_.intra(m), dq);
    }

    for (std::size_t j = m + 1; j < M; ++j) {
      const complex s = load(y, layout_.inter(m, j));
      const complex cj = load(y, layout_.field_atom(j));
      const double pj = y[layout_.population(j)];
      const complex ds = -I * (detuning_[m] - detuning_[j]) * s +
                         I * g * std::conj(cj) * one_minus_2p -
                         I * coupling_[j] * c * (1.0 - 2.0 * pj) - coherence_decay * s;
      store(dydt, layout_.inter(m, j), ds);
    }
  }
  dydt[0] = dn;
}

MomentState ClusteredSystem::initial_state() const {
  MomentState s(layout_);
  const double denom = rates_.gamma + rates_.pump;
  const double p0 = denom > 0.0 ? rates_.pump / denom : 0.0;
  for (std::size_t m = 0; m < layout_.clusters(); ++m) s.set_population(m, p0);
  return s;
}

MomentState rhs_clustered(const MomentState& state, const ClusterEnsemble& e, const SystemRates& r) {
  ClusteredSystem sys(e, r);
  if (!(state.layout() == sys.layout())) throw PreconditionError("moment state does not match ensemble");
  MomentState out(sys.layout());
  sys(state.values(), out.values());
  return out;
}

// ---------------------------------------------------------------- per-atom RHS

PerAtomSystem::PerAtomSystem(std::vector<double> detunings, std::vector<double> couplings,
                             const SystemRates& r)
    : detuning_(std::move(detunings)), coupling_(std::move(couplings)), rates_(r) {
  r.validate();
  if (detuning_.size() != coupling_.size())
    throw PreconditionError("detunings and couplings differ in length");
  if (detuning_.empty()) throw PreconditionError("need at least one atom");
}

void PerAtomSystem::operator()(std::span<const double> y, std::span<double> dydt) const {
  check_dims(dimension(), y.size(), dydt.size());
  const std::size_t N = atoms();
  const double kappa = rates_.kappa;
  const double Gamma = rates_.gamma;
  const double R = rates_.pump;
  const double xi = rates_.cav_dephasing;
  const double nu = rates_.atom_dephasing;
  const auto field_off = [](std::size_t i) { return 1 + 2 * i; };
  const auto pop_off = [N](std::size_t i) { return 1 + 2 * N + i; };
  const auto pair_off = [N](std::size_t i, std::size_t j) {
    return 1 + 3 * N + 2 * (i * (2 * N - i - 1) / 2 + (j - i - 1));
  };

  auto c = [&](std::size_t i) { return load(y, field_off(i)); };
  auto cdag = [&](std::size_t i) { return std::conj(c(i)); };  // <a^dag s-_i>
  auto p = [&](std::size_t i) { return y[pop_off(i)]; };
  auto s = [&](std::size_t i, std::size_t j) {
    return i < j ? load(y, pair_off(i, j)) : std::conj(load(y, pair_off(j, i)));
  };
  const double n = y[0];

  complex dn = -kappa * n;
  for (std::size_t i = 0; i < N; ++i) dn += I * coupling_[i] * c(i) - I * coupling_[i] * cdag(i);
  dydt[0] = dn.real();

  for (std::size_t m = 0; m < N; ++m) {
    const double g = coupling_[m];
    complex dc = -((kappa + Gamma + R + xi + nu) / 2.0 + I * detuning_[m]) * c(m) + I * g * n -
                 2.0 * I * g * n * p(m) - I * g * p(m);
    for (std::size_t j = 0; j < N; ++j) {
      if (j != m) dc -= I * coupling_[j] * s(m, j);
    }
    store(dydt, field_off(m), dc);

    const complex dp = I * g * cdag(m) - I * g * c(m) - (Gamma + R) * p(m) + R;
    dydt[pop_off(m)] = dp.real();

    for (std::size_t j = m + 1; j < N; ++j) {
      const double gj = coupling_[j];
      const complex ds = -I * (detuning_[m] - detuning_[j]) * s(m, j) + I * g * cdag(j) - I * gj * c(m) -
                         2.0 * I * g * cdag(j) * p(m) + 2.0 * I * gj * c(m) * p(j) -
                         (Gamma + R + nu) * s(m, j);
      store(dydt, pair_off(m, j), ds);
    }
  }
}

PerAtomState rhs_per_atom(const PerAtomState& state, std::span<const double> detunings,
                          std::span<const double> couplings, const SystemRates& r) {
  PerAtomSystem sys({detunings.begin(), detunings.end()}, {couplings.begin(), couplings.end()}, r);
  if (state.atoms() != sys.atoms()) throw PreconditionError("per-atom state does not match atom count");
  PerAtomState out(sys.atoms());
  sys(state.values(), out.values());
  return out;
}

// ---------------------------------------------------------------- expand / contract

namespace {

std::vector<std::size_t> atom_to_cluster(const ClusterEnsemble& e) {
  if (e.total_atoms() > kMaxExpandAtoms)
    throw PreconditionError("ensemble too large to expand into individual atoms (" +
                            std::to_string(e.total_atoms()) + " > " + std::to_string(kMaxExpandAtoms) + ")");
  std::vector<std::size_t> owner;
  owner.reserve(static_cast<std::size_t>(e.total_atoms()));
  for (std::size_t m = 0; m < e.size(); ++m)
    for (std::int64_t a = 0; a < e[m].population; ++a) owner.push_back(m);
  return owner;
}

}  // namespace

std::vector<double> expanded_detunings(const ClusterEnsemble& e) {
  std::vector<double> out;
  for (auto m : atom_to_cluster(e)) out.push_back(e[m].detuning);
  return out;
}

std::vector<double> expanded_couplings(const ClusterEnsemble& e) {
  std::vector<double> out;
  for (auto m : atom_to_cluster(e)) out.push_back(e[m].coupling);
  return out;
}

PerAtomState expand(const ClusterEnsemble& e, const MomentState& s) {
  const auto owner = atom_to_cluster(e);
  if (s.clusters() != e.size()) throw PreconditionError("moment state does not match ensemble");
  const std::size_t N = owner.size();
  PerAtomState out(N);
  out.set_photon_number(s.photon_number());
  for (std::size_t i = 0; i < N; ++i) {
    out.set_field_atom(i, s.field_atom(owner[i]));
    out.set_population(i, s.population(owner[i]));
    for (std::size_t j = i + 1; j < N; ++j) {
      const complex z = owner[i] == owner[j] ? s.intra_coherence(owner[i])
                                             : s.inter_coherence(owner[i], owner[j]);
      out.set_pair_coherence(i, j, z);
    }
  }
  return out;
}

MomentState contract(const ClusterEnsemble& e, const PerAtomState& s) {
  const auto owner = atom_to_cluster(e);
  if (s.atoms() != owner.size()) throw PreconditionError("per-atom state does not match ensemble");
  const std::size_t M = e.size();
  const auto pops = e.populations();
  MomentState out{MomentLayout(pops)};
  out.set_photon_number(s.photon_number());

  std::vector<complex> field(M), intra(M);
  std::vector<double> pop(M);
  std::vector<complex> inter(M * M);
  for (std::size_t i = 0; i < owner.size(); ++i) {
    field[owner[i]] += s.field_atom(i);
    pop[owner[i]] += s.population(i);
    for (std::size_t j = 0; j < owner.size(); ++j) {
      if (i == j) continue;
      if (owner[i] == owner[j])
        intra[owner[i]] += s.pair_coherence(i, j);
      else if (owner[i] < owner[j])
        inter[owner[i] * M + owner[j]] += s.pair_coherence(i, j);
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double Nm = static_cast<double>(pops[m]);
    out.set_field_atom(m, field[m] / Nm);
    out.set_population(m, pop[m] / Nm);
    if (pops[m] >= 2) out.set_intra_coherence(m, intra[m] / (Nm * (Nm - 1.0)));
    for (std::size_t j = m + 1; j < M; ++j)
      out.set_inter_coherence(m, j, inter[m * M + j] / (Nm * static_cast<double>(pops[j])));
  }
  return out;
}

// ---------------------------------------------------------------- checks and I/O

double physical_tolerance(const MomentState& s) { return 1e-6 * std::max(1.0, s.photon_number()); }

std::string physicality_violation(const MomentState& s, double tol) {
  std::ostringstream msg;
  if (!std::isfinite(s.photon_number()) || s.photon_number() < -tol) {
    msg << "photon number " << s.photon_number() << " below -" << tol;
    return msg.str();
  }
  for (std::size_t m = 0; m < s.clusters(); ++m) {
    const double p = s.population(m);
    if (!std::isfinite(p) || p < -tol || p > 1.0 + tol) {
      msg << "population of cluster " << m + 1 << " = " << p << " outside [0, 1]";
      return msg.str();
    }
  }
  return {};
}

void write_moment_state(std::ostream& os, const MomentState& s) {
  const auto labels = s.layout().labels();
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << labels[i];
  os << '\n';
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << s.values()[i];
  os << '\n';
  os.precision(old_prec);
}

MomentState read_moment_state(std::istream& is, const MomentLayout& layout) {
  std::string header, row;
  if (!std::getline(is, header) || !std::getline(is, row))
    throw PreconditionError("moment table: expected header and value rows");
  const auto labels = layout.labels();
  std::string expected;
  for (std::size_t i = 0; i < labels.size(); ++i) expected += (i ? "," : "") + labels[i];
  if (header != expected) throw PreconditionError("moment table: header does not match layout");
  std::vector<double> values;
  std::istringstream in(row);
  std::string cell;
  while (std::getline(in, cell, ',')) values.push_back(std::stod(cell));
  return MomentState(layout, std::move(values));
}

}  // namespace superlase
