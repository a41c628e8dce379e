#include "smpc/norms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smpc {

double energy_norm_sq(const Vec& v, const SpMat& form) {
  const double q = v.dot(form * v);
  return q > 0 ? q : 0.0;
}

double energy_norm(const Vec& v, const SpMat& form) {
  return std::sqrt(energy_norm_sq(v, form));
}

SystemSolvers::SystemSolvers(const SwitchedOperatorSet& ops) : ops_(&ops) {
  const int L = ops.num_modes;
  symA_.reserve(static_cast<std::size_t>(L));
  mass_llt_.resize(static_cast<std::size_t>(L));
  symA_llt_.resize(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) {
    symA_.push_back(symmetric_part(ops.A[static_cast<std::size_t>(i)]));
    mass_llt_[static_cast<std::size_t>(i)] = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
    mass_llt_[static_cast<std::size_t>(i)]->compute(ops.M[static_cast<std::size_t>(i)]);
    if (mass_llt_[static_cast<std::size_t>(i)]->info() != Eigen::Success)
      throw std::runtime_error("SystemSolvers: mass factorization failed for mode " + std::to_string(i + 1));
  }
}

const Eigen::SimplicialLDLT<SpMat>& SystemSolvers::sym_factor(int mode) const {
  // Factorized on first use: plain time stepping never solves with sym(A_i),
  // and degenerate stiffness blocks (mass-only dynamics) stay usable as long
  // as no dual norm is requested.
  auto& slot = symA_llt_.at(static_cast<std::size_t>(mode - 1));
  if (!slot) {
    slot = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
    slot->compute(symA_[static_cast<std::size_t>(mode - 1)]);
    if (slot->info() != Eigen::Success)
      throw std::runtime_error("SystemSolvers: sym(A) factorization failed for mode " + std::to_string(mode));
  }
  return *slot;
}

long long SystemSolvers::tau_key(double tau) {
  // taus arrive as exact copies of a handful of grid steps; a scaled rounding
  // keys them robustly without collisions in practice.
  return static_cast<long long>(std::llround(tau * 1e15));
}

Vec SystemSolvers::solve_mass(int mode, const Vec& r) const {
  return mass_llt_.at(static_cast<std::size_t>(mode - 1))->solve(r);
}

Vec SystemSolvers::solve_sym_stiffness(int mode, const Vec& r) const {
  return sym_factor(mode).solve(r);
}

Vec SystemSolvers::solve_step(int mode, double tau, const Vec& r) {
  auto key = std::make_pair(mode, tau_key(tau));
  auto it = step_lu_.find(key);
  if (it == step_lu_.end()) {
    SpMat E = ops_->mass(mode) + tau * ops_->stiffness(mode);
    auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
    lu->compute(E);
    if (lu->info() != Eigen::Success)
      throw std::runtime_error("SystemSolvers: step factorization failed");
    it = step_lu_.emplace(key, std::move(lu)).first;
  }
  return it->second->solve(r);
}

Vec SystemSolvers::solve_step_transposed(int mode, double tau, const Vec& r) {
  auto key = std::make_pair(mode, tau_key(tau));
  auto it = stepT_lu_.find(key);
  if (it == stepT_lu_.end()) {
    SpMat E = ops_->mass(mode) + tau * ops_->stiffness(mode);
    SpMat Et = SpMat(E.transpose());
    auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
    lu->compute(Et);
    if (lu->info() != Eigen::Success)
      throw std::runtime_error("SystemSolvers: transposed step factorization failed");
    it = stepT_lu_.emplace(key, std::move(lu)).first;
  }
  return it->second->solve(r);
}

double SystemSolvers::dual_norm_a(const Vec& r, int mode) const {
  const Vec z = solve_sym_stiffness(mode, r);
  const double q = r.dot(z);
  return std::sqrt(q > 0 ? q : 0.0);
}

double SystemSolvers::dual_norm_m(const Vec& q, int mode) const {
  const Vec z = solve_mass(mode, q);
  const double s = q.dot(z);
  return std::sqrt(s > 0 ? s : 0.0);
}

int interval_index_left(const SwitchingSignal& sig, double t) {
  // Breakpoints within the signal's time tolerance count as equal to t, so a
  // grid node drifting a few ulp past a breakpoint stays in its left interval.
  const auto& jumps = sig.jump_times();
  const double s = t - sig.time_tolerance();
  return static_cast<int>(std::upper_bound(jumps.begin(), jumps.end(), s) - jumps.begin());
}

double weighted_spacetime_norm_sq(const Trajectory& traj, const SwitchingSignal& sig,
                                  const SwitchedOperatorSet& ops, FormFamily family,
                                  const std::vector<double>& weights, int k_stop) {
  if (static_cast<int>(weights.size()) != static_cast<int>(sig.interval_modes().size()))
    throw std::invalid_argument("weighted_spacetime_norm_sq: one weight per switching interval required");
  if (k_stop < 0 || k_stop >= traj.num_nodes())
    throw std::out_of_range("weighted_spacetime_norm_sq: k_stop outside grid");
  const double tau = traj.grid.tau();
  double acc = 0.0;
  for (int k = 1; k <= k_stop; ++k) {
    const double tk = traj.grid.node(k);
    const int mode = sig.mode_left(tk);
    const int iv = interval_index_left(sig, tk);
    const SpMat& form = (family == FormFamily::Stiffness) ? ops.stiffness(mode) : ops.mass(mode);
    acc += weights[static_cast<std::size_t>(iv)] * tau * energy_norm_sq(traj[k], form);
  }
  return acc;
}

double spacetime_norm(const Trajectory& traj, const SwitchingSignal& sig,
                      const SwitchedOperatorSet& ops, FormFamily family) {
  std::vector<double> ones(sig.interval_modes().size(), 1.0);
  return std::sqrt(weighted_spacetime_norm_sq(traj, sig, ops, family, ones, traj.num_nodes() - 1));
}

} // namespace smpc
