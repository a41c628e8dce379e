#ifndef SMPC_NORMS_HPP
#define SMPC_NORMS_HPP

#include <map>
#include <memory>
#include <vector>

#include "smpc/operators.hpp"
#include "smpc/switching.hpp"
#include "smpc/trajectory.hpp"
#include "smpc/types.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace smpc {

/// Energy (semi-)norm sqrt(v^T F v); for nonsymmetric F this equals the norm
/// induced by the symmetric part, since v^T F v = v^T sym(F) v.
double energy_norm(const Vec& v, const SpMat& form);

/// Squared version, clamped at zero against roundoff.
double energy_norm_sq(const Vec& v, const SpMat& form);

/// Factorization cache for one switched operator set: per-mode Cholesky of the
/// masses and of the symmetric stiffness parts, and per (mode, tau) LU of the
/// implicit Euler matrices M_i + tau*A_i and their transposes.  All solver
/// and estimator code shares one instance so each factorization happens once.
class SystemSolvers {
public:
  explicit SystemSolvers(const SwitchedOperatorSet& ops);

  const SwitchedOperatorSet& ops() const { return *ops_; }

  /// Solve M_i x = r.
  Vec solve_mass(int mode, const Vec& r) const;
  /// Solve sym(A_i) x = r.
  Vec solve_sym_stiffness(int mode, const Vec& r) const;
  /// Solve (M_i + tau A_i) x = r, factorizing on first use of (mode, tau).
  Vec solve_step(int mode, double tau, const Vec& r);
  /// Solve (M_i + tau A_i)^T x = r for the adjoint sweep.
  Vec solve_step_transposed(int mode, double tau, const Vec& r);

  /// Dual norm of a residual w.r.t. the mode-i energy inner product,
  /// sqrt(r^T sym(A_i)^{-1} r).
  double dual_norm_a(const Vec& r, int mode) const;
  /// Dual norm w.r.t. the mode-i mass inner product, sqrt(q^T M_i^{-1} q).
  double dual_norm_m(const Vec& q, int mode) const;

  const SpMat& sym_stiffness(int mode) const {
    return symA_.at(static_cast<std::size_t>(mode - 1));
  }

private:
  const Eigen::SimplicialLDLT<SpMat>& sym_factor(int mode) const;

  const SwitchedOperatorSet* ops_;
  std::vector<SpMat> symA_;
  std::vector<std::unique_ptr<Eigen::SimplicialLDLT<SpMat>>> mass_llt_;
  mutable std::vector<std::unique_ptr<Eigen::SimplicialLDLT<SpMat>>> symA_llt_;
  std::map<std::pair<int, long long>, std::unique_ptr<Eigen::SparseLU<SpMat>>> step_lu_;
  std::map<std::pair<int, long long>, std::unique_ptr<Eigen::SparseLU<SpMat>>> stepT_lu_;

  static long long tau_key(double tau);
};

/// Which mode-dependent energy form a space-time norm uses.
enum class FormFamily { Stiffness, Mass };

/// Weighted space-time (semi-)norm of Definition-style type
///
///   |||v|||^2 = sum_i w_i \int_{I_i \cap (t0, t_stop]} ||v(s)||^2_{form_sigma(s)} ds,
///
/// discretized with the right-endpoint rectangle rule on the trajectory grid:
/// step (t_{k-1}, t_k] contributes tau * ||v(t_k)||^2 in the form of mode
/// sigma(t_k^-), weighted by the factor of the switching interval containing
/// t_k^-.  `weights` has one entry per interval of `sig`;  `k_stop` truncates
/// the sum at node k_stop (pass traj.num_nodes()-1 for the full horizon).
double weighted_spacetime_norm_sq(const Trajectory& traj, const SwitchingSignal& sig,
                                  const SwitchedOperatorSet& ops, FormFamily family,
                                  const std::vector<double>& weights, int k_stop);

/// Unweighted L^2(t0,T; V_a) style space-time norm (all weights one).
double spacetime_norm(const Trajectory& traj, const SwitchingSignal& sig,
                      const SwitchedOperatorSet& ops, FormFamily family);

/// Index of the switching interval of `sig` containing t approached from the
/// left (0-based; t in (s_{j-1}, s_j] has index j).
int interval_index_left(const SwitchingSignal& sig, double t);

} // namespace smpc

#endif
