#ifndef SMPC_OPERATORS_HPP
#define SMPC_OPERATORS_HPP

#include <optional>
#include <string>
#include <vector>

#include "smpc/types.hpp"

namespace smpc {

/// Matrix realization of a switched linear evolution system
///
///   M_i dtheta/dt + A_i theta = B_i u,   y = C_i theta,   i = 1..L,
///
/// together with the inner-product matrix v_inner of the (mode independent)
/// state space V.  M_i are SPD mass matrices, A_i coercive (possibly
/// nonsymmetric) stiffness matrices, B_i control-to-state maps with rho
/// columns, C_i observation maps with p rows.  Transitions at switching
/// instants default to the identity; non-identity transition matrices K_ij
/// (state after switch = K_ij * state before) can be supplied explicitly.
struct SwitchedOperatorSet {
  int num_modes = 0; ///< L
  int dim = 0;       ///< N
  int num_inputs = 0;  ///< rho
  int num_outputs = 0; ///< p

  std::vector<SpMat> M; ///< mass, one per mode
  std::vector<SpMat> A; ///< stiffness, one per mode
  std::vector<SpMat> B; ///< input maps, one per mode (often identical)
  std::vector<Mat> C;   ///< output maps, one per mode (often identical)
  SpMat v_inner;        ///< SPD inner product on the state space

  /// transitions[i*L+j] = K_{i,j} applied when switching from mode i+1 to
  /// mode j+1; empty vector means all transitions are the identity.
  std::vector<SpMat> transitions;

  bool identity_transitions() const { return transitions.empty(); }
  const SpMat& mass(int mode) const { return M.at(static_cast<std::size_t>(mode - 1)); }
  const SpMat& stiffness(int mode) const { return A.at(static_cast<std::size_t>(mode - 1)); }
  const SpMat& input(int mode) const { return B.at(static_cast<std::size_t>(mode - 1)); }
  const Mat& output(int mode) const { return C.at(static_cast<std::size_t>(mode - 1)); }

  /// Structural and numerical sanity checks:
  ///  - dimensions consistent across modes,
  ///  - each M_i symmetric positive definite (Cholesky succeeds),
  ///  - v_inner symmetric positive definite,
  ///  - each A_i coercive w.r.t. v_inner on a set of seeded random vectors,
  ///  - explicit transitions K_{i,i} equal the identity.
  /// Throws std::runtime_error with a description on the first violation.
  void validate(unsigned seed = 0) const;
};

/// Serialize to a directory: one Matrix Market file per operator
/// (M_1.mtx, A_1.mtx, B_1.mtx, C_1.mtx, ..., v_inner.mtx) plus a plain-text
/// metadata file with the dimensions.  Dense C blocks are stored as (dense)
/// Matrix Market arrays.
void save_operator_set(const SwitchedOperatorSet& ops, const std::string& dir);

/// Inverse of save_operator_set.  Round trip is exact for the sparse
/// patterns and bitwise-faithful to the printed precision.
SwitchedOperatorSet load_operator_set(const std::string& dir);

} // namespace smpc

#endif
