#ifndef SMPC_ADJOINT_HPP
#define SMPC_ADJOINT_HPP

#include "smpc/norms.hpp"
#include "smpc/operators.hpp"
#include "smpc/switching.hpp"
#include "smpc/trajectory.hpp"

namespace smpc {

/// Tracking data driving an adjoint solve: output trajectory of the state to
/// certify, desired output, terminal target and terminal weight.
struct AdjointData {
  const Trajectory* y = nullptr;   ///< realized output (dim p per node)
  const Trajectory* y_d = nullptr; ///< desired output on the same grid
  Vec y_T;                         ///< terminal output target
  double mu = 0.0;                 ///< terminal tracking weight
};

/// Backward sweep that is the exact transpose of solve_state: at node k the
/// solve uses mode i = sigma(t_k^-) (sigma(t_0^+) for the extra node-0 value),
///
///   (M_i + tau A_i^T) p_k = M_{sigma(t_k^+)} p_{k+1} + tau C_i^T (y_k - y_d_k),
///
/// anchored at M_{sigma(T)} p(T) = mu C^T (y(T) - y_T).  Gradients of the
/// discrete tracking cost computed from this sweep agree with the forward
/// map's transpose to machine precision.  Stored node values are the left
/// limits; right limits at breakpoints follow from the mass jump
/// M_{sigma^-} p(t^-) = M_{sigma^+} p(t^+).
AdjointSolution solve_adjoint(SystemSolvers& solvers, const SwitchingSignal& sig,
                              const TimeGrid& grid, const AdjointData& data);

/// Discrete counterpart of the switched integration-by-parts identity
///
///   sum_k m(dtheta, p) - [boundary terms] - [jump terms] + sum_k m(theta, dp) = 0:
///
/// returns the absolute defect of the identity evaluated with summation by
/// parts on every switching interval (exactly zero in exact arithmetic for
/// any pair of trajectories with one-sided adjoint values).  With
/// `include_jump_terms = false` the switching-node corrections are dropped,
/// which breaks the identity whenever the masses differ across a switch.
double integration_by_parts_defect(const SwitchedOperatorSet& ops,
                                   const SwitchingSignal& sig,
                                   const Trajectory& theta,
                                   const AdjointSolution& adj,
                                   bool include_jump_terms = true);

} // namespace smpc

#endif
