#ifndef SMPC_FORWARD_HPP
#define SMPC_FORWARD_HPP

#include "smpc/norms.hpp"
#include "smpc/operators.hpp"
#include "smpc/switching.hpp"
#include "smpc/trajectory.hpp"

namespace smpc {

/// Implicit Euler solve of the switched system on `grid`:
///
///   (M_i + tau A_i) theta_{k+1} = M_i theta_k + tau B_i u_{k+1},
///   i = sigma(t_{k+1}^-),
///
/// with the transition map K_{sigma(t_k^-),sigma(t_k^+)} applied to the
/// carried state at switching nodes (identity by default).  The control
/// enters at the right endpoint of each step; u[0] is never used.
Trajectory solve_state(SystemSolvers& solvers, const SwitchingSignal& sig,
                       const TimeGrid& grid, const Vec& theta0, const Trajectory& u);

/// Output trajectory y_k = C_{sigma(t_k^-)} theta_k; at the first node the
/// right limit sigma(t_0^+) is used (no step ends there).
Trajectory apply_output(const SwitchedOperatorSet& ops, const SwitchingSignal& sig,
                        const Trajectory& theta);

} // namespace smpc

#endif
