#ifndef SMPC_CERTIFY_HPP
#define SMPC_CERTIFY_HPP

// A-posteriori certification for switched parabolic optimal control.
//
// This header collects everything needed to bound, without access to the
// full-order optimum, the errors committed by a reduced-order model inside
// one finite-horizon subproblem and across a receding-horizon loop:
//
//  * system constants (mode-pair mass ratios c_{i,j}, input/output
//    continuity constants gamma measured in the energy / mass norms),
//  * per-horizon switching structure and the interval weights omega /
//    omega~ that propagate energy estimates across mode switches,
//  * residual-based bounds for the state (delta_theta), the adjoint
//    (delta_p), and the optimal control (delta_A, delta_B, tilde delta_B),
//  * the bound on the perturbed optimal state used to propagate
//    initial-value uncertainty from one horizon to the next,
//  * offline/online decompositions so that all residual dual norms can be
//    evaluated in reduced coordinates at cost independent of the full
//    state dimension.
//
// All bounds are certified upper estimates: for any reduced trajectory the
// corresponding true error (measured in the stated norm) never exceeds the
// returned value, up to floating-point roundoff.

#include <smpc/adjoint.hpp>
#include <smpc/norms.hpp>
#include <smpc/operators.hpp>
#include <smpc/pod.hpp>
#include <smpc/switching.hpp>
#include <smpc/trajectory.hpp>
#include <smpc/types.hpp>

#include <map>
#include <optional>
#include <vector>

namespace smpc {

//----------------------------------------------------------------------------
// System constants
//----------------------------------------------------------------------------

/// Mode-independent constants entering the error estimators.
///
/// c(i,j)   : smallest constant with ||v||^2_{m_i} <= c(i,j) ||v||^2_{m_j}
///            for all v (1-based mode indices stored 0-based in the matrix),
///            i.e. the largest generalized eigenvalue of (M_i, M_j).
/// gamma2_B_a[i] : continuity constant of the input map measured against the
///            energy norm of mode i+1: sup_u ||B_i u||^2_{a_i'} / |u|^2 =
///            lambda_max(B_i' sym(A_i)^{-1} B_i).
/// gamma2_C_a[i] : output continuity against the energy norm:
///            lambda_max(C_i sym(A_i)^{-1} C_i').
/// gamma2_C_m[i] : output continuity against the mass norm:
///            lambda_max(C_i M_i^{-1} C_i').
struct ConstantsBundle {
    Mat c;               ///< L x L matrix of squared-norm ratios c_{i,j}.
    Vec gamma2_B_a;      ///< per mode, size L.
    Vec gamma2_C_a;      ///< per mode, size L.
    Vec gamma2_C_m;      ///< per mode, size L.
};

/// Computes all constants of the bundle from the operator set.  The mass
/// ratios are obtained from a generalized symmetric eigenproblem; for large
/// dimensions the computation is restricted to the subspace where M_i and
/// M_j differ (the complement contributes ratio exactly 1).
ConstantsBundle compute_constants(const SwitchedOperatorSet& ops,
                                  SystemSolvers& solvers);

//----------------------------------------------------------------------------
// Horizon structure and switching weights
//----------------------------------------------------------------------------

/// Static description of one prediction horizon: the switching intervals
/// that intersect it, the active mode on each, and the mode pairs at the
/// interior switch points.
struct HorizonStructure {
    TimeGrid grid;                      ///< time grid of the horizon.
    std::vector<int> jump_nodes;        ///< grid node index of each interior switch.
    std::vector<int> interval_modes;    ///< active mode on each interval, size N.
    std::vector<std::pair<int, int>> switch_pairs;  ///< (mode before, mode after) per switch.
    int terminal_mode = 1;              ///< mode sigma(T^-) at the horizon end.
    int initial_mode = 1;               ///< mode sigma(t_start^+).

    int num_intervals() const { return static_cast<int>(interval_modes.size()); }
    int num_switches() const { return static_cast<int>(jump_nodes.size()); }
};

/// Extracts the switching structure of `sig` restricted to `grid`.
HorizonStructure analyze_horizon(const SwitchingSignal& sig, const TimeGrid& grid);

/// Forward-in-time interval weights for the state bound: for a horizon with
/// N switching intervals the weight of interval i (0-based) is
///     omega_{N,i} = prod_{k=i+1}^{N-1} c_{sigma(t_k^+), sigma(t_k^-)},
/// so the last interval has weight 1 and earlier intervals absorb the mass
/// ratio of every switch that lies after them.  `num_intervals` selects the
/// truncation N_t <= N used for bounds evaluated at intermediate times;
/// the returned vector has size `num_intervals`.
std::vector<double> state_interval_weights(const HorizonStructure& hs,
                                           const ConstantsBundle& cb,
                                           int num_intervals);

/// Backward-in-time interval weights for the adjoint bound:
///     omega~_i = prod_{k=1}^{i} 2 c_{sigma(t_k^+), sigma(t_k^-)},
/// i = 0..N-1, so the first interval has weight 1 and the weights grow with
/// every switch crossed when integrating backwards.
std::vector<double> adjoint_interval_weights(const HorizonStructure& hs,
                                             const ConstantsBundle& cb);

/// Product of all state weights from interval 0, omega_{N_t,0}; equals 1
/// when no switch is crossed.
double state_weight_from_start(const HorizonStructure& hs,
                               const ConstantsBundle& cb,
                               int num_intervals);

/// Constant coupling the initial-value error into the control bounds:
///     C_1 = max{ (max_i gamma2_C_a[mode_i]) / 2,
///                mu * gamma2_C_m[terminal mode] },
/// the max over the modes active on the horizon (no interval weights).
double constant_c1(const HorizonStructure& hs, const ConstantsBundle& cb, double mu);

/// Constant converting the adjoint energy bound into a control bound:
///     C_2 = max_i gamma2_B_a[mode_i] / (omega~_i lambda^2).
double constant_c2(const HorizonStructure& hs, const ConstantsBundle& cb, double lambda);

/// Constant converting the state energy bound into a control bound:
///     C_3 = max{ max_i gamma2_C_a[mode_i] / (omega_i lambda),
///                mu * gamma2_C_m[terminal mode] / lambda }.
double constant_c3(const HorizonStructure& hs, const ConstantsBundle& cb,
                   double lambda, double mu);

/// Constant propagating a control error into a state error at time index
/// `num_intervals` (N_t touched switching intervals):
///     C_4 = max_{i<N_t} omega_{N_t,i} * gamma2_B_a[mode_i],
/// with C_4 = 0 when N_t == 0.
double constant_c4(const HorizonStructure& hs, const ConstantsBundle& cb,
                   int num_intervals);

//----------------------------------------------------------------------------
// Residuals of a lifted reduced trajectory
//----------------------------------------------------------------------------

/// Weighted dual norms of the state-equation residual of a (lifted) state
/// trajectory theta~ under control u:
///     R_{k+1} = B u_{k+1} - M (theta~_{k+1} - theta~_k)/tau - A theta~_{k+1},
/// all operators taken in the mode active on (t_k, t_{k+1}].  The full-order
/// scheme satisfies R = 0 identically; for a reduced trajectory the residual
/// measures the defect of the lifted solution.
struct StateResidual {
    std::vector<Vec> values;   ///< R_k for k = 1..K-1 (index 0 unused, zero).

    /// Weighted space-time dual norm  sum_k w(interval(k)) tau ||R_k||^2_{a'}
    /// truncated at node `k_stop` (defaults to all nodes).
    double weighted_dual_norm_sq(const HorizonStructure& hs,
                                 SystemSolvers& solvers,
                                 const std::vector<double>& interval_weights,
                                 int k_stop = -1) const;
};

/// Computes the state residual of trajectory `theta` under `u`.
StateResidual compute_state_residual(const SwitchedOperatorSet& ops,
                                     const SwitchingSignal& sig,
                                     const Trajectory& theta,
                                     const Trajectory& u);

/// Residual data of a (lifted) adjoint trajectory p~ for output data y~:
/// per-solve defects of the backward recursion, the defect of the terminal
/// condition, and the jump defects at interior switches.  For the full-order
/// adjoint all residuals vanish identically.
struct AdjointResidual {
    /// Dual-norm defect of the backward solve producing node k, assigned to
    /// the step (t_{k-1}, t_k]; index 0 unused.
    std::vector<Vec> step_defects;
    /// Jump defects q_s = -M_{sigma(s^-)} p~(s^-) + M_{sigma(s^+)} p~(s^+)
    /// keyed by switch node index.
    std::map<int, Vec> jump_defects;
    /// Terminal defect q_T = -M_{sigma(T)} p~(T) + mu C'(y~(T) - y_T).
    Vec terminal_defect;
};

/// Computes the adjoint residual of the lifted reduced adjoint `adj` for
/// reduced outputs `y` against tracking data (`y_d`, `y_T`, `mu`).
AdjointResidual compute_adjoint_residual(const SwitchedOperatorSet& ops,
                                         const SwitchingSignal& sig,
                                         const AdjointSolution& adj,
                                         const Trajectory& y,
                                         const Trajectory& y_d,
                                         const Vec& y_T,
                                         double mu);

//----------------------------------------------------------------------------
// Error estimators
//----------------------------------------------------------------------------

/// Result of the state error bound
///     ||e(T)||^2_{m_sigma(T)} + ||e||^2_{a,omega} <= delta_theta^2
///       = omega_{N,0} ||e(t_0)||^2_{m} + ||R||^2_{a',omega}
/// where e is the difference between the exact solution started from the
/// true initial value and the lifted reduced trajectory.
struct StateBound {
    double total = 0.0;          ///< delta_theta (not squared).
    double initial_part = 0.0;   ///< omega_{N,0} ||e0||^2_m  (squared contribution).
    double residual_part = 0.0;  ///< weighted residual dual norm squared.
};

/// Evaluates the state bound for lifted trajectory `theta` under `u`, given
/// the norm of the initial-value error `initial_error_m` measured in the
/// mass norm of the initial mode.
StateBound delta_theta(const SwitchedOperatorSet& ops,
                       SystemSolvers& solvers,
                       const HorizonStructure& hs,
                       const ConstantsBundle& cb,
                       const Trajectory& theta,
                       const Trajectory& u,
                       double initial_error_m);

/// Result of the adjoint error bound
///     ||eps(t_0^+)||^2_m + ||eps||^2_{a,omega~} <= delta_p^2
///       = 2 sum_i omega~_i ||q_{t_{i+1}}||^2_{m'} + ||Q||^2_{a',omega~},
/// where the sum runs over the interior switch defects and the terminal
/// defect (the entry for the last interval).
struct AdjointBound {
    double total = 0.0;          ///< delta_p (not squared).
    double jump_part = 0.0;      ///< weighted jump/terminal defects (squared).
    double residual_part = 0.0;  ///< weighted step defects (squared).
};

/// Evaluates the adjoint bound from a precomputed residual.
AdjointBound delta_p(const SwitchedOperatorSet& ops,
                     SystemSolvers& solvers,
                     const HorizonStructure& hs,
                     const ConstantsBundle& cb,
                     const AdjointResidual& res);

/// Control error bound based on one exact state solve and one exact adjoint
/// solve (the "expensive" estimator):
///     delta_A^2 = (1/lambda^2) ||B'(p^_r - p^)||^2_U + (C_1 / 2 lambda) delta_t^2,
/// where p^ is the exact adjoint for the outputs of the exact state solve
/// under the reduced control, and delta_t bounds the initial-value error.
/// `cross_term` is the control-space norm squared of the adjoint mismatch;
/// the helper below assembles it from trajectories.
struct ControlBound {
    double total = 0.0;            ///< delta (not squared).
    double control_part = 0.0;     ///< (1/lambda^2)-weighted mismatch term (squared).
    double state_part = 0.0;       ///< output/terminal mismatch terms (squared), delta_B only.
    double initial_part = 0.0;     ///< C_1-weighted initial error term (squared).
};

/// Control-space norm squared of B' applied to the difference of two adjoint
/// trajectories, sum_k tau |B_{sigma(t_k^-)}' (p_k - q_k)|^2 over interior
/// nodes k = 1..K-1.
double input_adjoint_mismatch_sq(const SwitchedOperatorSet& ops,
                                 const SwitchingSignal& sig,
                                 const AdjointSolution& p,
                                 const AdjointSolution& q);

/// Expensive control bound delta_A; see above.  All heavy lifting (the two
/// full-order solves) is done by the caller; this routine only combines the
/// mismatch norm with the constants.
ControlBound delta_A(const HorizonStructure& hs, const ConstantsBundle& cb,
                     double lambda, double mu,
                     double mismatch_sq, double initial_error_m);

/// Intermediate control bound delta_B (one exact state solve, no exact
/// adjoint solve):
///     delta_B^2 = (1/lambda^2) ||B'(p^_r - p')||^2_U
///               + (1/lambda) ||y^_r - y'||^2_{L2}
///               + (mu/lambda) ||y^_r(T) - y'(T)||^2
///               + (C_1/lambda) delta_t^2,
/// where p' is the adjoint driven by the reduced outputs and y' the output
/// of the exact state solve under the reduced control.
ControlBound delta_B(const HorizonStructure& hs, const ConstantsBundle& cb,
                     double lambda, double mu,
                     double mismatch_sq, double output_mismatch_sq,
                     double terminal_mismatch_sq, double initial_error_m);

/// Fully reduced control bound (no full-order solve):
///     tilde delta_B^2 = C_1 delta_t^2 + C_2 delta_p^2 + C_3 delta_theta^2.
ControlBound tilde_delta_B(const HorizonStructure& hs, const ConstantsBundle& cb,
                           double lambda, double mu,
                           double delta_p_sq, double delta_theta_sq,
                           double initial_error_m);

/// Bound on the mass-norm error of the *exact* optimal state at time node
/// `k_stop` of the horizon caused by an initial error delta_t and a control
/// error delta_u:
///     ||e(t)||^2_m <= omega_{N_t,0} delta_t^2 + (C_4(t)/2) delta_u^2.
double optimal_state_bound_sq(const HorizonStructure& hs, const ConstantsBundle& cb,
                              int k_stop, double initial_error_m, double delta_u);

/// Bound on the mass-norm error of the *reduced* optimal state at node
/// `k_stop`, additionally accounting for the projection defect of the
/// initial value and the state-equation residual up to that node:
///     ||e~(t)||^2_m <= omega_{N_t,0} (delta_t + proj_defect)^2
///                    + C_4(t) delta_u^2 + ||R||^2_{a',omega,t}.
double reduced_state_bound_sq(const HorizonStructure& hs, const ConstantsBundle& cb,
                              int k_stop, double initial_error_m,
                              double projection_defect_m, double delta_u,
                              double residual_sq);

//----------------------------------------------------------------------------
// Offline/online decomposition of the dual norms
//----------------------------------------------------------------------------

/// Precomputed Riesz blocks for a fixed reduced basis V, allowing all dual
/// norms appearing in the estimators to be evaluated from reduced
/// coordinates alone.
///
/// For each mode i the residual of the state equation and of the adjoint
/// recursion is a linear combination of the columns of
///     Z_i = [ B_i | M_1 V ... M_L V | A_i V | A_i' V | C_i' ],
/// so its energy dual norm is a quadratic form with Gramian
///     G_i = Z_i' sym(A_i)^{-1} Z_i.
/// Jump and terminal defects are combinations of the columns of
///     W_i = [ M_1 V ... M_L V | C_i' ],
/// with mass-dual Gramian  H_i = W_i' M_i^{-1} W_i.
class RieszBlocks {
public:
    RieszBlocks() = default;

    /// Builds the blocks for basis `V` (one sparse solve per column of Z_i
    /// and W_i per mode).
    RieszBlocks(const SwitchedOperatorSet& ops, SystemSolvers& solvers, const Mat& V);

    int rank() const { return r_; }
    int num_modes() const { return L_; }

    /// Energy dual norm squared ||z||^2_{a_i'} of
    ///   z = B_i u + sum_j M_j V mcoef_j + A_i V acoef + A_i' V atcoef + C_i' ccoef,
    /// where any coefficient block may be empty (treated as zero).
    double dual_a_sq(int mode, const Vec& u,
                     const std::vector<Vec>& mcoef,
                     const Vec& acoef, const Vec& atcoef, const Vec& ccoef) const;

    /// Mass dual norm squared ||w||^2 with w = sum_j M_j V mcoef_j + C_i' ccoef,
    /// measured in M_i^{-1}.
    double dual_m_sq(int mode, const std::vector<Vec>& mcoef, const Vec& ccoef) const;

private:
    int r_ = 0;          ///< basis rank.
    int L_ = 0;          ///< number of modes.
    int rho_ = 0;        ///< input dimension.
    int p_ = 0;          ///< output dimension.
    std::vector<Mat> G_; ///< per-mode energy Gramian.
    std::vector<Mat> H_; ///< per-mode mass Gramian.

    Vec assemble_a_coeffs(const Vec& u, const std::vector<Vec>& mcoef,
                          const Vec& acoef, const Vec& atcoef, const Vec& ccoef) const;
    Vec assemble_m_coeffs(const std::vector<Vec>& mcoef, const Vec& ccoef) const;
};

/// State bound evaluated purely in reduced coordinates via Riesz blocks:
/// identical (up to roundoff) to `delta_theta` applied to the lifted
/// trajectory.  `theta_hat` and `u` are the reduced state and the control in
/// original coordinates (controls are never reduced).
StateBound delta_theta_reduced(const ReducedSystem& rs,
                               const RieszBlocks& blocks,
                               const HorizonStructure& hs,
                               const ConstantsBundle& cb,
                               const Trajectory& theta_hat,
                               const Trajectory& u,
                               double initial_error_m);

/// Adjoint bound evaluated purely in reduced coordinates; matches `delta_p`
/// applied to the lifted adjoint.  `adj_hat` holds reduced adjoint
/// coordinates, `y_hat` the reduced outputs.
AdjointBound delta_p_reduced(const ReducedSystem& rs,
                             const RieszBlocks& blocks,
                             const HorizonStructure& hs,
                             const ConstantsBundle& cb,
                             const SwitchingSignal& sig,
                             const AdjointSolution& adj_hat,
                             const Trajectory& y_hat,
                             const Trajectory& y_d,
                             const Vec& y_T,
                             double mu);

/// Weighted state-residual dual norm in reduced coordinates (the residual
/// term of `reduced_state_bound_sq`), truncated at node `k_stop`.
double state_residual_sq_reduced(const ReducedSystem& rs,
                                 const RieszBlocks& blocks,
                                 const HorizonStructure& hs,
                                 const std::vector<double>& interval_weights,
                                 const Trajectory& theta_hat,
                                 const Trajectory& u,
                                 int k_stop = -1);

}  // namespace smpc

#endif  // SMPC_CERTIFY_HPP
