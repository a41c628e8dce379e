#ifndef SMPC_MPC_HPP
#define SMPC_MPC_HPP

// Receding-horizon (model predictive) control drivers for switched parabolic
// systems:
//
//  * run_fom_mpc      — every subproblem solved with the full-order model,
//  * run_fom_rom_mpc  — subproblems solved with a reduced model, plant
//                       propagated full-order; certified error estimators
//                       trigger full-order fallbacks and basis rebuilds,
//  * run_rom_rom_mpc  — fully reduced loop (subproblems, propagation, and
//                       estimators all run in reduced coordinates between
//                       updates).
//
// Per step n the drivers solve a finite-horizon subproblem on
// (t_n, t_n + T], apply the first delta = shift of the optimal control,
// advance the closed-loop state, and warm-start the next subproblem with the
// shifted control.  The reduced drivers maintain a recursive bound delta_t
// on the distance between their closed-loop state and the state of an exact
// full-order loop; when either the per-subproblem control bound or the
// predicted next delta_t exceeds its tolerance, the step falls back to a
// full-order subproblem, the applied trajectories refresh the snapshot
// window, and the reduced basis is rebuilt.

#include <smpc/certify.hpp>
#include <smpc/ocp.hpp>
#include <smpc/pod.hpp>

#include <memory>
#include <vector>

namespace smpc {

/// Which control-error bound drives the update trigger.
enum class ControlEstimator {
    DeltaA,       ///< expensive: one full state + one full adjoint solve per step.
    DeltaB,       ///< intermediate: one full state + one full adjoint (output-driven).
    TildeDeltaB,  ///< cheap: residual-based, no full-order solves.
};

/// Per-step tolerance schedule: value(n) = max(base * decay^n, floor).
struct ToleranceSchedule {
    double base = 1e-2;
    double decay = 1.0;
    double floor = 0.0;

    double at(int n) const;
};

/// Configuration shared by all three drivers (reduced-model fields are
/// ignored by the full-order driver).
struct MPCConfig {
    int horizon_steps = 20;  ///< prediction horizon T = horizon_steps * tau.
    int shift_steps = 1;     ///< sampling time delta = shift_steps * tau.
    int num_steps = -1;      ///< MPC steps; -1 = run until the grid end.

    ControlEstimator estimator = ControlEstimator::TildeDeltaB;
    ToleranceSchedule tol_control;  ///< epsilon_n for the control bound.
    ToleranceSchedule tol_state;    ///< epsilon_n for the propagated state bound.

    int pod_window = 7;                 ///< snapshot window capacity (pairs).
    double pod_energy = 1.0 - 1e-12;    ///< cumulative energy target for rank selection.
    int pod_max_rank = -1;              ///< hard rank cap; -1 = none.

    OptimizerOptions optimizer;

    /// Optional externally built reduced model used from step 0; when null
    /// the reduced drivers bootstrap with a full-order step at n = 0.
    const ReducedSystem* initial_rom = nullptr;

    /// Run a synchronized full-order receding-horizon reference alongside a
    /// reduced driver and record, per step, the measured state gap against
    /// the carried bound delta_t and the measured control gap against the
    /// control bound.  The reference re-bases onto the reduced loop's state
    /// after every triggered update (matching the bound reset).
    bool certify = false;
    double certify_slack = 1e-10;  ///< roundoff slack for the certification checks.
};

/// One row of the per-step log.
struct MPCStepLog {
    int step = 0;          ///< n.
    double t = 0.0;        ///< t_n.
    int rank = 0;          ///< reduced rank used for the subproblem (0 = full-order).
    bool updated = false;  ///< full-order fallback + basis rebuild this step.
    double delta_t = 0.0;       ///< carried state bound at step entry.
    double delta_u0 = 0.0;      ///< control bound with zero initial error.
    double delta_u = 0.0;       ///< control bound including the carried delta_t.
    double delta_t_next = 0.0;  ///< state bound carried to the next step (post-reset).
    int iterations = 0;         ///< subproblem optimizer iterations (accepted solve).
    double stationarity = 0.0;  ///< final stationarity of the accepted subproblem.
    double subproblem_cost = 0.0;
    double wall_time = 0.0;     ///< seconds spent in this step.
    // Certification oracle (filled when MPCConfig::certify is set):
    double measured_state_gap = -1.0;    ///< || theta_ref(t_n) - scheme state ||_m.
    double measured_control_gap = -1.0;  ///< || u_ref_n - u_hat_n ||_U.
    bool cert_ok = true;                 ///< both measured gaps within their bounds.
};

/// Closed-loop result over the whole simulation window.
struct MPCResult {
    Trajectory control;  ///< applied control at every grid node (node 0 zero).
    Trajectory state;    ///< closed-loop state at every node (lifted for ROM-ROM).
    Trajectory output;   ///< closed-loop output at every node.
    double cost = 0.0;   ///< tracking cost of the applied trajectories on [0, t_end].
    std::vector<MPCStepLog> log;
    int num_updates = 0;
    double average_rank = 0.0;   ///< mean subproblem rank over reduced steps.
    double wall_time = 0.0;      ///< total loop time, seconds.
    double time_subproblem = 0.0;  ///< accumulated subproblem-solve seconds.
    double time_estimation = 0.0;  ///< accumulated estimator-evaluation seconds.
    double time_update = 0.0;      ///< accumulated POD/rebuild seconds.
    bool certified_ok = true;      ///< all per-step certification checks passed.
};

/// Full-order receding-horizon loop.  `cost` carries the scalar parameters
/// and the tracking data y_d, u_d on the *global* grid; each subproblem uses
/// the matching window with terminal target y_d(window end).
MPCResult run_fom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                      const SwitchingSignal& sig, const TimeGrid& grid,
                      const Vec& theta0, const CostConfig& cost,
                      const MPCConfig& cfg);

/// Reduced subproblems, full-order plant propagation, certified updates.
MPCResult run_fom_rom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                          const SwitchingSignal& sig, const TimeGrid& grid,
                          const Vec& theta0, const CostConfig& cost,
                          const MPCConfig& cfg);

/// Fully reduced loop: between updates the subproblems, the plant
/// propagation, and the estimators run in reduced coordinates only.
MPCResult run_rom_rom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                          const SwitchingSignal& sig, const TimeGrid& grid,
                          const Vec& theta0, const CostConfig& cost,
                          const MPCConfig& cfg);

/// A reduced model bundled with everything the certified drivers need.
struct ReducedModel {
    ReducedSystem sys;
    RieszBlocks blocks;
    Vec pod_eigenvalues;
};

/// Appends the freshly computed optimal state/adjoint pair to the FIFO
/// snapshot window, recomputes the POD basis (energy target `pod_energy`,
/// rank cap `pod_max_rank`), projects the operators, and rebuilds the
/// offline residual blocks.
ReducedModel update_rom(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                        SnapshotSet& window, const Trajectory& opt_state,
                        const Trajectory& opt_adjoint, const MPCConfig& cfg);

/// Builds a ReducedModel around an externally supplied basis (used for the
/// exact-reduction checks and for injecting `MPCConfig::initial_rom`).
ReducedModel make_reduced_model(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                                const Mat& V);

}  // namespace smpc

#endif  // SMPC_MPC_HPP
