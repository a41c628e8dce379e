#ifndef SMPC_EXPERIMENTS_HPP
#define SMPC_EXPERIMENTS_HPP

// Benchmark-level experiment drivers shared by the CLI and the test suite:
// the open-loop estimator sharpness study (true errors vs. bounds and their
// effectivities over the reduced rank) and the closed-loop comparison of the
// three receding-horizon schemes, plus the relative error metrics between a
// full-order and a reduced closed-loop run.

#include <smpc/config.hpp>
#include <smpc/mpc.hpp>

#include <string>
#include <vector>

namespace smpc {

/// Fully assembled benchmark instance: operators, switching signal, global
/// time grid, tracking data, and the initial state of the closed loop.
struct BenchmarkProblem {
    BenchmarkAssembly assembly;
    SwitchingSignal sig;
    TimeGrid grid;
    CostConfig cost;   ///< scalars + y_d, u_d on the global grid, y_T = y_d(t_end).
    Vec theta0;        ///< closed-loop initial state (constant one by default).
};

/// Assembles the benchmark from an experiment configuration.
BenchmarkProblem make_benchmark_problem(const ExperimentConfig& cfg);

/// Seeded standard-normal coefficient vector, normalized in the mass norm of
/// the given mode.
Vec random_normalized_state(const SwitchedOperatorSet& ops, int mode, unsigned int seed);

/// One row of the open-loop study: every bound evaluated at reduced rank r
/// against the paired full-order truth.  "lhs" values are the exact
/// left-hand sides of the energy estimates; "margin" fields are
/// max(true - bound) style violations (negative when the bound holds) so the
/// caller can assert validity with an explicit slack.
struct OpenLoopRow {
    int r = 0;

    // State bound: lhs = ||e(T)||^2_m + ||e||^2_{a,omega} vs delta_theta^2.
    double state_lhs = 0.0;
    double state_bound = 0.0;    ///< delta_theta (not squared).
    double state_effectivity = 0.0;

    // Adjoint bound: lhs = ||eps(t_0^+)||^2_m + ||eps||^2_{a,omega~} vs delta_p^2.
    double adjoint_lhs = 0.0;
    double adjoint_bound = 0.0;  ///< delta_p (not squared).
    double adjoint_effectivity = 0.0;

    // Control bounds against the true control error ||u_hat - u_bar||_U.
    double control_error = 0.0;
    double bound_A = 0.0;
    double bound_B = 0.0;
    double bound_B_cheap = 0.0;
    double eff_A = 0.0;
    double eff_B = 0.0;
    double eff_B_cheap = 0.0;

    // Optimal-state bounds, worst violation over all grid nodes (<= 0 means
    // the bound holds everywhere).
    double opt_state_margin = 0.0;     ///< exact-vs-intermediate bound.
    double reduced_state_margin = 0.0; ///< exact-vs-reduced bound.

    // Worst violations for the squared energy estimates (<= 0 when valid).
    double state_margin = 0.0;
    double adjoint_margin = 0.0;
    double control_margin_A = 0.0;
    double control_margin_B = 0.0;
    double control_margin_B_cheap = 0.0;

    bool valid(double slack) const;
};

/// Open-loop study result for one seed.
struct OpenLoopStudy {
    unsigned int seed = 0;
    std::vector<OpenLoopRow> rows;
    int max_rank = 0;          ///< rank of the computed basis.
    bool all_valid = true;     ///< every bound >= its true value (with slack).
};

/// Runs the open-loop sharpness study: draws a seeded random initial value,
/// solves the full-order problem on `grid` (the oracle and the snapshot
/// source), builds a POD basis from its optimal state/adjoint pair, and for
/// each requested rank solves the reduced problem and evaluates every bound
/// against paired full-order solves.  `cost` must carry tracking data
/// matching `grid`.  Ranks beyond the computed basis are clamped.
OpenLoopStudy run_openloop_study(const SwitchedOperatorSet& ops,
                                 SystemSolvers& solvers,
                                 const SwitchingSignal& sig,
                                 const TimeGrid& grid,
                                 const CostConfig& cost,
                                 const std::vector<int>& ranks,
                                 unsigned int seed,
                                 double slack = 1e-10);

/// Writes the study as one CSV row per rank.
void write_openloop_csv(const std::string& path, const OpenLoopStudy& study,
                        std::uint64_t config_hash);

/// Relative closed-loop errors of a reduced scheme against the full-order
/// reference (space-time V-norm for the state, control-space norm for the
/// control, output L2 norm, relative cost gap).
struct SchemeMetrics {
    double e_u = 0.0;
    double e_theta = 0.0;
    double e_y = 0.0;
    double e_J = 0.0;
};

/// Computes the four relative metrics; throws on zero reference norms.
SchemeMetrics compute_metrics(const SwitchedOperatorSet& ops,
                              const MPCResult& fom, const MPCResult& red);

/// One tolerance level of the scheme comparison.
struct MPCComparisonRow {
    double tolerance = 0.0;
    MPCResult fom_rom;
    MPCResult rom_rom;
    SchemeMetrics metrics_fom_rom;
    SchemeMetrics metrics_rom_rom;
    double speedup_fom_rom = 0.0;
    double speedup_rom_rom = 0.0;
};

/// Full comparison: one full-order reference plus one row per tolerance.
struct MPCComparison {
    MPCResult fom;
    std::vector<MPCComparisonRow> rows;
};

/// Runs the three schemes on the benchmark problem for every tolerance in
/// `cfg.tolerances` (estimators per scheme from the config).
MPCComparison run_mpc_comparison(const BenchmarkProblem& problem,
                                 SystemSolvers& solvers,
                                 const ExperimentConfig& cfg);

/// Emits the comparison summary table, the per-step logs, and the
/// closed-loop trajectories under `out_dir`.
void write_mpc_comparison(const std::string& out_dir, const MPCComparison& cmp,
                          const ExperimentConfig& cfg, std::uint64_t config_hash);

}  // namespace smpc

#endif  // SMPC_EXPERIMENTS_HPP
