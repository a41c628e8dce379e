#include <smpc/experiments.hpp>

#include <smpc/csv.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace smpc {

namespace {

/// Interval of the horizon containing node k approached from the left
/// (step (t_{k-1}, t_k] lies left of every switch node >= k).
int interval_of_node(const HorizonStructure& hs, int k) {
    int idx = 0;
    for (int s : hs.jump_nodes) {
        if (s < k) ++idx;
        else break;
    }
    return idx;
}

/// Number of switching intervals touched by (t_0, t_k].
int touched_intervals(const HorizonStructure& hs, int k) {
    return k <= 0 ? 0 : interval_of_node(hs, k) + 1;
}

Trajectory node_difference(const Trajectory& a, const Trajectory& b) {
    if (a.num_nodes() != b.num_nodes())
        throw std::invalid_argument("node_difference: grid mismatch");
    Trajectory d = a;
    for (int k = 0; k < d.num_nodes(); ++k) d[k] -= b[k];
    return d;
}

void write_mpc_log_csv(const std::string& path, const MPCResult& res,
                       std::uint64_t config_hash) {
    CsvWriter w(path, {"step", "t", "rank", "updated", "delta_t", "delta_u0",
                       "delta_u", "delta_t_next", "iterations", "stationarity",
                       "subproblem_cost", "wall_time", "measured_state_gap",
                       "measured_control_gap", "cert_ok", "config_hash"});
    for (const MPCStepLog& l : res.log) {
        w.write_row({std::to_string(l.step), format_double(l.t),
                     std::to_string(l.rank), l.updated ? "1" : "0",
                     format_double(l.delta_t), format_double(l.delta_u0),
                     format_double(l.delta_u), format_double(l.delta_t_next),
                     std::to_string(l.iterations), format_double(l.stationarity),
                     format_double(l.subproblem_cost), format_double(l.wall_time),
                     format_double(l.measured_state_gap),
                     format_double(l.measured_control_gap), l.cert_ok ? "1" : "0",
                     std::to_string(config_hash)});
    }
}

}  // namespace

BenchmarkProblem make_benchmark_problem(const ExperimentConfig& cfg) {
    BenchmarkProblem p;
    p.assembly = assemble_two_rooms(cfg.benchmark);

    p.grid.t_start = 0.0;
    p.grid.t_end = cfg.t_end;
    p.grid.num_nodes = cfg.num_nodes();

    p.sig = make_alternating_signal(0.0, cfg.t_end, cfg.switch_period, cfg.first_mode,
                                    p.assembly.ops.num_modes);
    p.sig.validate_against(p.grid);

    p.cost = cfg.cost_template;
    p.cost.y_d = compute_tracking_target(p.assembly.ops, p.sig, p.grid);
    p.cost.u_d = Trajectory(p.grid, p.assembly.ops.num_inputs);
    p.cost.y_T = p.cost.y_d.values.back();

    p.theta0 = Vec::Ones(p.assembly.ops.dim);
    return p;
}

Vec random_normalized_state(const SwitchedOperatorSet& ops, int mode, unsigned int seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec v(ops.dim);
    for (int i = 0; i < ops.dim; ++i) v[i] = dist(gen);
    const double nrm = energy_norm(v, ops.mass(mode));
    if (nrm <= 0.0) throw std::runtime_error("random_normalized_state: degenerate draw");
    return v / nrm;
}

bool OpenLoopRow::valid(double slack) const {
    return state_margin <= slack && adjoint_margin <= slack &&
           control_margin_A <= slack && control_margin_B <= slack &&
           control_margin_B_cheap <= slack && opt_state_margin <= slack &&
           reduced_state_margin <= slack;
}

OpenLoopStudy run_openloop_study(const SwitchedOperatorSet& ops,
                                 SystemSolvers& solvers,
                                 const SwitchingSignal& sig,
                                 const TimeGrid& grid,
                                 const CostConfig& cost,
                                 const std::vector<int>& ranks,
                                 unsigned int seed,
                                 double slack) {
    OpenLoopStudy study;
    study.seed = seed;

    const HorizonStructure hs = analyze_horizon(sig, grid);
    const ConstantsBundle cb = compute_constants(ops, solvers);
    const int K = grid.num_nodes;
    const double tau = grid.tau();
    const double lam = cost.lambda;
    const double mu = cost.mu;

    // Full-order oracle: optimal pair from a seeded normalized initial value.
    const Vec theta0 = random_normalized_state(ops, hs.initial_mode, seed);
    FullControlSystem fullsys(solvers);
    const OptimizerResult opt_bar = solve_ocp(fullsys, sig, grid, theta0, cost);

    // POD basis from the optimal state/adjoint pair.
    SnapshotSet snaps(1);
    snaps.append_pair(opt_bar.state, opt_bar.adjoint.traj);
    const PODBasis basis = compute_pod(snaps, ops.v_inner);
    study.max_rank = basis.rank();

    const std::vector<double> w_state = state_interval_weights(hs, cb, hs.num_intervals());
    const std::vector<double> w_adj = adjoint_interval_weights(hs, cb);

    std::set<int> done;
    for (const int r_req : ranks) {
        const int r = std::min(r_req, study.max_rank);
        if (r <= 0 || !done.insert(r).second) continue;

        const Mat V = basis.V.leftCols(r);
        const ReducedSystem rsys = galerkin_project(ops, V);
        ReducedControlSystem redsys(rsys);

        const Vec x0 = project_initial(rsys, ops.v_inner, theta0);
        const double proj_defect =
            energy_norm(Vec(theta0 - V * x0), ops.mass(hs.initial_mode));

        const OptimizerResult opt_r = solve_ocp(redsys, sig, grid, x0, cost);
        const Trajectory theta_r = lift(rsys, opt_r.state);
        const AdjointSolution adj_r = lift(rsys, opt_r.adjoint);

        // Paired full-order solves: exact state under the reduced control
        // and the two exact adjoints of the estimator hierarchy.
        const Trajectory theta_check = solve_state(solvers, sig, grid, theta0, opt_r.u);
        const Trajectory y_check = apply_output(ops, sig, theta_check);

        AdjointData hat_data;
        hat_data.y = &y_check;
        hat_data.y_d = &cost.y_d;
        hat_data.y_T = cost.y_T;
        hat_data.mu = mu;
        const AdjointSolution p_hat = solve_adjoint(solvers, sig, grid, hat_data);

        AdjointData check_data;
        check_data.y = &opt_r.y;
        check_data.y_d = &cost.y_d;
        check_data.y_T = cost.y_T;
        check_data.mu = mu;
        const AdjointSolution p_check = solve_adjoint(solvers, sig, grid, check_data);

        OpenLoopRow row;
        row.r = r;

        // --- State bound: exact-under-reduced-control vs lifted reduced. ---
        const Trajectory e_state = node_difference(theta_check, theta_r);
        row.state_lhs =
            energy_norm_sq(e_state.values.back(), ops.mass(hs.terminal_mode)) +
            weighted_spacetime_norm_sq(e_state, sig, ops, FormFamily::Stiffness,
                                       w_state, K - 1);
        const StateBound sb =
            delta_theta(ops, solvers, hs, cb, theta_r, opt_r.u, proj_defect);
        row.state_bound = sb.total;
        row.state_margin = row.state_lhs - sb.total * sb.total;
        row.state_effectivity = sb.total > 0 ? std::sqrt(row.state_lhs) / sb.total : 1.0;

        // --- Adjoint bound: exact adjoint for the reduced outputs vs lifted. ---
        const Trajectory e_adj = node_difference(p_check.traj, adj_r.traj);
        row.adjoint_lhs =
            energy_norm_sq(e_adj.values.front(), ops.mass(hs.initial_mode)) +
            weighted_spacetime_norm_sq(e_adj, sig, ops, FormFamily::Stiffness,
                                       w_adj, K - 1);
        const AdjointResidual ares =
            compute_adjoint_residual(ops, sig, adj_r, opt_r.y, cost.y_d, cost.y_T, mu);
        const AdjointBound ab = delta_p(ops, solvers, hs, cb, ares);
        row.adjoint_bound = ab.total;
        row.adjoint_margin = row.adjoint_lhs - ab.total * ab.total;
        row.adjoint_effectivity =
            ab.total > 0 ? std::sqrt(row.adjoint_lhs) / ab.total : 1.0;

        // --- Control bounds against the true control error. ---
        row.control_error = Trajectory::norm(node_difference(opt_r.u, opt_bar.u));

        const double mm_A = input_adjoint_mismatch_sq(ops, sig, adj_r, p_hat);
        const ControlBound bA = delta_A(hs, cb, lam, mu, mm_A, 0.0);
        row.bound_A = bA.total;
        row.control_margin_A = row.control_error * row.control_error - bA.total * bA.total;
        row.eff_A = bA.total > 0 ? row.control_error / bA.total : 1.0;

        const double mm_B = input_adjoint_mismatch_sq(ops, sig, adj_r, p_check);
        double out_mm = 0.0;
        for (int k = 1; k < K; ++k)
            out_mm += tau * (opt_r.y[k] - y_check[k]).squaredNorm();
        const double term_mm = (opt_r.y.values.back() - y_check.values.back()).squaredNorm();
        const ControlBound bB = delta_B(hs, cb, lam, mu, mm_B, out_mm, term_mm, 0.0);
        row.bound_B = bB.total;
        row.control_margin_B = row.control_error * row.control_error - bB.total * bB.total;
        row.eff_B = bB.total > 0 ? row.control_error / bB.total : 1.0;

        const ControlBound bBt = tilde_delta_B(hs, cb, lam, mu, ab.total * ab.total,
                                               sb.total * sb.total, 0.0);
        row.bound_B_cheap = bBt.total;
        row.control_margin_B_cheap =
            row.control_error * row.control_error - bBt.total * bBt.total;
        row.eff_B_cheap = bBt.total > 0 ? row.control_error / bBt.total : 1.0;

        // --- Optimal-state bounds at every node. ---
        // Per-step residual dual energies of the lifted reduced trajectory,
        // cached so the truncated weighted sums below stay cheap.
        const StateResidual rres = compute_state_residual(ops, sig, theta_r, opt_r.u);
        std::vector<double> dstep(static_cast<std::size_t>(K), 0.0);
        for (int k = 1; k < K; ++k) {
            const int mode = hs.interval_modes[static_cast<std::size_t>(interval_of_node(hs, k))];
            const double dn = solvers.dual_norm_a(rres.values[static_cast<std::size_t>(k)], mode);
            dstep[static_cast<std::size_t>(k)] = tau * dn * dn;
        }

        row.opt_state_margin = -std::numeric_limits<double>::infinity();
        row.reduced_state_margin = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            const int mode = (k == 0) ? hs.initial_mode
                                      : sig.mode_at(grid.node(k), Side::Left);
            const int nt = touched_intervals(hs, k);

            const double true_opt =
                energy_norm_sq(Vec(theta_check[k] - opt_bar.state[k]), ops.mass(mode));
            const double b14 = optimal_state_bound_sq(hs, cb, k, 0.0, row.control_error);
            row.opt_state_margin = std::max(row.opt_state_margin, true_opt - b14);

            double res_trunc = 0.0;
            if (k > 0) {
                const std::vector<double> wt = state_interval_weights(hs, cb, nt);
                for (int j = 1; j <= k; ++j)
                    res_trunc += wt[static_cast<std::size_t>(interval_of_node(hs, j))] *
                                 dstep[static_cast<std::size_t>(j)];
            }
            const double true_red =
                energy_norm_sq(Vec(theta_r[k] - opt_bar.state[k]), ops.mass(mode));
            const double b15 = reduced_state_bound_sq(hs, cb, k, 0.0, proj_defect,
                                                      row.control_error, res_trunc);
            row.reduced_state_margin = std::max(row.reduced_state_margin, true_red - b15);
        }

        if (!row.valid(slack)) study.all_valid = false;
        study.rows.push_back(row);
    }
    return study;
}

void write_openloop_csv(const std::string& path, const OpenLoopStudy& study,
                        std::uint64_t config_hash) {
    CsvWriter w(path, {"r", "state_lhs", "state_bound", "state_effectivity",
                       "adjoint_lhs", "adjoint_bound", "adjoint_effectivity",
                       "control_error", "bound_A", "bound_B", "bound_B_cheap",
                       "eff_A", "eff_B", "eff_B_cheap",
                       "opt_state_margin", "reduced_state_margin",
                       "state_margin", "adjoint_margin", "control_margin_A",
                       "control_margin_B", "control_margin_B_cheap",
                       "config_hash", "seed"});
    for (const OpenLoopRow& row : study.rows) {
        w.write_row({std::to_string(row.r), format_double(row.state_lhs),
                     format_double(row.state_bound), format_double(row.state_effectivity),
                     format_double(row.adjoint_lhs), format_double(row.adjoint_bound),
                     format_double(row.adjoint_effectivity),
                     format_double(row.control_error), format_double(row.bound_A),
                     format_double(row.bound_B), format_double(row.bound_B_cheap),
                     format_double(row.eff_A), format_double(row.eff_B),
                     format_double(row.eff_B_cheap),
                     format_double(row.opt_state_margin),
                     format_double(row.reduced_state_margin),
                     format_double(row.state_margin), format_double(row.adjoint_margin),
                     format_double(row.control_margin_A),
                     format_double(row.control_margin_B),
                     format_double(row.control_margin_B_cheap),
                     std::to_string(config_hash), std::to_string(study.seed)});
    }
}

SchemeMetrics compute_metrics(const SwitchedOperatorSet& ops,
                              const MPCResult& fom, const MPCResult& red) {
    SchemeMetrics m;
    const int K = fom.state.num_nodes();
    if (red.state.num_nodes() != K)
        throw std::invalid_argument("compute_metrics: grid mismatch");
    const double tau = fom.state.grid.tau();

    double num_th = 0.0, den_th = 0.0;
    for (int k = 1; k < K; ++k) {
        num_th += tau * energy_norm_sq(Vec(red.state[k] - fom.state[k]), ops.v_inner);
        den_th += tau * energy_norm_sq(fom.state[k], ops.v_inner);
    }
    double num_y = 0.0, den_y = 0.0;
    for (int k = 1; k < K; ++k) {
        num_y += tau * (red.output[k] - fom.output[k]).squaredNorm();
        den_y += tau * fom.output[k].squaredNorm();
    }
    const double den_u = Trajectory::norm(fom.control);
    if (den_th <= 0.0 || den_y <= 0.0 || den_u <= 0.0 || fom.cost == 0.0)
        throw std::runtime_error("compute_metrics: zero reference norm");

    m.e_theta = std::sqrt(num_th / den_th);
    m.e_y = std::sqrt(num_y / den_y);
    m.e_u = Trajectory::norm(node_difference(red.control, fom.control)) / den_u;
    m.e_J = std::abs(red.cost - fom.cost) / std::abs(fom.cost);
    return m;
}

MPCComparison run_mpc_comparison(const BenchmarkProblem& problem,
                                 SystemSolvers& solvers,
                                 const ExperimentConfig& cfg) {
    MPCComparison cmp;
    const SwitchedOperatorSet& ops = problem.assembly.ops;

    MPCConfig base = cfg.mpc;
    cmp.fom = run_fom_mpc(ops, solvers, problem.sig, problem.grid, problem.theta0,
                          problem.cost, base);

    for (const double tol : cfg.tolerances) {
        MPCComparisonRow row;
        row.tolerance = tol;

        MPCConfig c = base;
        c.tol_control.base = tol;
        c.tol_state.base = tol;

        c.estimator = cfg.estimator_fom_rom;
        row.fom_rom = run_fom_rom_mpc(ops, solvers, problem.sig, problem.grid,
                                      problem.theta0, problem.cost, c);
        c.estimator = cfg.estimator_rom_rom;
        row.rom_rom = run_rom_rom_mpc(ops, solvers, problem.sig, problem.grid,
                                      problem.theta0, problem.cost, c);

        row.metrics_fom_rom = compute_metrics(ops, cmp.fom, row.fom_rom);
        row.metrics_rom_rom = compute_metrics(ops, cmp.fom, row.rom_rom);
        row.speedup_fom_rom =
            row.fom_rom.wall_time > 0 ? cmp.fom.wall_time / row.fom_rom.wall_time : 0.0;
        row.speedup_rom_rom =
            row.rom_rom.wall_time > 0 ? cmp.fom.wall_time / row.rom_rom.wall_time : 0.0;
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

void write_mpc_comparison(const std::string& out_dir, const MPCComparison& cmp,
                          const ExperimentConfig& cfg, std::uint64_t config_hash) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string hash_str = std::to_string(config_hash);

    CsvWriter summary(out_dir + "/mpc_summary.csv",
                      {"scheme", "tolerance", "estimator", "cost", "num_updates",
                       "average_rank", "wall_time", "time_subproblem",
                       "time_estimation", "time_update", "speedup",
                       "e_u", "e_theta", "e_y", "e_J", "certified_ok",
                       "config_hash", "seed"});
    const std::string seed_str = std::to_string(cfg.seed);

    const auto emit = [&](const std::string& scheme, double tol,
                          const std::string& est, const MPCResult& res,
                          const SchemeMetrics* metrics, double speedup) {
        summary.write_row({scheme, format_double(tol), est, format_double(res.cost),
                           std::to_string(res.num_updates),
                           format_double(res.average_rank), format_double(res.wall_time),
                           format_double(res.time_subproblem),
                           format_double(res.time_estimation),
                           format_double(res.time_update), format_double(speedup),
                           metrics ? format_double(metrics->e_u) : "0",
                           metrics ? format_double(metrics->e_theta) : "0",
                           metrics ? format_double(metrics->e_y) : "0",
                           metrics ? format_double(metrics->e_J) : "0",
                           res.certified_ok ? "1" : "0", hash_str, seed_str});
    };

    emit("fom", 0.0, "-", cmp.fom, nullptr, 1.0);
    write_mpc_log_csv(out_dir + "/mpc_log_fom.csv", cmp.fom, config_hash);
    write_trajectory_csv(out_dir + "/fom_control.csv", cmp.fom.control, config_hash, cfg.seed);
    write_trajectory_csv(out_dir + "/fom_output.csv", cmp.fom.output, config_hash, cfg.seed);

    for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
        const MPCComparisonRow& row = cmp.rows[i];
        const std::string tag = "_tol" + std::to_string(i);
        emit("fom_rom", row.tolerance, estimator_name(cfg.estimator_fom_rom),
             row.fom_rom, &row.metrics_fom_rom, row.speedup_fom_rom);
        emit("rom_rom", row.tolerance, estimator_name(cfg.estimator_rom_rom),
             row.rom_rom, &row.metrics_rom_rom, row.speedup_rom_rom);
        write_mpc_log_csv(out_dir + "/mpc_log_fom_rom" + tag + ".csv", row.fom_rom,
                          config_hash);
        write_mpc_log_csv(out_dir + "/mpc_log_rom_rom" + tag + ".csv", row.rom_rom,
                          config_hash);
        write_trajectory_csv(out_dir + "/fom_rom_control" + tag + ".csv",
                             row.fom_rom.control, config_hash, cfg.seed);
        write_trajectory_csv(out_dir + "/rom_rom_control" + tag + ".csv",
                             row.rom_rom.control, config_hash, cfg.seed);
        write_trajectory_csv(out_dir + "/fom_rom_output" + tag + ".csv",
                             row.fom_rom.output, config_hash, cfg.seed);
        write_trajectory_csv(out_dir + "/rom_rom_output" + tag + ".csv",
                             row.rom_rom.output, config_hash, cfg.seed);
    }
}

}  // namespace smpc
