#include <smpc/mpc.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace smpc {

double ToleranceSchedule::at(int n) const {
    return std::max(base * std::pow(decay, n), floor);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// One prediction-horizon subproblem: window grid, windowed tracking data
/// (terminal target = desired output at the window end), switching structure.
struct WindowProblem {
    TimeGrid wgrid;
    CostConfig wcost;
    HorizonStructure hs;
    int k0 = 0, k1 = 0;
};

WindowProblem make_window(const SwitchingSignal& sig, const TimeGrid& grid,
                          const CostConfig& cost, const MPCConfig& cfg, int k0) {
    WindowProblem w;
    w.k0 = k0;
    w.k1 = std::min(k0 + cfg.horizon_steps, grid.num_nodes - 1);
    w.wgrid = grid.window(k0, w.k1);
    w.wcost = cost;
    w.wcost.y_d = cost.y_d.window(k0, w.k1);
    w.wcost.u_d = cost.u_d.window(k0, w.k1);
    w.wcost.y_T = cost.y_d.values[static_cast<std::size_t>(w.k1)];
    w.hs = analyze_horizon(sig, w.wgrid);
    return w;
}

/// Warm start for the next window: previous optimal control shifted left by
/// `shift` nodes, padded with its final value; node 0 stays zero.
Trajectory shifted_warm_start(const Trajectory& u, const TimeGrid& next_grid, int shift) {
    Trajectory w(next_grid, u.dim());
    const int last = u.num_nodes() - 1;
    for (int j = 1; j < next_grid.num_nodes; ++j)
        w.values[static_cast<std::size_t>(j)] =
            u.values[static_cast<std::size_t>(std::min(j + shift, last))];
    return w;
}

/// Number of switching intervals of the horizon touched by (t_0, t_k].
int touched_intervals(const HorizonStructure& hs, int k) {
    if (k <= 0) return 0;
    int idx = 0;
    for (int s : hs.jump_nodes) {
        if (s < k) ++idx;
        else break;
    }
    return idx + 1;
}

/// Control bound of one accepted reduced subproblem, split as
/// delta_u(u, d)^2 = du0_sq + factor * d^2 so the carried state bound can be
/// folded in without re-evaluating the estimator.
struct Estimate {
    double du0_sq = 0.0;
    double factor = 0.0;
    Trajectory theta_check;  ///< full-order window state under the reduced control.
    bool have_theta_check = false;
};

Estimate evaluate_control_bound(ControlEstimator est,
                                const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                                const ReducedModel& rm, const WindowProblem& w,
                                const ConstantsBundle& cb, const SwitchingSignal& sig,
                                const OptimizerResult& opt_r,
                                const Vec& theta_start_full, double proj_defect_m) {
    Estimate e;
    const double lam = w.wcost.lambda;
    const double mu = w.wcost.mu;
    const double c1 = constant_c1(w.hs, cb, mu);

    if (est == ControlEstimator::TildeDeltaB) {
        const StateBound st = delta_theta_reduced(rm.sys, rm.blocks, w.hs, cb,
                                                  opt_r.state, opt_r.u, proj_defect_m);
        const AdjointBound ad = delta_p_reduced(rm.sys, rm.blocks, w.hs, cb, sig,
                                                opt_r.adjoint, opt_r.y,
                                                w.wcost.y_d, w.wcost.y_T, mu);
        const ControlBound bnd = tilde_delta_B(w.hs, cb, lam, mu,
                                               ad.total * ad.total, st.total * st.total, 0.0);
        e.du0_sq = bnd.total * bnd.total;
        e.factor = c1;
        return e;
    }

    // Expensive/intermediate estimators: one full-order forward solve under
    // the reduced control, plus one full-order adjoint solve.
    e.theta_check = solve_state(solvers, sig, w.wgrid, theta_start_full, opt_r.u);
    e.have_theta_check = true;
    const Trajectory y_check = apply_output(ops, sig, e.theta_check);
    const AdjointSolution p_r = lift(rm.sys, opt_r.adjoint);

    if (est == ControlEstimator::DeltaA) {
        AdjointData data;
        data.y = &y_check;
        data.y_d = &w.wcost.y_d;
        data.y_T = w.wcost.y_T;
        data.mu = mu;
        const AdjointSolution p_hat = solve_adjoint(solvers, sig, w.wgrid, data);
        const double mm = input_adjoint_mismatch_sq(ops, sig, p_r, p_hat);
        const ControlBound bnd = delta_A(w.hs, cb, lam, mu, mm, 0.0);
        e.du0_sq = bnd.total * bnd.total;
        e.factor = c1 / (2.0 * lam);
    } else {
        AdjointData data;
        data.y = &opt_r.y;  // adjoint driven by the reduced outputs
        data.y_d = &w.wcost.y_d;
        data.y_T = w.wcost.y_T;
        data.mu = mu;
        const AdjointSolution p_check = solve_adjoint(solvers, sig, w.wgrid, data);
        const double mm = input_adjoint_mismatch_sq(ops, sig, p_r, p_check);
        const double tau = w.wgrid.tau();
        double out_mm = 0.0;
        for (int k = 1; k < w.wgrid.num_nodes; ++k)
            out_mm += tau * (opt_r.y.values[static_cast<std::size_t>(k)] -
                             y_check.values[static_cast<std::size_t>(k)]).squaredNorm();
        const double term_mm = (opt_r.y.values.back() - y_check.values.back()).squaredNorm();
        const ControlBound bnd = delta_B(w.hs, cb, lam, mu, mm, out_mm, term_mm, 0.0);
        e.du0_sq = bnd.total * bnd.total;
        e.factor = c1 / lam;
    }
    return e;
}

/// Mass-ratio conversion applied when a sampling instant coincides with a
/// switch: the recursion bounds the error in the mass norm left of the
/// instant, while the next horizon measures its initial error in the mode
/// right of it.
double handover_conversion(const SwitchingSignal& sig, const TimeGrid& grid,
                           const ConstantsBundle& cb, int node) {
    if (node <= 0 || node >= grid.num_nodes - 1) return 1.0;
    const double t = grid.node(node);
    const int ml = sig.mode_at(t, Side::Left);
    const int mr = sig.mode_at(t, Side::Right);
    if (ml == mr) return 1.0;
    return cb.c(mr - 1, ml - 1);
}

/// Shared implementation of the two reduced drivers; `reduced_plant` selects
/// the fully reduced loop (state propagated in reduced coordinates between
/// updates) versus full-order plant propagation.
MPCResult run_reduced_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                          const SwitchingSignal& sig, const TimeGrid& grid,
                          const Vec& theta0, const CostConfig& cost,
                          const MPCConfig& cfg, bool reduced_plant) {
    const auto t_total = Clock::now();
    const int K = grid.num_nodes;
    const double lam = cost.lambda;
    FullControlSystem fullsys(solvers);
    const ConstantsBundle cb = compute_constants(ops, solvers);

    MPCResult res;
    res.control = Trajectory(grid, ops.num_inputs);
    res.state = Trajectory(grid, ops.dim);
    res.output = Trajectory(grid, ops.num_outputs);
    res.state.values[0] = theta0;
    res.output.values[0] = ops.output(sig.mode_at(grid.node(0), Side::Right)) * theta0;

    SnapshotSet window(cfg.pod_window);
    std::unique_ptr<ReducedModel> rm;
    std::unique_ptr<ReducedControlSystem> redsys;

    Vec theta_full = theta0;  // full-order plant state (FOM plant only)
    Vec xhat;                 // reduced plant state (ROM plant only)
    double delta_t = 0.0;

    if (cfg.initial_rom != nullptr) {
        rm = std::make_unique<ReducedModel>(make_reduced_model(ops, solvers, cfg.initial_rom->V));
        redsys = std::make_unique<ReducedControlSystem>(rm->sys);
        if (reduced_plant) {
            xhat = project_initial(rm->sys, ops.v_inner, theta0);
            const int mode0 = sig.mode_at(grid.node(0), Side::Right);
            delta_t = energy_norm(theta0 - rm->sys.V * xhat, ops.mass(mode0));
        }
    }

    Trajectory warm;
    bool have_warm = false;

    // Synchronized full-order reference for the certification oracle.
    Vec theta_ref = theta0;
    Trajectory ref_warm;
    bool have_ref_warm = false;

    int n = 0;
    while (true) {
        const int k0 = n * cfg.shift_steps;
        if (k0 >= K - 1) break;
        if (cfg.num_steps >= 0 && n >= cfg.num_steps) break;
        const auto t_step = Clock::now();

        const WindowProblem w = make_window(sig, grid, cost, cfg, k0);
        const int applied = std::min(cfg.shift_steps, w.k1 - k0);
        const double delta_entry = delta_t;

        const bool have_rom = (rm != nullptr);
        Vec scheme_state_full = reduced_plant
                                    ? (have_rom ? Vec(rm->sys.V * xhat) : theta_full)
                                    : theta_full;

        MPCStepLog log;
        log.step = n;
        log.t = grid.node(k0);
        log.delta_t = delta_entry;

        // Certification oracle, part 1: measured state gap and the exact
        // reference subproblem (excluded from the timing buckets).
        OptimizerResult opt_ref;
        if (cfg.certify) {
            log.measured_state_gap =
                energy_norm(Vec(theta_ref - scheme_state_full), ops.mass(w.hs.initial_mode));
            opt_ref = solve_ocp(fullsys, sig, w.wgrid, theta_ref, w.wcost, cfg.optimizer,
                                have_ref_warm ? &ref_warm : nullptr);
        }

        OptimizerResult opt_r;
        Estimate est;
        bool triggered = true;
        double du0 = std::numeric_limits<double>::infinity();
        double du = std::numeric_limits<double>::infinity();
        double dnext = 0.0;

        if (have_rom) {
            const Vec x0red = reduced_plant
                                  ? xhat
                                  : project_initial(rm->sys, ops.v_inner, theta_full);
            const auto t_sub = Clock::now();
            opt_r = solve_ocp(*redsys, sig, w.wgrid, x0red, w.wcost, cfg.optimizer,
                              have_warm ? &warm : nullptr);
            res.time_subproblem += seconds_since(t_sub);

            const auto t_est = Clock::now();
            double proj_defect = 0.0;
            if (!reduced_plant && cfg.estimator == ControlEstimator::TildeDeltaB)
                proj_defect = energy_norm(Vec(theta_full - rm->sys.V * x0red),
                                          ops.mass(w.hs.initial_mode));
            est = evaluate_control_bound(cfg.estimator, ops, solvers, *rm, w, cb, sig,
                                         opt_r, scheme_state_full, proj_defect);
            const double du_sq = est.du0_sq + est.factor * delta_entry * delta_entry;
            du0 = std::sqrt(est.du0_sq);
            du = std::sqrt(du_sq);

            const int nt = touched_intervals(w.hs, applied);
            const double w0 = state_weight_from_start(w.hs, cb, nt);
            const double c4 = constant_c4(w.hs, cb, nt);
            double dnext_sq;
            if (!reduced_plant) {
                dnext_sq = w0 * delta_entry * delta_entry + 0.5 * c4 * du_sq;
            } else {
                const double r_sq = state_residual_sq_reduced(
                    rm->sys, rm->blocks, w.hs, state_interval_weights(w.hs, cb, nt),
                    opt_r.state, opt_r.u, applied);
                dnext_sq = w0 * delta_entry * delta_entry + r_sq + c4 * du_sq;
            }
            dnext_sq *= handover_conversion(sig, grid, cb, k0 + applied);
            dnext = std::sqrt(dnext_sq);
            res.time_estimation += seconds_since(t_est);

            triggered = (du0 > cfg.tol_control.at(n)) || (dnext > cfg.tol_state.at(n));
        }

        const Trajectory* accepted_u = nullptr;
        OptimizerResult opt_f;

        if (!triggered) {
            // Accept the reduced control and advance the plant.
            if (!reduced_plant) {
                Trajectory plant;
                if (est.have_theta_check) {
                    plant = est.theta_check;
                } else {
                    const TimeGrid sgrid = grid.window(k0, k0 + applied);
                    const Trajectory ushort = opt_r.u.window(0, applied);
                    plant = solve_state(solvers, sig, sgrid, theta_full, ushort);
                }
                for (int j = 1; j <= applied; ++j) {
                    const int g = k0 + j;
                    const int mode = sig.mode_at(grid.node(g), Side::Left);
                    res.control.values[static_cast<std::size_t>(g)] = opt_r.u.values[static_cast<std::size_t>(j)];
                    res.state.values[static_cast<std::size_t>(g)] = plant.values[static_cast<std::size_t>(j)];
                    res.output.values[static_cast<std::size_t>(g)] =
                        ops.output(mode) * plant.values[static_cast<std::size_t>(j)];
                }
                theta_full = plant.values[static_cast<std::size_t>(applied)];
            } else {
                for (int j = 1; j <= applied; ++j) {
                    const int g = k0 + j;
                    res.control.values[static_cast<std::size_t>(g)] = opt_r.u.values[static_cast<std::size_t>(j)];
                    res.state.values[static_cast<std::size_t>(g)] =
                        rm->sys.V * opt_r.state.values[static_cast<std::size_t>(j)];
                    res.output.values[static_cast<std::size_t>(g)] = opt_r.y.values[static_cast<std::size_t>(j)];
                }
                xhat = opt_r.state.values[static_cast<std::size_t>(applied)];
            }
            delta_t = dnext;
            accepted_u = &opt_r.u;

            log.rank = rm->sys.r;
            log.updated = false;
            log.iterations = opt_r.iterations;
            log.stationarity = opt_r.stationarity;
            log.subproblem_cost = opt_r.cost;
        } else {
            // Full-order fallback from the scheme's current state, snapshot
            // refresh and basis rebuild.
            const auto t_sub = Clock::now();
            const Trajectory* warm_fb =
                have_rom ? &opt_r.u : (have_warm ? &warm : nullptr);
            opt_f = solve_ocp(fullsys, sig, w.wgrid, scheme_state_full, w.wcost,
                              cfg.optimizer, warm_fb);
            res.time_subproblem += seconds_since(t_sub);

            for (int j = 1; j <= applied; ++j) {
                const int g = k0 + j;
                res.control.values[static_cast<std::size_t>(g)] = opt_f.u.values[static_cast<std::size_t>(j)];
                res.state.values[static_cast<std::size_t>(g)] = opt_f.state.values[static_cast<std::size_t>(j)];
                res.output.values[static_cast<std::size_t>(g)] = opt_f.y.values[static_cast<std::size_t>(j)];
            }
            const Vec theta_next = opt_f.state.values[static_cast<std::size_t>(applied)];

            const auto t_upd = Clock::now();
            rm = std::make_unique<ReducedModel>(
                update_rom(ops, solvers, window, opt_f.state, opt_f.adjoint.traj, cfg));
            redsys = std::make_unique<ReducedControlSystem>(rm->sys);
            res.time_update += seconds_since(t_upd);

            if (!reduced_plant) {
                theta_full = theta_next;
            } else {
                xhat = project_initial(rm->sys, ops.v_inner, theta_next);
            }
            delta_t = 0.0;
            dnext = 0.0;
            accepted_u = &opt_f.u;
            ++res.num_updates;

            log.rank = 0;
            log.updated = true;
            log.iterations = opt_f.iterations;
            log.stationarity = opt_f.stationarity;
            log.subproblem_cost = opt_f.cost;
        }

        log.delta_u0 = du0;
        log.delta_u = du;
        log.delta_t_next = delta_t;

        // Warm start for the next subproblem.
        const int nk0 = k0 + cfg.shift_steps;
        if (nk0 < K - 1) {
            const int nk1 = std::min(nk0 + cfg.horizon_steps, K - 1);
            warm = shifted_warm_start(*accepted_u, grid.window(nk0, nk1), cfg.shift_steps);
            have_warm = true;
        }

        // Certification oracle, part 2: control gap and reference update.
        if (cfg.certify) {
            Trajectory diff = *accepted_u;
            for (int k = 0; k < diff.num_nodes(); ++k)
                diff.values[static_cast<std::size_t>(k)] -= opt_ref.u.values[static_cast<std::size_t>(k)];
            log.measured_control_gap = Trajectory::norm(diff);

            const double c1 = constant_c1(w.hs, cb, w.wcost.mu);
            const double control_bound =
                triggered ? std::sqrt(c1 / (2.0 * lam)) * delta_entry : du;
            const double allowance =
                cfg.certify_slack + 20.0 * cfg.optimizer.abs_tol / lam;
            const bool state_ok = log.measured_state_gap <= delta_entry + cfg.certify_slack;
            const bool control_ok = log.measured_control_gap <= control_bound + allowance;
            log.cert_ok = state_ok && control_ok;
            if (!log.cert_ok) res.certified_ok = false;

            if (triggered) {
                // Re-base the reference on the scheme's carried state; the
                // bound was reset to zero at exactly this state.
                theta_ref = reduced_plant ? Vec(rm->sys.V * xhat) : theta_full;
                ref_warm = warm;
                have_ref_warm = have_warm;
            } else {
                theta_ref = opt_ref.state.values[static_cast<std::size_t>(applied)];
                if (nk0 < K - 1) {
                    const int nk1 = std::min(nk0 + cfg.horizon_steps, K - 1);
                    ref_warm = shifted_warm_start(opt_ref.u, grid.window(nk0, nk1), cfg.shift_steps);
                    have_ref_warm = true;
                }
            }
        }

        log.wall_time = seconds_since(t_step);
        res.log.push_back(log);
        ++n;
    }

    res.cost = evaluate_cost(res.control, res.output, cost);
    double rank_sum = 0.0;
    int rank_count = 0;
    for (const auto& l : res.log)
        if (l.rank > 0) {
            rank_sum += l.rank;
            ++rank_count;
        }
    res.average_rank = rank_count > 0 ? rank_sum / rank_count : 0.0;
    res.wall_time = seconds_since(t_total);
    return res;
}

}  // namespace

MPCResult run_fom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                      const SwitchingSignal& sig, const TimeGrid& grid,
                      const Vec& theta0, const CostConfig& cost,
                      const MPCConfig& cfg) {
    const auto t_total = Clock::now();
    const int K = grid.num_nodes;
    FullControlSystem sys(solvers);

    MPCResult res;
    res.control = Trajectory(grid, ops.num_inputs);
    res.state = Trajectory(grid, ops.dim);
    res.output = Trajectory(grid, ops.num_outputs);
    res.state.values[0] = theta0;
    res.output.values[0] = ops.output(sig.mode_at(grid.node(0), Side::Right)) * theta0;

    Vec theta = theta0;
    Trajectory warm;
    bool have_warm = false;

    int n = 0;
    while (true) {
        const int k0 = n * cfg.shift_steps;
        if (k0 >= K - 1) break;
        if (cfg.num_steps >= 0 && n >= cfg.num_steps) break;
        const auto t_step = Clock::now();

        const WindowProblem w = make_window(sig, grid, cost, cfg, k0);
        const auto t_sub = Clock::now();
        OptimizerResult opt = solve_ocp(sys, sig, w.wgrid, theta, w.wcost, cfg.optimizer,
                                        have_warm ? &warm : nullptr);
        res.time_subproblem += seconds_since(t_sub);

        const int applied = std::min(cfg.shift_steps, w.k1 - k0);
        for (int j = 1; j <= applied; ++j) {
            const int g = k0 + j;
            res.control.values[static_cast<std::size_t>(g)] = opt.u.values[static_cast<std::size_t>(j)];
            res.state.values[static_cast<std::size_t>(g)] = opt.state.values[static_cast<std::size_t>(j)];
            res.output.values[static_cast<std::size_t>(g)] = opt.y.values[static_cast<std::size_t>(j)];
        }
        theta = opt.state.values[static_cast<std::size_t>(applied)];

        const int nk0 = k0 + cfg.shift_steps;
        if (nk0 < K - 1) {
            const int nk1 = std::min(nk0 + cfg.horizon_steps, K - 1);
            warm = shifted_warm_start(opt.u, grid.window(nk0, nk1), cfg.shift_steps);
            have_warm = true;
        }

        MPCStepLog log;
        log.step = n;
        log.t = grid.node(k0);
        log.rank = 0;
        log.updated = false;
        log.iterations = opt.iterations;
        log.stationarity = opt.stationarity;
        log.subproblem_cost = opt.cost;
        log.wall_time = seconds_since(t_step);
        res.log.push_back(log);
        ++n;
    }

    res.cost = evaluate_cost(res.control, res.output, cost);
    res.wall_time = seconds_since(t_total);
    return res;
}

MPCResult run_fom_rom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                          const SwitchingSignal& sig, const TimeGrid& grid,
                          const Vec& theta0, const CostConfig& cost,
                          const MPCConfig& cfg) {
    return run_reduced_mpc(ops, solvers, sig, grid, theta0, cost, cfg, false);
}

MPCResult run_rom_rom_mpc(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                          const SwitchingSignal& sig, const TimeGrid& grid,
                          const Vec& theta0, const CostConfig& cost,
                          const MPCConfig& cfg) {
    return run_reduced_mpc(ops, solvers, sig, grid, theta0, cost, cfg, true);
}

ReducedModel update_rom(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                        SnapshotSet& window, const Trajectory& opt_state,
                        const Trajectory& opt_adjoint, const MPCConfig& cfg) {
    window.append_pair(opt_state, opt_adjoint);
    const PODBasis basis = compute_pod(window, ops.v_inner, cfg.pod_max_rank);
    bool reached = false;
    const int r = select_rank(basis, cfg.pod_energy, &reached);
    const Mat V = basis.V.leftCols(r);
    ReducedModel rm;
    rm.sys = galerkin_project(ops, V);
    rm.blocks = RieszBlocks(ops, solvers, V);
    rm.pod_eigenvalues = basis.eigenvalues;
    return rm;
}

ReducedModel make_reduced_model(const SwitchedOperatorSet& ops, SystemSolvers& solvers,
                                const Mat& V) {
    ReducedModel rm;
    rm.sys = galerkin_project(ops, V);
    rm.blocks = RieszBlocks(ops, solvers, V);
    return rm;
}

}  // namespace smpc
