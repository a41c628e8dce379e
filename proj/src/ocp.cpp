#include <smpc/ocp.hpp>

#include <smpc/adjoint.hpp>
#include <smpc/forward.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace smpc {

Trajectory FullControlSystem::solve_state(const SwitchingSignal& sig, const TimeGrid& grid,
                                          const Vec& x0, const Trajectory& u) {
    return smpc::solve_state(*solvers_, sig, grid, x0, u);
}

Trajectory FullControlSystem::apply_output(const SwitchingSignal& sig,
                                           const Trajectory& theta) const {
    return smpc::apply_output(solvers_->ops(), sig, theta);
}

AdjointSolution FullControlSystem::solve_adjoint(const SwitchingSignal& sig,
                                                 const TimeGrid& grid,
                                                 const AdjointData& data) {
    return smpc::solve_adjoint(*solvers_, sig, grid, data);
}

Vec FullControlSystem::input_transpose_apply(int mode, const Vec& p) const {
    return solvers_->ops().input(mode).transpose() * p;
}

double evaluate_cost(const Trajectory& u, const Trajectory& y, const CostConfig& cost) {
    const TimeGrid& grid = u.grid;
    const double tau = grid.tau();
    const int K = grid.num_nodes;
    double smooth = 0.0;
    double l1 = 0.0;
    for (int k = 1; k < K; ++k) {
        const Vec& uk = u.values[k];
        for (int i = 0; i < uk.size(); ++i) {
            if (uk[i] < cost.u_lo - 1e-12 || uk[i] > cost.u_hi + 1e-12)
                return std::numeric_limits<double>::infinity();
        }
        smooth += 0.5 * tau * (y.values[k] - cost.y_d.values[k]).squaredNorm();
        smooth += 0.5 * cost.lambda * tau * (uk - cost.u_d.values[k]).squaredNorm();
        l1 += tau * uk.lpNorm<1>();
    }
    if (cost.mu != 0.0)
        smooth += 0.5 * cost.mu * (y.values[K - 1] - cost.y_T).squaredNorm();
    return smooth + cost.c_l1 * l1;
}

Trajectory smooth_gradient(const ControlSystem& sys, const SwitchingSignal& sig,
                           const Trajectory& u, const AdjointSolution& adj,
                           const CostConfig& cost) {
    const TimeGrid& grid = u.grid;
    Trajectory g(grid, sys.num_inputs());
    for (int k = 1; k < grid.num_nodes; ++k) {
        const int mode = sig.mode_at(grid.node(k), Side::Left);
        g.values[k] = cost.lambda * (u.values[k] - cost.u_d.values[k]) +
                      sys.input_transpose_apply(mode, adj.traj.values[k]);
    }
    return g;
}

Vec prox_nonsmooth(const Vec& v, double alpha, const CostConfig& cost) {
    const double thr = alpha * cost.c_l1;
    Vec out(v.size());
    for (int i = 0; i < v.size(); ++i) {
        double z = 0.0;
        if (v[i] > thr) z = v[i] - thr;
        else if (v[i] < -thr) z = v[i] + thr;
        out[i] = std::clamp(z, cost.u_lo, cost.u_hi);
    }
    return out;
}

namespace {

/// Proximal step on the whole control trajectory (node 0 pinned to zero).
Trajectory prox_step(const Trajectory& u, const Trajectory& g, double alpha,
                     const CostConfig& cost) {
    Trajectory out(u.grid, static_cast<int>(u.values[0].size()));
    for (int k = 1; k < u.num_nodes(); ++k)
        out.values[k] = prox_nonsmooth(u.values[k] - alpha * g.values[k], alpha, cost);
    return out;
}

struct Evaluation {
    Trajectory state;
    Trajectory y;
    double objective = 0.0;
};

Evaluation evaluate(ControlSystem& sys, const SwitchingSignal& sig,
                    const TimeGrid& grid, const Vec& x0, const Trajectory& u,
                    const CostConfig& cost) {
    Evaluation ev;
    ev.state = sys.solve_state(sig, grid, x0, u);
    ev.y = sys.apply_output(sig, ev.state);
    ev.objective = evaluate_cost(u, ev.y, cost);
    return ev;
}

}  // namespace

OptimizerResult solve_ocp(ControlSystem& sys, const SwitchingSignal& sig,
                          const TimeGrid& grid, const Vec& x0, const CostConfig& cost,
                          const OptimizerOptions& opts, const Trajectory* warm_start) {
    if (cost.y_d.num_nodes() != grid.num_nodes || cost.u_d.num_nodes() != grid.num_nodes)
        throw std::invalid_argument("solve_ocp: tracking data grid mismatch");

    Trajectory u(grid, sys.num_inputs());
    if (warm_start != nullptr) {
        if (warm_start->num_nodes() != grid.num_nodes)
            throw std::invalid_argument("solve_ocp: warm start grid mismatch");
        u = *warm_start;
        u.values[0].setZero();
        for (int k = 1; k < grid.num_nodes; ++k)
            u.values[k] = u.values[k].cwiseMax(cost.u_lo).cwiseMin(cost.u_hi);
    }

    Evaluation ev = evaluate(sys, sig, grid, x0, u, cost);
    AdjointData adata{&ev.y, &cost.y_d, cost.y_T, cost.mu};
    AdjointSolution adj = sys.solve_adjoint(sig, grid, adata);
    Trajectory g = smooth_gradient(sys, sig, u, adj, cost);

    double alpha = 1.0 / cost.lambda;
    std::deque<double> history{ev.objective};
    OptimizerResult res;
    res.converged = false;
    double stationarity = std::numeric_limits<double>::infinity();

    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        // Stationarity: fixed-point residual of the unit-step proximal map.
        Trajectory fixed = prox_step(u, g, 1.0, cost);
        double res_sq = 0.0;
        for (int k = 1; k < grid.num_nodes; ++k)
            res_sq += grid.tau() * (fixed.values[k] - u.values[k]).squaredNorm();
        stationarity = std::sqrt(res_sq);
        if (stationarity <= opts.abs_tol + opts.rel_tol * Trajectory::norm(u)) {
            res.converged = true;
            break;
        }

        // Backtracked proximal step with a nonmonotone acceptance rule.
        bool accepted = false;
        Trajectory u_trial = u;
        Evaluation ev_trial;
        for (int bt = 0; bt < 60; ++bt) {
            u_trial = prox_step(u, g, alpha, cost);
            ev_trial = evaluate(sys, sig, grid, x0, u_trial, cost);
            const double reference = *std::max_element(history.begin(), history.end());
            double dist_sq = 0.0;
            for (int k = 1; k < grid.num_nodes; ++k)
                dist_sq += grid.tau() * (u_trial.values[k] - u.values[k]).squaredNorm();
            if (ev_trial.objective <=
                reference - opts.sufficient_decrease / (2.0 * alpha) * dist_sq) {
                accepted = true;
                break;
            }
            alpha *= opts.backtrack_factor;
        }
        if (!accepted) break;  // step size exhausted: numerically stationary

        AdjointData adata_trial{&ev_trial.y, &cost.y_d, cost.y_T, cost.mu};
        AdjointSolution adj_trial = sys.solve_adjoint(sig, grid, adata_trial);
        Trajectory g_trial = smooth_gradient(sys, sig, u_trial, adj_trial, cost);

        // Barzilai-Borwein step length from the accepted move.
        double sy = 0.0, yy = 0.0;
        for (int k = 1; k < grid.num_nodes; ++k) {
            const Vec du = u_trial.values[k] - u.values[k];
            const Vec dg = g_trial.values[k] - g.values[k];
            sy += grid.tau() * du.dot(dg);
            yy += grid.tau() * dg.dot(dg);
        }
        alpha = (sy > 0.0 && yy > 0.0) ? std::clamp(sy / yy, opts.bb_min, opts.bb_max)
                                       : 1.0 / cost.lambda;

        u = std::move(u_trial);
        ev = std::move(ev_trial);
        adj = std::move(adj_trial);
        g = std::move(g_trial);
        history.push_back(ev.objective);
        if (static_cast<int>(history.size()) > opts.nonmonotone_window) history.pop_front();
    }

    res.u = std::move(u);
    res.state = std::move(ev.state);
    res.y = std::move(ev.y);
    res.adjoint = std::move(adj);
    res.cost = ev.objective;
    res.stationarity = stationarity;
    res.iterations = iter;
    return res;
}

}  // namespace smpc
