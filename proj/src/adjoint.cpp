#include <smpc/adjoint.hpp>

#include <smpc/norms.hpp>

#include <cmath>
#include <stdexcept>

namespace smpc {

AdjointSolution solve_adjoint(SystemSolvers& solvers, const SwitchingSignal& sig,
                              const TimeGrid& grid, const AdjointData& data) {
    const SwitchedOperatorSet& ops = solvers.ops();
    const Trajectory& y = *data.y;
    const Trajectory& y_d = *data.y_d;
    if (y.num_nodes() != grid.num_nodes || y_d.num_nodes() != grid.num_nodes)
        throw std::invalid_argument("solve_adjoint: output grid mismatch");
    const int K = grid.num_nodes;
    const double tau = grid.tau();

    AdjointSolution adj;
    adj.traj = Trajectory(grid, ops.dim);

    // Terminal anchor: m_{sigma(T)}(p(T), .) = mu <y(T) - y_T, C .>; the
    // terminal solve replaces the usual mass-carried source by the anchor.
    const int mode_T = sig.mode_at(grid.node(K - 1), Side::Left);
    Vec anchor = Vec::Zero(ops.dim);
    if (data.mu != 0.0)
        anchor = data.mu * (ops.output(mode_T).transpose() * (y.values[K - 1] - data.y_T));
    adj.terminal = solvers.solve_mass(mode_T, anchor);
    {
        const Vec rhs = anchor + tau * (ops.output(mode_T).transpose() *
                                        (y.values[K - 1] - y_d.values[K - 1]));
        adj.traj.values[K - 1] = solvers.solve_step_transposed(mode_T, tau, rhs);
    }

    // Backward sweep: at node k the solve uses the operators of the interval
    // left of t_k and carries the mass of the interval right of t_k.  At a
    // switch node the produced value is the left limit; the right limit
    // follows from the exact adjoint transfer M_- p(s-) = M_+ p(s+).
    for (int k = K - 2; k >= 1; --k) {
        const int mode_left = sig.mode_at(grid.node(k), Side::Left);
        const int mode_right = sig.mode_at(grid.node(k + 1), Side::Left);
        Vec carried = ops.mass(mode_right) * adj.traj.values[k + 1];
        if (!ops.identity_transitions() && mode_left != mode_right) {
            const std::size_t idx =
                static_cast<std::size_t>((mode_left - 1) * ops.num_modes + (mode_right - 1));
            carried = ops.transitions[idx].transpose() * carried;
        }
        const Vec rhs = carried + tau * (ops.output(mode_left).transpose() *
                                         (y.values[k] - y_d.values[k]));
        adj.traj.values[k] = solvers.solve_step_transposed(mode_left, tau, rhs);
        if (mode_left != mode_right) {
            adj.right_at_switch[k] =
                solvers.solve_mass(mode_right, ops.mass(mode_left) * adj.traj.values[k]);
        }
    }

    // Extra node-0 value (the right limit at the horizon start, used by the
    // error norms): one more backward step with the initial interval's mode.
    if (K >= 2) {
        const int mode0 = sig.mode_at(grid.node(1), Side::Left);
        const Vec rhs = ops.mass(mode0) * adj.traj.values[1] +
                        tau * (ops.output(mode0).transpose() *
                               (y.values[0] - y_d.values[0]));
        adj.traj.values[0] = solvers.solve_step_transposed(mode0, tau, rhs);
    }
    return adj;
}

double integration_by_parts_defect(const SwitchedOperatorSet& ops,
                                   const SwitchingSignal& sig,
                                   const Trajectory& theta,
                                   const AdjointSolution& adj,
                                   bool include_jump_terms) {
    const TimeGrid& grid = theta.grid;
    const int K = grid.num_nodes;
    const std::vector<int> jumps = sig.jump_node_indices(grid);

    // Partition the nodes into mode intervals [a, b] (indices), the mode
    // being constant on (t_a, t_b].
    std::vector<int> bounds;
    bounds.push_back(0);
    for (int s : jumps) bounds.push_back(s);
    bounds.push_back(K - 1);

    double lhs = 0.0;
    for (std::size_t m = 0; m + 1 < bounds.size(); ++m) {
        const int a = bounds[m];
        const int b = bounds[m + 1];
        const int mode = sig.mode_at(grid.node(b), Side::Left);
        const SpMat& M = ops.mass(mode);
        // One-sided adjoint values on this interval: right limit at the left
        // endpoint, left limits elsewhere.
        auto pval = [&](int k) -> const Vec& {
            return k == a ? adj.value(k, Side::Right) : adj.value(k, Side::Left);
        };
        for (int k = a; k < b; ++k) {
            lhs += (theta.values[k + 1] - theta.values[k]).dot(M * pval(k + 1));
            lhs += theta.values[k].dot(M * (pval(k + 1) - pval(k)));
        }
    }

    const int mode_first = sig.mode_at(grid.node(0), Side::Right);
    const int mode_last = sig.mode_at(grid.node(K - 1), Side::Left);
    double rhs = theta.values[K - 1].dot(ops.mass(mode_last) * adj.value(K - 1, Side::Left)) -
                 theta.values[0].dot(ops.mass(mode_first) * adj.value(0, Side::Right));
    if (include_jump_terms) {
        for (int s : jumps) {
            const int ml = sig.mode_at(grid.node(s), Side::Left);
            const int mr = sig.mode_at(grid.node(s), Side::Right);
            rhs += theta.values[s].dot(ops.mass(ml) * adj.value(s, Side::Left) -
                                       ops.mass(mr) * adj.value(s, Side::Right));
        }
    }
    return std::abs(lhs - rhs);
}

}  // namespace smpc
