#include <smpc/forward.hpp>

#include <stdexcept>

namespace smpc {

Trajectory solve_state(SystemSolvers& solvers, const SwitchingSignal& sig,
                       const TimeGrid& grid, const Vec& theta0, const Trajectory& u) {
    const SwitchedOperatorSet& ops = solvers.ops();
    if (theta0.size() != ops.dim) throw std::invalid_argument("solve_state: initial value dimension");
    if (u.num_nodes() != grid.num_nodes) throw std::invalid_argument("solve_state: control grid mismatch");
    const double tau = grid.tau();
    Trajectory theta(grid, ops.dim);
    theta.values[0] = theta0;
    const int L = ops.num_modes;
    for (int k = 0; k + 1 < grid.num_nodes; ++k) {
        const int mode = sig.mode_at(grid.node(k + 1), Side::Left);
        Vec carried = theta.values[k];
        if (!ops.identity_transitions() && k > 0) {
            const int before = sig.mode_at(grid.node(k), Side::Left);
            if (before != mode)
                carried = ops.transitions[static_cast<std::size_t>((before - 1) * L + (mode - 1))] * carried;
        }
        const Vec rhs = ops.mass(mode) * carried + tau * (ops.input(mode) * u.values[k + 1]);
        theta.values[k + 1] = solvers.solve_step(mode, tau, rhs);
    }
    return theta;
}

Trajectory apply_output(const SwitchedOperatorSet& ops, const SwitchingSignal& sig,
                        const Trajectory& theta) {
    Trajectory y(theta.grid, ops.num_outputs);
    for (int k = 0; k < theta.num_nodes(); ++k) {
        const int mode = k == 0 ? sig.mode_at(theta.grid.node(0), Side::Right)
                                : sig.mode_at(theta.grid.node(k), Side::Left);
        y.values[k] = ops.output(mode) * theta.values[k];
    }
    return y;
}

}  // namespace smpc
