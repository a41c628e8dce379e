// Optimal-control subproblem: cost quadrature against a direct-sum oracle,
// proximal map against a one-dimensional grid search plus its contraction and
// projection properties, trivial and dense-normal-equations optimizer
// oracles, the variational inequality at the returned control, warm-start
// uniqueness, and bounded nonmonotone cost progress.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <smpc/forward.hpp>
#include <smpc/ocp.hpp>
#include <smpc/two_rooms.hpp>

#include "helpers.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace smpc;
using namespace smpc_tests;

namespace {

/// Direct-sum quadrature of the full cost, written independently of
/// evaluate_cost: right-endpoint rule over nodes 1..K-1 plus terminal term.
double cost_oracle(const Trajectory& u, const Trajectory& y, const CostConfig& c) {
    const double tau = u.grid.tau();
    double J = 0.0;
    for (int k = 1; k < u.num_nodes(); ++k) {
        J += 0.5 * tau * (y[k] - c.y_d[k]).squaredNorm();
        J += 0.5 * c.lambda * tau * (u[k] - c.u_d[k]).squaredNorm();
        J += c.c_l1 * tau * u[k].cwiseAbs().sum();
    }
    J += 0.5 * c.mu * (y[y.num_nodes() - 1] - c.y_T).squaredNorm();
    return J;
}

/// Quadrature value of the nonsmooth L1 part alone (box assumed satisfied).
double l1_part(const Trajectory& u, const CostConfig& c) {
    double g = 0.0;
    for (int k = 1; k < u.num_nodes(); ++k) g += u[k].cwiseAbs().sum();
    return c.c_l1 * g * u.grid.tau();
}

/// One-dimensional grid search for argmin 1/2 (x-v)^2 + s|x| over [lo, hi].
double prox_grid_search(double v, double s, double lo, double hi, double step) {
    double best_x = lo, best_f = std::numeric_limits<double>::infinity();
    for (double x = lo; x <= hi + 0.5 * step; x += step) {
        const double f = 0.5 * (x - v) * (x - v) + s * std::abs(x);
        if (f < best_f) {
            best_f = f;
            best_x = x;
        }
    }
    return best_x;
}

CostConfig random_cost(const TimeGrid& grid, int p, int rho, std::mt19937& gen) {
    CostConfig c;
    c.y_d = random_trajectory(grid, p, gen);
    c.u_d = random_trajectory(grid, rho, gen);
    c.y_T = randn(p, 1, gen);
    return c;
}

}  // namespace

TEST_CASE("cost quadrature: trivial values and the direct-sum oracle") {
    TimeGrid grid(0.0, 1.0, 11);
    std::mt19937 gen(101);

    // perfect tracking with zero regularizers costs nothing
    CostConfig c0;
    c0.y_d = random_trajectory(grid, 2, gen);
    c0.u_d = Trajectory(grid, 3);
    c0.y_T = Vec::Zero(2);
    c0.mu = 0.0;
    c0.c_l1 = 0.0;
    Trajectory u0(grid, 3);
    CHECK(evaluate_cost(u0, c0.y_d, c0) == 0.0);

    // unit constant output mismatch on (0,1) integrates to one half
    CostConfig c1;
    c1.y_d = Trajectory(grid, 1);
    c1.u_d = Trajectory(grid, 1);
    c1.y_T = Vec::Zero(1);
    c1.mu = 0.0;
    c1.c_l1 = 0.0;
    Trajectory ones(grid, 1);
    for (int k = 0; k < 11; ++k) ones[k] = Vec::Ones(1);
    CHECK(evaluate_cost(Trajectory(grid, 1), ones, c1) ==
          doctest::Approx(0.5).epsilon(1e-14));

    // random instance against the independent sum
    CostConfig c = random_cost(grid, 2, 3, gen);
    c.lambda = 0.37;
    c.mu = 1.21;
    c.c_l1 = 0.05;
    c.u_lo = -10.0;
    c.u_hi = 10.0;
    Trajectory u = random_trajectory(grid, 3, gen);
    Trajectory y = random_trajectory(grid, 2, gen);
    CHECK(evaluate_cost(u, y, c) ==
          doctest::Approx(cost_oracle(u, y, c)).epsilon(1e-12));

    // box violation beyond the absolute tolerance is infeasible
    Trajectory bad = u;
    bad[3](1) = 10.5;
    CHECK(std::isinf(evaluate_cost(bad, y, c)));
}

TEST_CASE("proximal map: grid-search oracle, trivial cases, contraction, projection") {
    CostConfig c;
    c.c_l1 = 0.1;
    c.u_lo = -20.0;
    c.u_hi = 20.0;

    // soft threshold then clamp on the documented sample points
    Vec v1(1), v2(1);
    v1 << 0.5;
    v2 << 25.0;
    CHECK(prox_nonsmooth(v1, 1.0, c)(0) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(prox_nonsmooth(v2, 1.0, c)(0) == doctest::Approx(20.0).epsilon(1e-14));

    // identity when g vanishes
    CostConfig free;
    free.c_l1 = 0.0;
    free.u_lo = -std::numeric_limits<double>::infinity();
    free.u_hi = std::numeric_limits<double>::infinity();
    std::mt19937 gen(111);
    Vec v = randn(6, 1, gen);
    CHECK((prox_nonsmooth(v, 0.7, free) - v).norm() == 0.0);

    // one-dimensional grid-search oracle at random points and steps
    std::uniform_real_distribution<double> vals(-25.0, 25.0), steps(0.05, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double x = vals(gen);
        const double alpha = steps(gen);
        Vec vv(1);
        vv << x;
        const double mine = prox_nonsmooth(vv, alpha, c)(0);
        const double oracle =
            prox_grid_search(x, alpha * c.c_l1, c.u_lo, c.u_hi, 1e-4);
        // a convex objective locates the grid minimizer within one grid step
        CHECK(std::abs(mine - oracle) <= 1e-4);
    }

    // nonexpansive map
    for (int trial = 0; trial < 20; ++trial) {
        Vec a = 30.0 * randn(5, 1, gen);
        Vec b = 30.0 * randn(5, 1, gen);
        CHECK((prox_nonsmooth(a, 0.9, c) - prox_nonsmooth(b, 0.9, c)).norm() <=
              (a - b).norm() * (1.0 + 1e-14));
    }

    // with c_l1 = 0 the map is the box projection, hence idempotent
    CostConfig box;
    box.c_l1 = 0.0;
    box.u_lo = -1.0;
    box.u_hi = 1.0;
    for (int trial = 0; trial < 10; ++trial) {
        Vec a = 3.0 * randn(4, 1, gen);
        Vec once = prox_nonsmooth(a, 1.3, box);
        CHECK((prox_nonsmooth(once, 1.3, box) - once).norm() == 0.0);
    }
}

TEST_CASE("decoupled control: gradient is pure Tikhonov and the solver needs two iterations") {
    // B = 0 decouples state and control; with g = 0 the optimum is u_d
    auto ops = make_random_system(7, 2, 3, 2, 121);
    for (auto& Bm : ops.B) Bm = SpMat(7, 3);
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    TimeGrid grid(0.0, 1.0, 9);
    SwitchingSignal sig(0.0, 1.0, {0.5}, {1, 2});
    std::mt19937 gen(122);

    CostConfig c = random_cost(grid, 2, 3, gen);
    c.lambda = 0.05;
    c.mu = 0.9;
    c.c_l1 = 0.0;
    c.u_lo = -std::numeric_limits<double>::infinity();
    c.u_hi = std::numeric_limits<double>::infinity();
    Vec x0 = randn(7, 1, gen);

    // gradient reduces to lambda (u - u_d) when the control cannot reach the state
    Trajectory u = random_trajectory(grid, 3, gen);
    Trajectory theta = solve_state(solvers, sig, grid, x0, u);
    Trajectory yy = apply_output(ops, sig, theta);
    AdjointData data;
    data.y = &yy;
    data.y_d = &c.y_d;
    data.y_T = c.y_T;
    data.mu = c.mu;
    AdjointSolution adj = solve_adjoint(solvers, sig, grid, data);
    Trajectory grad = smooth_gradient(sys, sig, u, adj, c);
    for (int k = 1; k < grid.num_nodes; ++k)
        CHECK((grad[k] - c.lambda * (u[k] - c.u_d[k])).norm() <=
              1e-14 * std::max(1.0, grad[k].norm()));

    auto res = solve_ocp(sys, sig, grid, x0, c);
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
    double worst = 0.0;
    for (int k = 1; k < grid.num_nodes; ++k)
        worst = std::max(worst, (res.u[k] - c.u_d[k]).norm());
    CHECK(worst <= 1e-10);
    // reported stationarity honors the configured tolerance
    OptimizerOptions defaults;
    CHECK(res.stationarity <=
          defaults.abs_tol + defaults.rel_tol * Trajectory::norm(res.u));
}

TEST_CASE("unconstrained quadratic problem matches the dense normal-equations oracle") {
    auto ops = make_random_system(6, 2, 2, 2, 131);
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    const int K = 9, rho = 2;
    TimeGrid grid(0.0, 1.0, K);
    SwitchingSignal sig(0.0, 1.0, {0.5}, {2, 1});
    std::mt19937 gen(132);

    CostConfig c = random_cost(grid, 2, rho, gen);
    c.lambda = 0.4;
    c.mu = 0.8;
    c.c_l1 = 0.0;
    c.u_lo = -std::numeric_limits<double>::infinity();
    c.u_hi = std::numeric_limits<double>::infinity();
    Vec x0 = randn(6, 1, gen);

    // stack the output response of each control degree of freedom
    const int n_u = (K - 1) * rho;        // node 0 carries no control
    const int n_y = (K - 1) * 2;          // outputs at nodes 1..K-1
    Mat Y(n_y, n_u);
    Trajectory zero_u(grid, rho);
    Trajectory y_base = apply_output(ops, sig, solve_state(solvers, sig, grid, x0, zero_u));
    for (int k = 1; k < K; ++k)
        for (int j = 0; j < rho; ++j) {
            Trajectory e(grid, rho);
            e[k](j) = 1.0;
            Trajectory ye = apply_output(ops, sig, solve_state(solvers, sig, grid, Vec::Zero(6), e));
            for (int i = 1; i < K; ++i)
                Y.block((i - 1) * 2, (k - 1) * rho + j, 2, 1) = ye[i];
        }
    Vec y0(n_y), yd(n_y), ud(n_u);
    for (int i = 1; i < K; ++i) {
        y0.segment((i - 1) * 2, 2) = y_base[i];
        yd.segment((i - 1) * 2, 2) = c.y_d[i];
    }
    for (int k = 1; k < K; ++k) ud.segment((k - 1) * rho, rho) = c.u_d[k];
    const double tau = grid.tau();
    // gradient of the stacked quadratic:
    //   tau Y^T (Yu + y0 - yd) + lambda tau (u - ud)
    //   + mu Y_T^T (Y_T u + y0_T - y_T) = 0
    Mat YT = Y.bottomRows(2); // terminal output rows
    Vec y0T = y0.tail(2);
    Mat H = tau * Y.transpose() * Y + c.lambda * tau * Mat::Identity(n_u, n_u) +
            c.mu * YT.transpose() * YT;
    Vec rhs = tau * Y.transpose() * (yd - y0) + c.lambda * tau * ud +
              c.mu * YT.transpose() * (c.y_T - y0T);
    Vec u_star = H.ldlt().solve(rhs);

    auto res = solve_ocp(sys, sig, grid, x0, c);
    REQUIRE(res.converged);
    Vec u_flat(n_u);
    for (int k = 1; k < K; ++k) u_flat.segment((k - 1) * rho, rho) = res.u[k];
    CHECK((u_flat - u_star).norm() <= 1e-9 * std::max(1.0, u_star.norm()));
    CHECK(res.u[0].norm() == 0.0);

    // reported cost agrees with the quadrature of the returned pair
    CHECK(res.cost == doctest::Approx(cost_oracle(res.u, res.y, c)).epsilon(1e-12));
}

TEST_CASE("variational inequality holds at the returned control") {
    auto ops = make_random_system(8, 2, 2, 2, 141);
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    TimeGrid grid(0.0, 1.0, 11);
    SwitchingSignal sig(0.0, 1.0, {0.4}, {1, 2});
    std::mt19937 gen(142);

    CostConfig c = random_cost(grid, 2, 2, gen);
    c.lambda = 0.1;
    c.mu = 0.5;
    c.c_l1 = 0.02;
    c.u_lo = -0.6; // tight box so the constraints actually bite
    c.u_hi = 0.6;
    c.y_d.values.assign(c.y_d.values.size(), Vec::Constant(2, 2.0));
    Vec x0 = randn(8, 1, gen);

    auto res = solve_ocp(sys, sig, grid, x0, c);
    REQUIRE(res.converged);
    // some component should sit on the box after pushing toward the target
    double max_abs = 0.0;
    for (int k = 1; k < grid.num_nodes; ++k)
        max_abs = std::max(max_abs, res.u[k].cwiseAbs().maxCoeff());
    CHECK(max_abs == doctest::Approx(0.6).epsilon(1e-8));

    Trajectory grad = smooth_gradient(sys, sig, res.u, res.adjoint, c);
    const double g_star = l1_part(res.u, c);
    std::uniform_real_distribution<double> box(c.u_lo, c.u_hi);
    for (int trial = 0; trial < 100; ++trial) {
        Trajectory v(grid, 2);
        for (int k = 1; k < grid.num_nodes; ++k)
            for (int j = 0; j < 2; ++j) v[k](j) = box(gen);
        Trajectory diff(grid, 2);
        for (int k = 0; k < grid.num_nodes; ++k) diff[k] = v[k] - res.u[k];
        const double vi = Trajectory::inner(grad, diff) + l1_part(v, c) - g_star;
        CHECK(vi >= -1e-8);
    }
}

TEST_CASE("different warm starts reach the same optimizer") {
    auto ops = make_random_system(7, 2, 2, 2, 151);
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    TimeGrid grid(0.0, 1.0, 11);
    SwitchingSignal sig(0.0, 1.0, {0.6}, {2, 1});
    std::mt19937 gen(152);

    CostConfig c = random_cost(grid, 2, 2, gen);
    c.lambda = 0.08;
    c.mu = 0.3;
    c.c_l1 = 0.01;
    c.u_lo = -5.0;
    c.u_hi = 5.0;
    Vec x0 = randn(7, 1, gen);

    OptimizerOptions opts;
    opts.abs_tol = 1e-10;
    opts.rel_tol = 1e-10;
    opts.max_iterations = 20000;
    auto cold = solve_ocp(sys, sig, grid, x0, c, opts);
    Trajectory warm = random_trajectory(grid, 2, gen);
    auto hot = solve_ocp(sys, sig, grid, x0, c, opts, &warm);
    REQUIRE(cold.converged);
    REQUIRE(hot.converged);
    Trajectory diff(grid, 2);
    for (int k = 0; k < grid.num_nodes; ++k) diff[k] = cold.u[k] - hot.u[k];
    CHECK(Trajectory::norm(diff) <= 1e-8);
}

TEST_CASE("cost progress stays within the nonmonotone window") {
    auto ops = make_random_system(7, 2, 2, 2, 161);
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    TimeGrid grid(0.0, 1.0, 9);
    SwitchingSignal sig(0.0, 1.0, {0.5}, {1, 2});
    std::mt19937 gen(162);
    CostConfig c = random_cost(grid, 2, 2, gen);
    c.lambda = 0.05;
    c.mu = 0.4;
    c.c_l1 = 0.01;
    c.u_lo = -3.0;
    c.u_hi = 3.0;
    Vec x0 = randn(7, 1, gen);

    // truncated runs expose the cost after m iterations
    std::vector<double> costs;
    for (int m = 1; m <= 25; ++m) {
        OptimizerOptions opts;
        opts.max_iterations = m;
        opts.abs_tol = 0.0;
        opts.rel_tol = 0.0;
        costs.push_back(solve_ocp(sys, sig, grid, x0, c, opts).cost);
    }
    OptimizerOptions defaults;
    const int W = defaults.nonmonotone_window;
    for (std::size_t i = 1; i < costs.size(); ++i) {
        double window_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = i >= static_cast<std::size_t>(W) ? i - static_cast<std::size_t>(W) : 0;
             j < i; ++j)
            window_max = std::max(window_max, costs[j]);
        CHECK(costs[i] <= window_max * (1.0 + 1e-12) + 1e-12);
    }
}

TEST_CASE("benchmark subproblem with L1 weight produces exactly sparse controls") {
    BenchmarkConfig cfg;
    cfg.target_h = 0.5; // compact benchmark variant
    auto [ops, mesh] = assemble_two_rooms(cfg);
    (void)mesh;
    SystemSolvers solvers(ops);
    FullControlSystem sys(solvers);
    TimeGrid grid(0.0, 1.0, 21);
    SwitchingSignal sig = make_alternating_signal(0.0, 1.0, 1.25);

    CostConfig c;
    c.y_d = compute_tracking_target(ops, sig, grid);
    c.u_d = Trajectory(grid, ops.num_inputs);
    c.y_T = Vec::Zero(2);
    c.mu = 0.0;
    c.lambda = 1e-2;
    c.c_l1 = 1e-3;
    c.u_lo = -20.0;
    c.u_hi = 20.0;
    const Vec x0 = Vec::Ones(ops.dim);

    auto res = solve_ocp(sys, sig, grid, x0, c);
    REQUIRE(res.converged);
    int zeros = 0, total = 0;
    for (int k = 1; k < grid.num_nodes; ++k)
        for (int j = 0; j < ops.num_inputs; ++j) {
            ++total;
            if (res.u[k](j) == 0.0) ++zeros;
        }
    CHECK(zeros > 0);
    CHECK(zeros < total); // the control still does something
}
