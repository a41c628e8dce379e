#include <smpc/certify.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace smpc {

namespace {

/// Index of the switching interval whose half-open span (s_{j-1}, s_j]
/// contains grid node k (k = 0 belongs to the first interval).
int interval_of_node_left(const HorizonStructure& hs, int k) {
    int idx = 0;
    for (int s : hs.jump_nodes) {
        if (s < k) ++idx;
        else break;
    }
    return idx;
}

int mode_at_node_left(const HorizonStructure& hs, int k) {
    return hs.interval_modes[static_cast<std::size_t>(interval_of_node_left(hs, k))];
}

/// Number of switching intervals touched by (t_0, t_k]; zero at the start.
int touched_intervals(const HorizonStructure& hs, int k) {
    if (k <= 0) return 0;
    return interval_of_node_left(hs, k) + 1;
}

double clamp0(double v) { return v > 0.0 ? v : 0.0; }

/// Largest generalized eigenvalue lambda_max(M_i, M_j) restricted to the
/// subspace where the two masses differ; exact as long as that subspace is
/// proper (vectors supported outside it realize the ratio 1).
double mass_ratio(const SwitchedOperatorSet& ops, SystemSolvers& solvers, int mi, int mj) {
    const SpMat& Mi = ops.mass(mi);
    const SpMat& Mj = ops.mass(mj);
    SpMat D = Mi - Mj;
    D.prune([](int, int, double v) { return std::abs(v) > 0.0; });

    std::set<int> support;
    for (int col = 0; col < D.outerSize(); ++col)
        for (SpMat::InnerIterator it(D, col); it; ++it)
            if (std::abs(it.value()) > 1e-300) {
                support.insert(static_cast<int>(it.row()));
                support.insert(static_cast<int>(it.col()));
            }
    if (support.empty()) return 1.0;

    const int n = ops.dim;
    const int s = static_cast<int>(support.size());
    if (s >= n || (n <= 600 && s > n / 2)) {
        // Dense generalized eigenproblem fallback for small systems.
        if (n > 2000)
            throw std::runtime_error("mass ratio: difference support too large for dense solve");
        const Mat Mi_d(Mi), Mj_d(Mj);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Mi_d, Mj_d);
        if (ges.info() != Eigen::Success)
            throw std::runtime_error("mass ratio: generalized eigensolver failed");
        return ges.eigenvalues().maxCoeff();
    }

    std::vector<int> idx(support.begin(), support.end());
    Mat Ds(s, s);
    for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) Ds(a, b) = D.coeff(idx[static_cast<std::size_t>(a)],
                                                        idx[static_cast<std::size_t>(b)]);

    // G = (M_j^{-1}) restricted to the support; the constrained minimum of
    // v^T M_j v over extensions of v_S is v_S^T G^{-1} v_S.
    Mat G(s, s);
    for (int a = 0; a < s; ++a) {
        Vec e = Vec::Zero(n);
        e[idx[static_cast<std::size_t>(a)]] = 1.0;
        const Vec col = solvers.solve_mass(mj, e);
        for (int b = 0; b < s; ++b) G(b, a) = col[idx[static_cast<std::size_t>(b)]];
    }
    G = 0.5 * (G + G.transpose().eval());
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("mass ratio: restricted inverse-mass block not SPD");
    const Mat L = llt.matrixL();
    Mat Bql = L.transpose() * Ds * L;
    Bql = 0.5 * (Bql + Bql.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Mat> eig(Bql);
    return 1.0 + clamp0(eig.eigenvalues().maxCoeff());
}

/// lambda_max of X^T F^{-1} X for a tall map X, given the F-solve.
double continuity_constant(const Mat& X, const std::function<Vec(const Vec&)>& solve) {
    const int m = static_cast<int>(X.cols());
    Mat Gram(m, m);
    Mat Y(X.rows(), m);
    for (int c = 0; c < m; ++c) Y.col(c) = solve(X.col(c));
    Gram = X.transpose() * Y;
    Gram = 0.5 * (Gram + Gram.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Mat> eig(Gram);
    return clamp0(eig.eigenvalues().maxCoeff());
}

}  // namespace

ConstantsBundle compute_constants(const SwitchedOperatorSet& ops, SystemSolvers& solvers) {
    const int L = ops.num_modes;
    ConstantsBundle cb;
    cb.c = Mat::Ones(L, L);
    cb.gamma2_B_a = Vec::Zero(L);
    cb.gamma2_C_a = Vec::Zero(L);
    cb.gamma2_C_m = Vec::Zero(L);

    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j)
            if (i != j) cb.c(i - 1, j - 1) = mass_ratio(ops, solvers, i, j);

    for (int i = 1; i <= L; ++i) {
        const Mat B = Mat(ops.input(i));
        const Mat Ct = ops.output(i).transpose();
        auto solveA = [&](const Vec& r) { return solvers.solve_sym_stiffness(i, r); };
        auto solveM = [&](const Vec& r) { return solvers.solve_mass(i, r); };
        cb.gamma2_B_a[i - 1] = continuity_constant(B, solveA);
        cb.gamma2_C_a[i - 1] = continuity_constant(Ct, solveA);
        cb.gamma2_C_m[i - 1] = continuity_constant(Ct, solveM);
    }
    return cb;
}

HorizonStructure analyze_horizon(const SwitchingSignal& sig, const TimeGrid& grid) {
    HorizonStructure hs;
    hs.grid = grid;
    const SwitchingSignal local = sig.restrict(grid.t_start, grid.t_end);
    local.validate_against(grid);
    hs.jump_nodes = local.jump_node_indices(grid);
    hs.interval_modes = local.interval_modes();
    for (double s : local.jump_times())
        hs.switch_pairs.emplace_back(local.mode_at(s, Side::Left), local.mode_at(s, Side::Right));
    hs.terminal_mode = local.mode_at(grid.t_end, Side::Left);
    hs.initial_mode = local.mode_at(grid.t_start, Side::Right);
    return hs;
}

std::vector<double> state_interval_weights(const HorizonStructure& hs,
                                           const ConstantsBundle& cb,
                                           int num_intervals) {
    const int N = num_intervals;
    std::vector<double> w(static_cast<std::size_t>(std::max(N, 0)), 1.0);
    // omega_{N,i} = prod_{k=i+1}^{N-1} c_{sigma(t_k^+), sigma(t_k^-)}; the
    // switch with index k separates interval k-1 from interval k.
    for (int i = N - 2; i >= 0; --i) {
        const auto& pr = hs.switch_pairs[static_cast<std::size_t>(i)];  // switch k = i+1
        const double c = cb.c(pr.second - 1, pr.first - 1);
        w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i + 1)] * c;
    }
    return w;
}

std::vector<double> adjoint_interval_weights(const HorizonStructure& hs,
                                             const ConstantsBundle& cb) {
    const int N = hs.num_intervals();
    std::vector<double> w(static_cast<std::size_t>(N), 1.0);
    for (int i = 1; i < N; ++i) {
        const auto& pr = hs.switch_pairs[static_cast<std::size_t>(i - 1)];  // switch k = i
        const double c = cb.c(pr.second - 1, pr.first - 1);
        w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i - 1)] * 2.0 * c;
    }
    return w;
}

double state_weight_from_start(const HorizonStructure& hs,
                               const ConstantsBundle& cb,
                               int num_intervals) {
    if (num_intervals <= 0) return 1.0;
    return state_interval_weights(hs, cb, num_intervals).front();
}

double constant_c1(const HorizonStructure& hs, const ConstantsBundle& cb, double mu) {
    double g = 0.0;
    for (int m : hs.interval_modes) g = std::max(g, cb.gamma2_C_a[m - 1]);
    return std::max(0.5 * g, mu * cb.gamma2_C_m[hs.terminal_mode - 1]);
}

double constant_c2(const HorizonStructure& hs, const ConstantsBundle& cb, double lambda) {
    const std::vector<double> w = adjoint_interval_weights(hs, cb);
    double c = 0.0;
    for (int i = 0; i < hs.num_intervals(); ++i) {
        const int m = hs.interval_modes[static_cast<std::size_t>(i)];
        c = std::max(c, cb.gamma2_B_a[m - 1] / (w[static_cast<std::size_t>(i)] * lambda * lambda));
    }
    return c;
}

double constant_c3(const HorizonStructure& hs, const ConstantsBundle& cb,
                   double lambda, double mu) {
    const std::vector<double> w = state_interval_weights(hs, cb, hs.num_intervals());
    double c = 0.0;
    for (int i = 0; i < hs.num_intervals(); ++i) {
        const int m = hs.interval_modes[static_cast<std::size_t>(i)];
        c = std::max(c, cb.gamma2_C_a[m - 1] / (w[static_cast<std::size_t>(i)] * lambda));
    }
    return std::max(c, mu * cb.gamma2_C_m[hs.terminal_mode - 1] / lambda);
}

double constant_c4(const HorizonStructure& hs, const ConstantsBundle& cb,
                   int num_intervals) {
    if (num_intervals <= 0) return 0.0;
    const std::vector<double> w = state_interval_weights(hs, cb, num_intervals);
    double c = 0.0;
    for (int i = 0; i < num_intervals; ++i) {
        const int m = hs.interval_modes[static_cast<std::size_t>(i)];
        c = std::max(c, w[static_cast<std::size_t>(i)] * cb.gamma2_B_a[m - 1]);
    }
    return c;
}

//----------------------------------------------------------------------------
// Residuals
//----------------------------------------------------------------------------

double StateResidual::weighted_dual_norm_sq(const HorizonStructure& hs,
                                            SystemSolvers& solvers,
                                            const std::vector<double>& interval_weights,
                                            int k_stop) const {
    const int K = static_cast<int>(values.size());
    if (k_stop < 0) k_stop = K - 1;
    const double tau = hs.grid.tau();
    double total = 0.0;
    for (int k = 1; k <= k_stop; ++k) {
        const int idx = interval_of_node_left(hs, k);
        if (idx >= static_cast<int>(interval_weights.size()))
            throw std::invalid_argument("state residual: weight vector shorter than touched intervals");
        const int mode = hs.interval_modes[static_cast<std::size_t>(idx)];
        const double d = solvers.dual_norm_a(values[static_cast<std::size_t>(k)], mode);
        total += interval_weights[static_cast<std::size_t>(idx)] * tau * d * d;
    }
    return total;
}

StateResidual compute_state_residual(const SwitchedOperatorSet& ops,
                                     const SwitchingSignal& sig,
                                     const Trajectory& theta,
                                     const Trajectory& u) {
    const TimeGrid& grid = theta.grid;
    const int K = grid.num_nodes;
    const double tau = grid.tau();
    StateResidual res;
    res.values.assign(static_cast<std::size_t>(K), Vec::Zero(ops.dim));
    for (int k = 0; k + 1 < K; ++k) {
        const int mode = sig.mode_at(grid.node(k + 1), Side::Left);
        res.values[static_cast<std::size_t>(k + 1)] =
            ops.input(mode) * u.values[static_cast<std::size_t>(k + 1)] -
            ops.mass(mode) * ((theta.values[static_cast<std::size_t>(k + 1)] -
                               theta.values[static_cast<std::size_t>(k)]) / tau) -
            ops.stiffness(mode) * theta.values[static_cast<std::size_t>(k + 1)];
    }
    return res;
}

AdjointResidual compute_adjoint_residual(const SwitchedOperatorSet& ops,
                                         const SwitchingSignal& sig,
                                         const AdjointSolution& adj,
                                         const Trajectory& y,
                                         const Trajectory& y_d,
                                         const Vec& y_T,
                                         double mu) {
    const TimeGrid& grid = adj.traj.grid;
    const int K = grid.num_nodes;
    const double tau = grid.tau();
    AdjointResidual res;
    res.step_defects.assign(static_cast<std::size_t>(K), Vec::Zero(ops.dim));

    // Interior backward solves, k = 1 .. K-2.
    for (int k = 1; k + 1 < K; ++k) {
        const int mode_left = sig.mode_at(grid.node(k), Side::Left);
        const int mode_right = sig.mode_at(grid.node(k + 1), Side::Left);
        const Vec& pk = adj.traj.values[static_cast<std::size_t>(k)];
        res.step_defects[static_cast<std::size_t>(k)] =
            (ops.mass(mode_right) * adj.traj.values[static_cast<std::size_t>(k + 1)] +
             tau * (ops.output(mode_left).transpose() *
                    (y.values[static_cast<std::size_t>(k)] - y_d.values[static_cast<std::size_t>(k)])) -
             ops.mass(mode_left) * pk - tau * (ops.stiffness(mode_left).transpose() * pk)) / tau;
    }

    // Terminal solve, k = K-1.
    {
        const int mode_T = sig.mode_at(grid.node(K - 1), Side::Left);
        const Vec& pT = adj.traj.values[static_cast<std::size_t>(K - 1)];
        Vec src = ops.output(mode_T).transpose() *
                  (y.values[static_cast<std::size_t>(K - 1)] - y_d.values[static_cast<std::size_t>(K - 1)]);
        Vec anchor = Vec::Zero(ops.dim);
        if (mu != 0.0)
            anchor = mu * (ops.output(mode_T).transpose() *
                           (y.values[static_cast<std::size_t>(K - 1)] - y_T));
        res.step_defects[static_cast<std::size_t>(K - 1)] =
            (anchor + tau * src - ops.mass(mode_T) * pT -
             tau * (ops.stiffness(mode_T).transpose() * pT)) / tau;

        // Terminal anchor defect (mass-dual "jump" entry at T).
        Vec pterm = adj.terminal.size() > 0 ? adj.terminal : Vec(Vec::Zero(ops.dim));
        res.terminal_defect = anchor - ops.mass(mode_T) * pterm;
    }

    // Interior switch jumps.
    for (int s : sig.jump_node_indices(grid)) {
        const int ml = sig.mode_at(grid.node(s), Side::Left);
        const int mr = sig.mode_at(grid.node(s), Side::Right);
        res.jump_defects[s] = ops.mass(mr) * adj.value(s, Side::Right) -
                              ops.mass(ml) * adj.value(s, Side::Left);
    }
    return res;
}

//----------------------------------------------------------------------------
// Error estimators (full-order data)
//----------------------------------------------------------------------------

StateBound delta_theta(const SwitchedOperatorSet& ops,
                       SystemSolvers& solvers,
                       const HorizonStructure& hs,
                       const ConstantsBundle& cb,
                       const Trajectory& theta,
                       const Trajectory& u,
                       double initial_error_m) {
    const int N = hs.num_intervals();
    const std::vector<double> w = state_interval_weights(hs, cb, N);

    // State residual assembled from the horizon structure alone.
    const TimeGrid& grid = hs.grid;
    const double tau = grid.tau();
    StateResidual res;
    res.values.assign(static_cast<std::size_t>(grid.num_nodes), Vec::Zero(ops.dim));
    for (int k = 0; k + 1 < grid.num_nodes; ++k) {
        const int mode = mode_at_node_left(hs, k + 1);
        res.values[static_cast<std::size_t>(k + 1)] =
            ops.input(mode) * u.values[static_cast<std::size_t>(k + 1)] -
            ops.mass(mode) * ((theta.values[static_cast<std::size_t>(k + 1)] -
                               theta.values[static_cast<std::size_t>(k)]) / tau) -
            ops.stiffness(mode) * theta.values[static_cast<std::size_t>(k + 1)];
    }

    StateBound out;
    out.initial_part = (N > 0 ? w.front() : 1.0) * initial_error_m * initial_error_m;
    out.residual_part = res.weighted_dual_norm_sq(hs, solvers, w);
    out.total = std::sqrt(out.initial_part + out.residual_part);
    return out;
}

AdjointBound delta_p(const SwitchedOperatorSet& ops,
                     SystemSolvers& solvers,
                     const HorizonStructure& hs,
                     const ConstantsBundle& cb,
                     const AdjointResidual& res) {
    const int N = hs.num_intervals();
    const std::vector<double> wt = adjoint_interval_weights(hs, cb);
    const double tau = hs.grid.tau();

    AdjointBound out;

    // Jump entries: interior switches carry the weight of the interval to
    // their left; the terminal anchor is the entry of the last interval.
    for (int j = 0; j < hs.num_switches(); ++j) {
        const int s = hs.jump_nodes[static_cast<std::size_t>(j)];
        const int mode = hs.interval_modes[static_cast<std::size_t>(j)];
        auto it = res.jump_defects.find(s);
        if (it == res.jump_defects.end()) continue;
        const double d = solvers.dual_norm_m(it->second, mode);
        out.jump_part += 2.0 * wt[static_cast<std::size_t>(j)] * d * d;
    }
    if (res.terminal_defect.size() > 0) {
        const double d = solvers.dual_norm_m(res.terminal_defect, hs.terminal_mode);
        out.jump_part += 2.0 * wt[static_cast<std::size_t>(N - 1)] * d * d;
    }

    // Step defects, assigned to the step left of the node they produce.
    const int K = static_cast<int>(res.step_defects.size());
    for (int k = 1; k < K; ++k) {
        const int idx = interval_of_node_left(hs, k);
        const int mode = hs.interval_modes[static_cast<std::size_t>(idx)];
        const double d = solvers.dual_norm_a(res.step_defects[static_cast<std::size_t>(k)], mode);
        out.residual_part += wt[static_cast<std::size_t>(idx)] * tau * d * d;
    }
    out.total = std::sqrt(out.jump_part + out.residual_part);
    return out;
}

double input_adjoint_mismatch_sq(const SwitchedOperatorSet& ops,
                                 const SwitchingSignal& sig,
                                 const AdjointSolution& p,
                                 const AdjointSolution& q) {
    const TimeGrid& grid = p.traj.grid;
    if (q.traj.num_nodes() != grid.num_nodes)
        throw std::invalid_argument("input_adjoint_mismatch_sq: grid mismatch");
    const double tau = grid.tau();
    double total = 0.0;
    for (int k = 1; k < grid.num_nodes; ++k) {
        const int mode = sig.mode_at(grid.node(k), Side::Left);
        const Vec d = ops.input(mode).transpose() *
                      (p.traj.values[static_cast<std::size_t>(k)] -
                       q.traj.values[static_cast<std::size_t>(k)]);
        total += tau * d.squaredNorm();
    }
    return total;
}

ControlBound delta_A(const HorizonStructure& hs, const ConstantsBundle& cb,
                     double lambda, double mu,
                     double mismatch_sq, double initial_error_m) {
    ControlBound out;
    const double c1 = constant_c1(hs, cb, mu);
    out.control_part = mismatch_sq / (lambda * lambda);
    out.initial_part = c1 / (2.0 * lambda) * initial_error_m * initial_error_m;
    out.total = std::sqrt(out.control_part + out.initial_part);
    return out;
}

ControlBound delta_B(const HorizonStructure& hs, const ConstantsBundle& cb,
                     double lambda, double mu,
                     double mismatch_sq, double output_mismatch_sq,
                     double terminal_mismatch_sq, double initial_error_m) {
    ControlBound out;
    const double c1 = constant_c1(hs, cb, mu);
    out.control_part = mismatch_sq / (lambda * lambda);
    out.state_part = output_mismatch_sq / lambda + mu / lambda * terminal_mismatch_sq;
    out.initial_part = c1 / lambda * initial_error_m * initial_error_m;
    out.total = std::sqrt(out.control_part + out.state_part + out.initial_part);
    return out;
}

ControlBound tilde_delta_B(const HorizonStructure& hs, const ConstantsBundle& cb,
                           double lambda, double mu,
                           double delta_p_sq, double delta_theta_sq,
                           double initial_error_m) {
    ControlBound out;
    out.initial_part = constant_c1(hs, cb, mu) * initial_error_m * initial_error_m;
    out.control_part = constant_c2(hs, cb, lambda) * delta_p_sq;
    out.state_part = constant_c3(hs, cb, lambda, mu) * delta_theta_sq;
    out.total = std::sqrt(out.initial_part + out.control_part + out.state_part);
    return out;
}

double optimal_state_bound_sq(const HorizonStructure& hs, const ConstantsBundle& cb,
                              int k_stop, double initial_error_m, double delta_u) {
    const int nt = touched_intervals(hs, k_stop);
    const double w0 = state_weight_from_start(hs, cb, nt);
    const double c4 = constant_c4(hs, cb, nt);
    return w0 * initial_error_m * initial_error_m + 0.5 * c4 * delta_u * delta_u;
}

double reduced_state_bound_sq(const HorizonStructure& hs, const ConstantsBundle& cb,
                              int k_stop, double initial_error_m,
                              double projection_defect_m, double delta_u,
                              double residual_sq) {
    const int nt = touched_intervals(hs, k_stop);
    const double w0 = state_weight_from_start(hs, cb, nt);
    const double c4 = constant_c4(hs, cb, nt);
    const double init = initial_error_m + projection_defect_m;
    return w0 * init * init + c4 * delta_u * delta_u + residual_sq;
}

//----------------------------------------------------------------------------
// Offline/online decomposition
//----------------------------------------------------------------------------

RieszBlocks::RieszBlocks(const SwitchedOperatorSet& ops, SystemSolvers& solvers, const Mat& V) {
    r_ = static_cast<int>(V.cols());
    L_ = ops.num_modes;
    rho_ = ops.num_inputs;
    p_ = ops.num_outputs;
    const int n = ops.dim;
    const int cols_a = rho_ + L_ * r_ + 2 * r_ + p_;
    const int cols_m = L_ * r_ + p_;

    std::vector<Mat> MV(static_cast<std::size_t>(L_));
    for (int j = 0; j < L_; ++j) MV[static_cast<std::size_t>(j)] = ops.M[static_cast<std::size_t>(j)] * V;

    G_.resize(static_cast<std::size_t>(L_));
    H_.resize(static_cast<std::size_t>(L_));
    for (int i = 1; i <= L_; ++i) {
        Mat Z(n, cols_a);
        int c = 0;
        Z.middleCols(c, rho_) = Mat(ops.input(i));
        c += rho_;
        for (int j = 0; j < L_; ++j) {
            Z.middleCols(c, r_) = MV[static_cast<std::size_t>(j)];
            c += r_;
        }
        Z.middleCols(c, r_) = ops.stiffness(i) * V;
        c += r_;
        Z.middleCols(c, r_) = ops.stiffness(i).transpose() * V;
        c += r_;
        Z.middleCols(c, p_) = ops.output(i).transpose();

        Mat X(n, cols_a);
        for (int k = 0; k < cols_a; ++k) X.col(k) = solvers.solve_sym_stiffness(i, Z.col(k));
        Mat G = Z.transpose() * X;
        G_[static_cast<std::size_t>(i - 1)] = 0.5 * (G + G.transpose().eval());

        Mat W(n, cols_m);
        c = 0;
        for (int j = 0; j < L_; ++j) {
            W.middleCols(c, r_) = MV[static_cast<std::size_t>(j)];
            c += r_;
        }
        W.middleCols(c, p_) = ops.output(i).transpose();
        Mat Y(n, cols_m);
        for (int k = 0; k < cols_m; ++k) Y.col(k) = solvers.solve_mass(i, W.col(k));
        Mat H = W.transpose() * Y;
        H_[static_cast<std::size_t>(i - 1)] = 0.5 * (H + H.transpose().eval());
    }
}

Vec RieszBlocks::assemble_a_coeffs(const Vec& u, const std::vector<Vec>& mcoef,
                                   const Vec& acoef, const Vec& atcoef, const Vec& ccoef) const {
    Vec c = Vec::Zero(rho_ + L_ * r_ + 2 * r_ + p_);
    int off = 0;
    if (u.size() > 0) c.segment(off, rho_) = u;
    off += rho_;
    for (int j = 0; j < L_; ++j) {
        if (j < static_cast<int>(mcoef.size()) && mcoef[static_cast<std::size_t>(j)].size() > 0)
            c.segment(off, r_) = mcoef[static_cast<std::size_t>(j)];
        off += r_;
    }
    if (acoef.size() > 0) c.segment(off, r_) = acoef;
    off += r_;
    if (atcoef.size() > 0) c.segment(off, r_) = atcoef;
    off += r_;
    if (ccoef.size() > 0) c.segment(off, p_) = ccoef;
    return c;
}

Vec RieszBlocks::assemble_m_coeffs(const std::vector<Vec>& mcoef, const Vec& ccoef) const {
    Vec c = Vec::Zero(L_ * r_ + p_);
    int off = 0;
    for (int j = 0; j < L_; ++j) {
        if (j < static_cast<int>(mcoef.size()) && mcoef[static_cast<std::size_t>(j)].size() > 0)
            c.segment(off, r_) = mcoef[static_cast<std::size_t>(j)];
        off += r_;
    }
    if (ccoef.size() > 0) c.segment(off, p_) = ccoef;
    return c;
}

double RieszBlocks::dual_a_sq(int mode, const Vec& u,
                              const std::vector<Vec>& mcoef,
                              const Vec& acoef, const Vec& atcoef, const Vec& ccoef) const {
    const Vec c = assemble_a_coeffs(u, mcoef, acoef, atcoef, ccoef);
    return clamp0(c.dot(G_[static_cast<std::size_t>(mode - 1)] * c));
}

double RieszBlocks::dual_m_sq(int mode, const std::vector<Vec>& mcoef, const Vec& ccoef) const {
    const Vec c = assemble_m_coeffs(mcoef, ccoef);
    return clamp0(c.dot(H_[static_cast<std::size_t>(mode - 1)] * c));
}

//----------------------------------------------------------------------------
// Reduced-coordinate estimators
//----------------------------------------------------------------------------

namespace {

/// Weighted state-residual dual norm from reduced coefficients.
double reduced_state_residual_sq(const ReducedSystem& rs,
                                 const RieszBlocks& blocks,
                                 const HorizonStructure& hs,
                                 const std::vector<double>& weights,
                                 const Trajectory& theta_hat,
                                 const Trajectory& u,
                                 int k_stop) {
    const TimeGrid& grid = hs.grid;
    const double tau = grid.tau();
    if (k_stop < 0) k_stop = grid.num_nodes - 1;
    const int L = blocks.num_modes();
    double total = 0.0;
    std::vector<Vec> mcoef(static_cast<std::size_t>(L));
    for (int k = 1; k <= k_stop; ++k) {
        const int idx = interval_of_node_left(hs, k);
        if (idx >= static_cast<int>(weights.size()))
            throw std::invalid_argument("reduced state residual: weight vector too short");
        const int mode = hs.interval_modes[static_cast<std::size_t>(idx)];
        for (auto& mc : mcoef) mc = Vec();
        mcoef[static_cast<std::size_t>(mode - 1)] =
            -(theta_hat.values[static_cast<std::size_t>(k)] -
              theta_hat.values[static_cast<std::size_t>(k - 1)]) / tau;
        const Vec acoef = -theta_hat.values[static_cast<std::size_t>(k)];
        const double d2 = blocks.dual_a_sq(mode, u.values[static_cast<std::size_t>(k)],
                                           mcoef, acoef, Vec(), Vec());
        total += weights[static_cast<std::size_t>(idx)] * tau * d2;
    }
    (void)rs;
    return total;
}

}  // namespace

StateBound delta_theta_reduced(const ReducedSystem& rs,
                               const RieszBlocks& blocks,
                               const HorizonStructure& hs,
                               const ConstantsBundle& cb,
                               const Trajectory& theta_hat,
                               const Trajectory& u,
                               double initial_error_m) {
    const int N = hs.num_intervals();
    const std::vector<double> w = state_interval_weights(hs, cb, N);
    StateBound out;
    out.initial_part = (N > 0 ? w.front() : 1.0) * initial_error_m * initial_error_m;
    out.residual_part = reduced_state_residual_sq(rs, blocks, hs, w, theta_hat, u, -1);
    out.total = std::sqrt(out.initial_part + out.residual_part);
    return out;
}

AdjointBound delta_p_reduced(const ReducedSystem& rs,
                             const RieszBlocks& blocks,
                             const HorizonStructure& hs,
                             const ConstantsBundle& cb,
                             const SwitchingSignal& sig,
                             const AdjointSolution& adj_hat,
                             const Trajectory& y_hat,
                             const Trajectory& y_d,
                             const Vec& y_T,
                             double mu) {
    (void)rs;
    (void)sig;
    const TimeGrid& grid = hs.grid;
    const int K = grid.num_nodes;
    const double tau = grid.tau();
    const int N = hs.num_intervals();
    const int L = blocks.num_modes();
    const std::vector<double> wt = adjoint_interval_weights(hs, cb);

    AdjointBound out;
    std::vector<Vec> mcoef(static_cast<std::size_t>(L));

    // Interior step defects, k = 1 .. K-2.
    for (int k = 1; k + 1 < K; ++k) {
        const int mode_left = mode_at_node_left(hs, k);
        const int mode_right = mode_at_node_left(hs, k + 1);
        for (auto& mc : mcoef) mc = Vec();
        const Vec& pk = adj_hat.traj.values[static_cast<std::size_t>(k)];
        const Vec& pk1 = adj_hat.traj.values[static_cast<std::size_t>(k + 1)];
        if (mode_right == mode_left) {
            mcoef[static_cast<std::size_t>(mode_left - 1)] = (pk1 - pk) / tau;
        } else {
            mcoef[static_cast<std::size_t>(mode_right - 1)] = pk1 / tau;
            mcoef[static_cast<std::size_t>(mode_left - 1)] = -pk / tau;
        }
        const Vec atcoef = -pk;
        const Vec ccoef = y_hat.values[static_cast<std::size_t>(k)] -
                          y_d.values[static_cast<std::size_t>(k)];
        const int idx = interval_of_node_left(hs, k);
        const double d2 = blocks.dual_a_sq(mode_left, Vec(), mcoef, Vec(), atcoef, ccoef);
        out.residual_part += wt[static_cast<std::size_t>(idx)] * tau * d2;
    }

    // Terminal solve defect, k = K-1.
    {
        const int mode_T = hs.terminal_mode;
        for (auto& mc : mcoef) mc = Vec();
        const Vec& pT = adj_hat.traj.values[static_cast<std::size_t>(K - 1)];
        mcoef[static_cast<std::size_t>(mode_T - 1)] = -pT / tau;
        const Vec atcoef = -pT;
        Vec ccoef = y_hat.values[static_cast<std::size_t>(K - 1)] -
                    y_d.values[static_cast<std::size_t>(K - 1)];
        if (mu != 0.0)
            ccoef += (mu / tau) * (y_hat.values[static_cast<std::size_t>(K - 1)] - y_T);
        const double d2 = blocks.dual_a_sq(mode_T, Vec(), mcoef, Vec(), atcoef, ccoef);
        out.residual_part += wt[static_cast<std::size_t>(N - 1)] * tau * d2;
    }

    // Interior switch jumps.
    for (int j = 0; j < hs.num_switches(); ++j) {
        const int s = hs.jump_nodes[static_cast<std::size_t>(j)];
        const int ml = hs.switch_pairs[static_cast<std::size_t>(j)].first;
        const int mr = hs.switch_pairs[static_cast<std::size_t>(j)].second;
        for (auto& mc : mcoef) mc = Vec();
        mcoef[static_cast<std::size_t>(ml - 1)] = -adj_hat.value(s, Side::Left);
        Vec right = adj_hat.value(s, Side::Right);
        if (mr == ml)
            mcoef[static_cast<std::size_t>(ml - 1)] += right;
        else
            mcoef[static_cast<std::size_t>(mr - 1)] = right;
        const double d2 = blocks.dual_m_sq(ml, mcoef, Vec());
        out.jump_part += 2.0 * wt[static_cast<std::size_t>(j)] * d2;
    }

    // Terminal anchor defect.
    {
        const int mode_T = hs.terminal_mode;
        for (auto& mc : mcoef) mc = Vec();
        if (adj_hat.terminal.size() > 0)
            mcoef[static_cast<std::size_t>(mode_T - 1)] = -adj_hat.terminal;
        Vec ccoef;
        if (mu != 0.0)
            ccoef = mu * (y_hat.values[static_cast<std::size_t>(K - 1)] - y_T);
        const double d2 = blocks.dual_m_sq(mode_T, mcoef, ccoef);
        out.jump_part += 2.0 * wt[static_cast<std::size_t>(N - 1)] * d2;
    }

    out.total = std::sqrt(out.jump_part + out.residual_part);
    return out;
}

double state_residual_sq_reduced(const ReducedSystem& rs,
                                 const RieszBlocks& blocks,
                                 const HorizonStructure& hs,
                                 const std::vector<double>& interval_weights,
                                 const Trajectory& theta_hat,
                                 const Trajectory& u,
                                 int k_stop) {
    return reduced_state_residual_sq(rs, blocks, hs, interval_weights, theta_hat, u, k_stop);
}

}  // namespace smpc
