#include <smpc/pod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace smpc {

void SnapshotSet::append_pair(const Trajectory& state, const Trajectory& adjoint) {
    if (state.num_nodes() != adjoint.num_nodes())
        throw std::invalid_argument("SnapshotSet::append_pair: node count mismatch");
    const double tau = state.grid.tau();
    Entry se{state, Vec::Constant(state.num_nodes(), tau)};
    Entry ae{adjoint, Vec::Constant(adjoint.num_nodes(), tau)};
    pairs_.emplace_back(std::move(se), std::move(ae));
    while (static_cast<int>(pairs_.size()) > max_window_) pairs_.pop_front();
}

std::vector<const SnapshotSet::Entry*> SnapshotSet::entries() const {
    std::vector<const Entry*> out;
    out.reserve(2 * pairs_.size());
    for (const auto& pr : pairs_) {
        out.push_back(&pr.first);
        out.push_back(&pr.second);
    }
    return out;
}

PODBasis compute_pod(const SnapshotSet& snaps, const SpMat& v_inner, int max_rank) {
    const auto entries = snaps.entries();
    if (entries.empty()) throw std::invalid_argument("compute_pod: no snapshots");
    const int dim = entries.front()->traj.dim();

    // Flatten all snapshot columns with their quadrature weights.
    int n_cols = 0;
    for (const SnapshotSet::Entry* e : entries) n_cols += e->traj.num_nodes();
    Mat S(dim, n_cols);
    Vec w(n_cols);
    {
        int c = 0;
        for (const auto* e : entries) {
            for (int k = 0; k < e->traj.num_nodes(); ++k, ++c) {
                S.col(c) = e->traj.values[static_cast<std::size_t>(k)];
                w[c] = e->weights[k];
            }
        }
    }

    // Weighted Gramian of the method of snapshots: G_{jk} = sqrt(w_j w_k) <s_j, s_k>_V.
    const Mat VS = v_inner * S;  // dim x n_cols, columns v_inner * s_k
    Mat G = S.transpose() * VS;
    const Vec sqw = w.array().sqrt().matrix();
    for (int j = 0; j < n_cols; ++j)
        for (int k = 0; k < n_cols; ++k) G(j, k) *= sqw[j] * sqw[k];
    G = 0.5 * (G + G.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Mat> eig(G);
    if (eig.info() != Eigen::Success) throw std::runtime_error("compute_pod: eigensolver failed");

    PODBasis basis;
    basis.total_energy = G.trace();

    // Eigenvalues ascending from Eigen; keep the descending tail above the cutoff.
    const Vec& lam = eig.eigenvalues();
    const double lam_max = lam[n_cols - 1];
    if (!(lam_max > 0.0)) throw std::runtime_error("compute_pod: snapshot set has no energy");
    const double cutoff = 1e-14 * lam_max;
    std::vector<int> keep;
    for (int i = n_cols - 1; i >= 0; --i) {
        if (lam[i] <= cutoff) break;
        keep.push_back(i);
    }
    int rank = static_cast<int>(keep.size());
    if (max_rank > 0) rank = std::min(rank, max_rank);

    basis.eigenvalues = Vec(rank);
    basis.V = Mat(dim, rank);
    for (int m = 0; m < rank; ++m) {
        const int i = keep[static_cast<std::size_t>(m)];
        basis.eigenvalues[m] = lam[i];
        // psi_m = S (sqrt(w) .* v_i) / sqrt(lambda_i)
        const Vec coeff = sqw.cwiseProduct(eig.eigenvectors().col(i));
        basis.V.col(m) = (S * coeff) / std::sqrt(lam[i]);
    }

    // One modified Gram-Schmidt pass in the v_inner inner product.
    for (int m = 0; m < rank; ++m) {
        Vec vm = basis.V.col(m);
        for (int j = 0; j < m; ++j) {
            const double proj = basis.V.col(j).dot(v_inner * vm);
            vm -= proj * basis.V.col(j);
        }
        const double nrm = std::sqrt(vm.dot(v_inner * vm));
        if (!(nrm > 0.0)) throw std::runtime_error("compute_pod: degenerate mode after reorthogonalization");
        basis.V.col(m) = vm / nrm;
    }
    return basis;
}

double energy_fraction(const PODBasis& basis, int r) {
    if (basis.total_energy <= 0.0) return 1.0;
    r = std::min(r, static_cast<int>(basis.eigenvalues.size()));
    return basis.eigenvalues.head(r).sum() / basis.total_energy;
}

int select_rank(const PODBasis& basis, double target, bool* reached) {
    for (int r = 1; r <= basis.rank(); ++r) {
        if (energy_fraction(basis, r) >= target) {
            if (reached) *reached = true;
            return r;
        }
    }
    if (reached) *reached = false;
    return basis.rank();
}

ReducedSystem galerkin_project(const SwitchedOperatorSet& ops, const Mat& V) {
    ReducedSystem rs;
    rs.r = static_cast<int>(V.cols());
    rs.V = V;
    const int L = ops.num_modes;
    rs.Mh.reserve(L);
    rs.Ah.reserve(L);
    rs.Bh.reserve(L);
    rs.Ch.reserve(L);
    for (int i = 0; i < L; ++i) {
        rs.Mh.push_back(V.transpose() * (ops.M[static_cast<std::size_t>(i)] * V));
        rs.Ah.push_back(V.transpose() * (ops.A[static_cast<std::size_t>(i)] * V));
        rs.Bh.push_back(V.transpose() * ops.B[static_cast<std::size_t>(i)]);
        rs.Ch.push_back(ops.C[static_cast<std::size_t>(i)] * V);
    }
    return rs;
}

Vec project_initial(const ReducedSystem& rs, const SpMat& v_inner, const Vec& theta) {
    return rs.V.transpose() * (v_inner * theta);
}

Eigen::PartialPivLU<Mat>& ReducedControlSystem::step_solver(int mode, double tau, bool transposed) {
    const long long key = static_cast<long long>(tau * 1e12 + 0.5);
    auto& cache = transposed ? stepT_lu_ : step_lu_;
    auto it = cache.find({mode, key});
    if (it == cache.end()) {
        Mat E = rs_->mass(mode) + tau * rs_->stiffness(mode);
        if (transposed) E.transposeInPlace();
        it = cache.emplace(std::make_pair(mode, key),
                           std::make_unique<Eigen::PartialPivLU<Mat>>(E)).first;
    }
    return *it->second;
}

Eigen::PartialPivLU<Mat>& ReducedControlSystem::mass_solver(int mode) {
    if (mass_lu_.size() < rs_->Mh.size()) mass_lu_.resize(rs_->Mh.size());
    auto& slot = mass_lu_[static_cast<std::size_t>(mode - 1)];
    if (!slot) slot = std::make_unique<Eigen::PartialPivLU<Mat>>(rs_->mass(mode));
    return *slot;
}

Trajectory ReducedControlSystem::solve_state(const SwitchingSignal& sig, const TimeGrid& grid,
                                             const Vec& x0, const Trajectory& u) {
    if (x0.size() != rs_->r) throw std::invalid_argument("reduced solve_state: initial value dimension");
    if (u.num_nodes() != grid.num_nodes) throw std::invalid_argument("reduced solve_state: control grid mismatch");
    const double tau = grid.tau();
    Trajectory x(grid, rs_->r);
    x.values[0] = x0;
    for (int k = 0; k + 1 < grid.num_nodes; ++k) {
        const int mode = sig.mode_at(grid.node(k + 1), Side::Left);
        const Vec rhs = rs_->mass(mode) * x.values[k] + tau * (rs_->input(mode) * u.values[k + 1]);
        x.values[k + 1] = step_solver(mode, tau, false).solve(rhs);
    }
    return x;
}

Trajectory ReducedControlSystem::apply_output(const SwitchingSignal& sig, const Trajectory& x) const {
    Trajectory y(x.grid, rs_->Ch.empty() ? 0 : static_cast<int>(rs_->Ch.front().rows()));
    for (int k = 0; k < x.num_nodes(); ++k) {
        const int mode = k == 0 ? sig.mode_at(x.grid.node(0), Side::Right)
                                : sig.mode_at(x.grid.node(k), Side::Left);
        y.values[k] = rs_->output(mode) * x.values[k];
    }
    return y;
}

AdjointSolution ReducedControlSystem::solve_adjoint(const SwitchingSignal& sig, const TimeGrid& grid,
                                                    const AdjointData& data) {
    const Trajectory& y = *data.y;
    const Trajectory& y_d = *data.y_d;
    if (y.num_nodes() != grid.num_nodes || y_d.num_nodes() != grid.num_nodes)
        throw std::invalid_argument("reduced solve_adjoint: output grid mismatch");
    const int K = grid.num_nodes;
    const double tau = grid.tau();

    AdjointSolution adj;
    adj.traj = Trajectory(grid, rs_->r);

    const int mode_T = sig.mode_at(grid.node(K - 1), Side::Left);
    Vec anchor = Vec::Zero(rs_->r);
    if (data.mu != 0.0)
        anchor = data.mu * (rs_->output(mode_T).transpose() * (y.values[K - 1] - data.y_T));
    adj.terminal = mass_solver(mode_T).solve(anchor);
    {
        const Vec rhs = anchor + tau * (rs_->output(mode_T).transpose() *
                                        (y.values[K - 1] - y_d.values[K - 1]));
        adj.traj.values[K - 1] = step_solver(mode_T, tau, true).solve(rhs);
    }

    for (int k = K - 2; k >= 1; --k) {
        const int mode_left = sig.mode_at(grid.node(k), Side::Left);
        const int mode_right = sig.mode_at(grid.node(k + 1), Side::Left);
        const Vec rhs = rs_->mass(mode_right) * adj.traj.values[k + 1] +
                        tau * (rs_->output(mode_left).transpose() *
                               (y.values[k] - y_d.values[k]));
        adj.traj.values[k] = step_solver(mode_left, tau, true).solve(rhs);
        if (mode_left != mode_right) {
            adj.right_at_switch[k] =
                mass_solver(mode_right).solve(rs_->mass(mode_left) * adj.traj.values[k]);
        }
    }

    if (K >= 2) {
        const int mode0 = sig.mode_at(grid.node(1), Side::Left);
        const Vec rhs = rs_->mass(mode0) * adj.traj.values[1] +
                        tau * (rs_->output(mode0).transpose() *
                               (y.values[0] - y_d.values[0]));
        adj.traj.values[0] = step_solver(mode0, tau, true).solve(rhs);
    }
    return adj;
}

Vec ReducedControlSystem::input_transpose_apply(int mode, const Vec& p) const {
    return rs_->input(mode).transpose() * p;
}

Mat complete_basis(const SpMat& v_inner) {
    Eigen::SimplicialLLT<SpMat> llt(v_inner);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("complete_basis: inner product not SPD");
    const int n = static_cast<int>(v_inner.rows());
    // v_inner = P^T L L^T P  =>  V = P^T L^{-T} P ... handled by solving
    // U x = e_i with the full factorization's upper factor in permuted
    // coordinates; using matrixU().solve on the permuted identity and
    // un-permuting keeps V^T v_inner V = I exactly.
    Mat I = Mat::Identity(n, n);
    // Solve L^T (P V) = P I  =>  V = P^{-1} L^{-T} P.
    Mat PI = llt.permutationP() * I;
    Mat X = llt.matrixU().solve(PI);
    Mat V = llt.permutationPinv() * X;
    return V;
}

Trajectory lift(const ReducedSystem& rs, const Trajectory& reduced) {
    Trajectory out(reduced.grid, static_cast<int>(rs.V.rows()));
    for (int k = 0; k < reduced.num_nodes(); ++k)
        out.values[static_cast<std::size_t>(k)] = rs.V * reduced.values[static_cast<std::size_t>(k)];
    return out;
}

AdjointSolution lift(const ReducedSystem& rs, const AdjointSolution& reduced) {
    AdjointSolution out;
    out.traj = lift(rs, reduced.traj);
    for (const auto& [k, v] : reduced.right_at_switch) out.right_at_switch[k] = rs.V * v;
    if (reduced.terminal.size() > 0) out.terminal = rs.V * reduced.terminal;
    return out;
}

}  // namespace smpc
