#ifndef SMPC_TESTS_HELPERS_HPP
#define SMPC_TESTS_HELPERS_HPP

#include <random>
#include <vector>

#include "smpc/operators.hpp"
#include "smpc/switching.hpp"
#include "smpc/trajectory.hpp"

namespace smpc_tests {

using smpc::Mat;
using smpc::SpMat;
using smpc::Vec;

/// Deterministic dense standard-normal matrix.
inline Mat randn(int rows, int cols, std::mt19937& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat X(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) X(i, j) = dist(gen);
  return X;
}

inline SpMat to_sparse(const Mat& X) {
  SpMat S = X.sparseView();
  S.makeCompressed();
  return S;
}

/// Well-conditioned random SPD matrix  I + (1/N) G G^T  with G ~ N(0,1).
inline Mat random_spd(int n, std::mt19937& gen) {
  const Mat G = randn(n, n, gen);
  return Mat::Identity(n, n) + (G * G.transpose()) / static_cast<double>(n);
}

/// Random switched evolution system with SPD masses, coercive (SPD + skew)
/// stiffness blocks, dense-random input/output maps, and identity
/// transitions.  v_inner is the symmetric part of A_1, matching the
/// convention used by the benchmark assembly.
inline smpc::SwitchedOperatorSet make_random_system(int N, int L, int rho,
                                                    int p, unsigned seed) {
  std::mt19937 gen(seed);
  smpc::SwitchedOperatorSet ops;
  ops.num_modes = L;
  ops.dim = N;
  ops.num_inputs = rho;
  ops.num_outputs = p;
  for (int i = 0; i < L; ++i) {
    ops.M.push_back(to_sparse(random_spd(N, gen)));
    const Mat S = random_spd(N, gen);
    Mat W = randn(N, N, gen) * 0.3;
    W = ((W - W.transpose()) / 2.0).eval();
    ops.A.push_back(to_sparse(S + W));
    ops.B.push_back(to_sparse(randn(N, rho, gen)));
    ops.C.push_back(randn(p, N, gen));
  }
  ops.v_inner = smpc::symmetric_part(ops.A[0]);
  return ops;
}

/// Uniform grid on [0, t_end] with num_nodes nodes.
inline smpc::TimeGrid make_grid(double t_end, int num_nodes) {
  smpc::TimeGrid grid;
  grid.t_start = 0.0;
  grid.t_end = t_end;
  grid.num_nodes = num_nodes;
  return grid;
}

/// Trajectory with independent N(0,1) node values; node 0 zeroed when
/// `zero_node0` is set (control-space convention).
inline smpc::Trajectory random_trajectory(const smpc::TimeGrid& grid, int dim,
                                          std::mt19937& gen,
                                          bool zero_node0 = false) {
  smpc::Trajectory traj(grid, dim);
  for (int k = 0; k < grid.num_nodes; ++k) traj.values[k] = randn(dim, 1, gen);
  if (zero_node0) traj.values[0].setZero();
  return traj;
}

}  // namespace smpc_tests

#endif
