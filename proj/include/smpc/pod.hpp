#ifndef SMPC_POD_HPP
#define SMPC_POD_HPP

#include <deque>
#include <memory>
#include <vector>

#include <Eigen/LU>

#include "smpc/ocp.hpp"
#include "smpc/operators.hpp"
#include "smpc/trajectory.hpp"

namespace smpc {

/// Sliding window of state/adjoint snapshot trajectories feeding the POD.
/// Trajectories are appended in pairs (one optimal state with its adjoint);
/// when more than `max_window` pairs are held the oldest pair is evicted
/// (FIFO), so the basis always reflects the most recent solves.
class SnapshotSet {
public:
  struct Entry {
    Trajectory traj;
    Vec weights; ///< quadrature weight per node
  };

  explicit SnapshotSet(int max_window = 7) : max_window_(max_window) {}

  /// Append one (state, adjoint) trajectory pair; both get the right-endpoint
  /// rectangle weights tau, with the initial node included so initial values
  /// stay representable in the basis.
  void append_pair(const Trajectory& state, const Trajectory& adjoint);

  int num_pairs() const { return static_cast<int>(pairs_.size()); }
  int max_window() const { return max_window_; }
  const std::deque<std::pair<Entry, Entry>>& pairs() const { return pairs_; }

  /// All entries flattened (states and adjoints interleaved pairwise).
  std::vector<const Entry*> entries() const;

private:
  int max_window_;
  std::deque<std::pair<Entry, Entry>> pairs_;
};

/// Result of the method of snapshots: V-orthonormal modes (columns of V),
/// the full spectrum of the weighted snapshot Gramian, and the total
/// snapshot energy sum_j w_j ||s_j||_V^2.
struct PODBasis {
  Mat V;           ///< dim x rank, v_inner-orthonormal columns
  Vec eigenvalues; ///< all retained Gramian eigenvalues, descending
  double total_energy = 0.0;
  int rank() const { return static_cast<int>(V.cols()); }
};

/// Weighted method of snapshots w.r.t. the v_inner inner product.  Modes with
/// eigenvalue below 1e-14 * lambda_1 are dropped; the returned basis gets one
/// modified Gram-Schmidt re-orthonormalization pass against roundoff.
PODBasis compute_pod(const SnapshotSet& snaps, const SpMat& v_inner, int max_rank = -1);

/// Fraction of snapshot energy captured by the first r modes,
/// sum_{i<r} lambda_i / total_energy.
double energy_fraction(const PODBasis& basis, int r);

/// Smallest r with energy_fraction >= target.  If the target is unreachable
/// with the retained modes, returns the full rank and sets *reached = false.
int select_rank(const PODBasis& basis, double target, bool* reached = nullptr);

/// Galerkin projection of the switched operators onto span(V):
/// Mh_i = V^T M_i V etc.  Also keeps V and the reduced output maps.
struct ReducedSystem {
  int r = 0;
  Mat V; ///< dim x r
  std::vector<Mat> Mh, Ah; ///< r x r per mode
  std::vector<Mat> Bh;     ///< r x rho per mode
  std::vector<Mat> Ch;     ///< p x r per mode
  const Mat& mass(int mode) const { return Mh.at(static_cast<std::size_t>(mode - 1)); }
  const Mat& stiffness(int mode) const { return Ah.at(static_cast<std::size_t>(mode - 1)); }
  const Mat& input(int mode) const { return Bh.at(static_cast<std::size_t>(mode - 1)); }
  const Mat& output(int mode) const { return Ch.at(static_cast<std::size_t>(mode - 1)); }
};

ReducedSystem galerkin_project(const SwitchedOperatorSet& ops, const Mat& V);

/// v_inner-orthogonal projection coefficients of a full state,
/// c = V^T v_inner theta (valid because V is v_inner-orthonormal).
Vec project_initial(const ReducedSystem& rs, const SpMat& v_inner, const Vec& theta);

/// Dense factorization cache and ControlSystem implementation for a reduced
/// system; mirrors FullControlSystem with dense LU solves.
class ReducedControlSystem : public ControlSystem {
public:
  explicit ReducedControlSystem(const ReducedSystem& rs) : rs_(&rs) {}
  int state_dim() const override { return rs_->r; }
  int num_inputs() const override {
    return rs_->Bh.empty() ? 0 : static_cast<int>(rs_->Bh.front().cols());
  }
  Trajectory solve_state(const SwitchingSignal& sig, const TimeGrid& grid,
                         const Vec& x0, const Trajectory& u) override;
  Trajectory apply_output(const SwitchingSignal& sig, const Trajectory& x) const override;
  AdjointSolution solve_adjoint(const SwitchingSignal& sig, const TimeGrid& grid,
                                const AdjointData& data) override;
  Vec input_transpose_apply(int mode, const Vec& p) const override;
  const ReducedSystem& reduced() const { return *rs_; }

private:
  const ReducedSystem* rs_;
  std::map<std::pair<int, long long>, std::unique_ptr<Eigen::PartialPivLU<Mat>>> step_lu_, stepT_lu_;
  std::vector<std::unique_ptr<Eigen::PartialPivLU<Mat>>> mass_lu_;

  Eigen::PartialPivLU<Mat>& step_solver(int mode, double tau, bool transposed);
  Eigen::PartialPivLU<Mat>& mass_solver(int mode);
};

/// Identity-complete v_inner-orthonormal basis (r = N): columns are L^{-T}
/// for the Cholesky factor v_inner = L L^T, so V^T v_inner V = I exactly and
/// the reduced system reproduces the full one up to roundoff.
Mat complete_basis(const SpMat& v_inner);

/// Lift of a reduced trajectory back to original coordinates, node-wise V x.
Trajectory lift(const ReducedSystem& rs, const Trajectory& reduced);

/// Lift of a reduced adjoint (left limits, right limits at switches and the
/// terminal anchor are all lifted with the same basis).
AdjointSolution lift(const ReducedSystem& rs, const AdjointSolution& reduced);

} // namespace smpc

#endif
