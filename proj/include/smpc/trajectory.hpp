#ifndef SMPC_TRAJECTORY_HPP
#define SMPC_TRAJECTORY_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "smpc/switching.hpp"
#include "smpc/types.hpp"

namespace smpc {

/// Node-indexed vector-valued function of time on a TimeGrid.
///
/// States and controls are single valued.  Adjoints of switched systems are
/// discontinuous at breakpoints; AdjointSolution below carries their
/// one-sided values separately.
struct Trajectory {
  TimeGrid grid;
  std::vector<Vec> values; ///< one vector per node, values[k] at grid.node(k)

  Trajectory() = default;
  Trajectory(const TimeGrid& g, int dim)
      : grid(g), values(static_cast<std::size_t>(g.num_nodes), Vec::Zero(dim)) {}

  int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  int num_nodes() const { return static_cast<int>(values.size()); }

  Vec& operator[](int k) { return values.at(static_cast<std::size_t>(k)); }
  const Vec& operator[](int k) const { return values.at(static_cast<std::size_t>(k)); }

  /// Restriction to nodes [k0, k1].
  Trajectory window(int k0, int k1) const {
    Trajectory out(grid.window(k0, k1), dim());
    for (int k = k0; k <= k1; ++k) out[k - k0] = values[static_cast<std::size_t>(k)];
    return out;
  }

  /// Sum_k tau * <a_k, b_k> over nodes 1..K-1 (right endpoint quadrature;
  /// the node-0 value never enters time integrals).
  static double inner(const Trajectory& a, const Trajectory& b) {
    if (a.num_nodes() != b.num_nodes())
      throw std::invalid_argument("Trajectory::inner: node count mismatch");
    double s = 0.0;
    for (int k = 1; k < a.num_nodes(); ++k) s += a[k].dot(b[k]);
    return s * a.grid.tau();
  }

  static double norm(const Trajectory& a) {
    double s = inner(a, a);
    return s > 0 ? std::sqrt(s) : 0.0;
  }
};

/// Adjoint trajectory with one-sided values at switching nodes.
///
/// traj[k] stores the left limit p(t_k^-); for every breakpoint node s the
/// map right_at_switch holds p(t_s^+), related to the left limit by the mass
/// jump M_{sigma(t^-)} p(t^-) = M_{sigma(t^+)} p(t^+).  `terminal` is the
/// value anchored by the terminal condition M_{sigma(T)} p(T) = mu C^T (y(T) - y_T).
struct AdjointSolution {
  Trajectory traj;
  std::map<int, Vec> right_at_switch;
  Vec terminal;

  /// Value at node k approached from the given side.
  const Vec& value(int k, Side side) const {
    if (side == Side::Right) {
      auto it = right_at_switch.find(k);
      if (it != right_at_switch.end()) return it->second;
    }
    return traj[k];
  }
};

} // namespace smpc

#endif
