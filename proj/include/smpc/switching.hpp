#ifndef SMPC_SWITCHING_HPP
#define SMPC_SWITCHING_HPP

#include <vector>

namespace smpc {

/// Uniform time grid t_0 < t_1 < ... < t_{K-1} with step tau.
///
/// All solvers, quadrature rules and trajectories in this library live on
/// such a grid; switching signals are required to place their breakpoints
/// exactly on grid nodes (see SwitchingSignal::validate_against).
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  int num_nodes = 2; ///< K, number of nodes (K-1 steps)

  TimeGrid() = default;
  TimeGrid(double a, double b, int K);

  double tau() const { return (t_end - t_start) / (num_nodes - 1); }
  double node(int k) const;
  int num_steps() const { return num_nodes - 1; }

  /// Index of the grid node equal to t (up to tol*tau); throws if t is not a node.
  int index_of(double t, double rel_tol = 1e-9) const;

  /// Sub-grid spanning nodes [k0, k1] of this grid.
  TimeGrid window(int k0, int k1) const;
};

enum class Side { Left, Right };

/// Piecewise constant switching law on an interval [t_begin, t_end].
///
/// The law takes the value modes[0] on (t_begin, jump_times[0]], modes[1] on
/// (jump_times[0], jump_times[1]], ..., modes.back() on (jump_times.back(),
/// t_end].  Intervals are half open to the left, matching the convention
/// sigma(t_k^-) for implicit Euler steps; evaluation at a breakpoint must
/// therefore distinguish the two one-sided limits.
class SwitchingSignal {
public:
  SwitchingSignal() = default;

  /// jumps must be strictly increasing and lie strictly inside (t_begin, t_end);
  /// modes has size jumps.size()+1 with 1-based mode indices.
  SwitchingSignal(double t_begin, double t_end,
                  std::vector<double> jumps, std::vector<int> modes);

  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  const std::vector<double>& jump_times() const { return jumps_; }
  const std::vector<int>& interval_modes() const { return modes_; }

  /// Active mode at time t approached from the given side.  At an interior
  /// breakpoint the two sides differ; at t_begin and t_end both sides agree
  /// with the first/last interval.
  int mode_at(double t, Side side) const;
  int mode_left(double t) const { return mode_at(t, Side::Left); }
  int mode_right(double t) const { return mode_at(t, Side::Right); }

  /// Largest mode index referenced by the signal.
  int max_mode() const;

  /// Restriction to [a, b] (a horizon window).  Breakpoints equal to a or b
  /// are dropped: the mode at the new left end is mode_right(a), at the new
  /// right end mode_left(b).
  SwitchingSignal restrict(double a, double b) const;

  /// Throws if some breakpoint does not coincide with a node of `grid`, or if
  /// a breakpoint sits at the first or last node.
  void validate_against(const TimeGrid& grid) const;

  /// Node indices of the breakpoints on `grid` (ascending).
  std::vector<int> jump_node_indices(const TimeGrid& grid) const;

  /// Absolute tolerance under which a time is considered to sit exactly on a
  /// breakpoint (grid nodes accumulate a few ulp of drift).
  double time_tolerance() const;

private:
  double t_begin_ = 0.0, t_end_ = 1.0;
  std::vector<double> jumps_;
  std::vector<int> modes_;
};

/// Periodic alternating law 1,2,1,2,... switching every `period` time units,
/// as used by the two-room benchmark (door closed <-> open).
SwitchingSignal make_alternating_signal(double t_begin, double t_end,
                                        double period, int first_mode = 1,
                                        int num_modes = 2);

} // namespace smpc

#endif
