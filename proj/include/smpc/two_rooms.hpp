#ifndef SMPC_TWO_ROOMS_HPP
#define SMPC_TWO_ROOMS_HPP

#include <vector>

#include "smpc/operators.hpp"
#include "smpc/switching.hpp"
#include "smpc/trajectory.hpp"

namespace smpc {

/// Two-room heating benchmark: a rectangular domain split into a left room,
/// a dividing wall with a door, and a right room,
///
///   Omega = (0, Lx) x (0, Ly),   wall strip (wall_x0, wall_x1) x (0, Ly),
///   door  = (wall_x0, wall_x1) x (door_y0, door_y1).
///
/// Heat conduction with convection wind d, reaction c, Robin heat loss
/// gamma_out on the outer boundary except the left edge, and rho control
/// channels (piecewise constant heat fluxes) on the left edge.  Two modes:
/// door closed (mode 1) or open (mode 2).  The door region carries the
/// material coefficients (zeta[0], kappa[0]) when closed and the room
/// coefficients (zeta[1], kappa[1]) when open; the rooms always use index 1
/// and the wall always index 2.
struct BenchmarkConfig {
  double target_h = 0.2; ///< requested mesh width; snapped to subdomain lines

  double Lx = 10.3, Ly = 5.0;
  double wall_x0 = 5.0, wall_x1 = 5.3;
  double door_y0 = 2.3, door_y1 = 2.7;

  double zeta[3] = {1.0, 0.5, 1.0};    ///< heat capacities (door-closed, room, wall)
  double kappa[3] = {0.01, 10.0, 0.01}; ///< conductivities   (door-closed, room, wall)
  double gamma_out = 0.15; ///< Robin coefficient on the outer boundary
  double wind_x = 0.01;    ///< convection field d = (wind_x, 0)
  double reaction = 0.01;  ///< zeroth order coefficient c

  int num_inputs = 10; ///< rho equal control channels on the left edge
};

/// Structured triangular mesh of the benchmark domain (tensor grid snapped to
/// the wall and door lines, each cell split into two triangles).
struct MeshInfo {
  std::vector<double> xs, ys;       ///< grid lines
  int nx() const { return static_cast<int>(xs.size()); }
  int ny() const { return static_cast<int>(ys.size()); }
  int node_index(int ix, int iy) const { return ix * ny() + iy; }
  double room1_area = 0.0, room2_area = 0.0;
};

struct BenchmarkAssembly {
  SwitchedOperatorSet ops;
  MeshInfo mesh;
};

/// Assemble mass/stiffness/input/output matrices for both modes with exact
/// per-element integration of the piecewise constant coefficients (the mesh
/// is aligned with all material interfaces).  v_inner is set to the
/// symmetric part of the mode-1 stiffness.
BenchmarkAssembly assemble_two_rooms(const BenchmarkConfig& cfg);

/// Tracking target: the output trajectory of the benchmark driven by the
/// constant control u = 1 on all channels from the constant-one initial
/// state.  The returned trajectory lives on `grid` and is what the
/// controller tries to track (u_d is identically zero).
Trajectory compute_tracking_target(const SwitchedOperatorSet& ops,
                                   const SwitchingSignal& sig,
                                   const TimeGrid& grid);

} // namespace smpc

#endif
