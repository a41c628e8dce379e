#ifndef SMPC_OCP_HPP
#define SMPC_OCP_HPP

#include <limits>

#include "smpc/adjoint.hpp"
#include "smpc/forward.hpp"
#include "smpc/norms.hpp"
#include "smpc/trajectory.hpp"

namespace smpc {

/// Data of one finite-horizon tracking problem
///
///   min J(u) = int 1/2 |y - y_d|^2 + lambda/2 |u - u_d|^2 dt
///              + mu/2 |y(T) - y_T|^2 + c_l1 ||u||_L1 + box indicator,
///
/// discretized with the right-endpoint rectangle rule on the horizon grid.
struct CostConfig {
  double lambda = 1e-2; ///< control energy weight (strong convexity)
  double c_l1 = 1e-3;   ///< L1 sparsity weight
  double u_lo = -20.0, u_hi = 20.0; ///< box constraints (componentwise)
  double mu = 0.0;      ///< terminal tracking weight
  Vec y_T;              ///< terminal output target (may be empty if mu = 0)
  Trajectory y_d;       ///< desired output on the horizon grid
  Trajectory u_d;       ///< desired control on the horizon grid
};

/// Abstract switched linear control system as seen by the optimizer; backed
/// either by the full order model or by a Galerkin reduced model.
class ControlSystem {
public:
  virtual ~ControlSystem() = default;
  virtual int state_dim() const = 0;
  virtual int num_inputs() const = 0;
  virtual Trajectory solve_state(const SwitchingSignal& sig, const TimeGrid& grid,
                                 const Vec& x0, const Trajectory& u) = 0;
  virtual Trajectory apply_output(const SwitchingSignal& sig, const Trajectory& x) const = 0;
  virtual AdjointSolution solve_adjoint(const SwitchingSignal& sig, const TimeGrid& grid,
                                        const AdjointData& data) = 0;
  /// B_i^T p for the gradient assembly.
  virtual Vec input_transpose_apply(int mode, const Vec& p) const = 0;
};

/// ControlSystem backed by the sparse full-order operators.
class FullControlSystem : public ControlSystem {
public:
  explicit FullControlSystem(SystemSolvers& solvers) : solvers_(&solvers) {}
  int state_dim() const override { return solvers_->ops().dim; }
  int num_inputs() const override { return solvers_->ops().num_inputs; }
  Trajectory solve_state(const SwitchingSignal& sig, const TimeGrid& grid,
                         const Vec& x0, const Trajectory& u) override;
  Trajectory apply_output(const SwitchingSignal& sig, const Trajectory& x) const override;
  AdjointSolution solve_adjoint(const SwitchingSignal& sig, const TimeGrid& grid,
                                const AdjointData& data) override;
  Vec input_transpose_apply(int mode, const Vec& p) const override;
  SystemSolvers& solvers() { return *solvers_; }

private:
  SystemSolvers* solvers_;
};

/// Cost of a control with its realized output; +infinity outside the box
/// (violations beyond an absolute tolerance of 1e-12).
double evaluate_cost(const Trajectory& u, const Trajectory& y, const CostConfig& cost);

/// Smooth part nabla F(u)(t_k) = lambda (u_k - u_d_k) + B_{sigma(t_k^-)}^T p_k
/// as a trajectory in the control space (node 0 stays zero).
Trajectory smooth_gradient(const ControlSystem& sys, const SwitchingSignal& sig,
                           const Trajectory& u, const AdjointSolution& adj,
                           const CostConfig& cost);

/// Proximal map of alpha * (c_l1 ||.||_1 + box indicator): soft threshold by
/// alpha*c_l1, then clamp to [u_lo, u_hi], componentwise.
Vec prox_nonsmooth(const Vec& v, double alpha, const CostConfig& cost);

struct OptimizerOptions {
  double abs_tol = 1e-11;
  double rel_tol = 1e-11;
  int max_iterations = 5000;
  double bb_min = 1e-8, bb_max = 1e8; ///< clipping for the spectral step
  int nonmonotone_window = 5;
  double backtrack_factor = 0.5;
  double sufficient_decrease = 1e-4;
};

struct OptimizerResult {
  Trajectory u;          ///< optimal control
  Trajectory state;      ///< state driven by u from x0
  Trajectory y;          ///< realized output
  AdjointSolution adjoint; ///< adjoint of the returned state's output
  double cost = std::numeric_limits<double>::quiet_NaN();
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
};

/// Proximal gradient method with spectral (Barzilai-Borwein) steps and a
/// nonmonotone Armijo line search.  Stops when
/// ||u - prox(u - nabla F(u), 1)||_U <= abs_tol + rel_tol * ||u||_U.
/// `warm_start` (if nonempty) initializes the iteration.
OptimizerResult solve_ocp(ControlSystem& sys, const SwitchingSignal& sig,
                          const TimeGrid& grid, const Vec& x0, const CostConfig& cost,
                          const OptimizerOptions& opts = {},
                          const Trajectory* warm_start = nullptr);

} // namespace smpc

#endif
