// Copyright 2026 The nhtrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Second-order Lagrangian formulation of the tracking problem and its
// midpoint discretization: discrete constraints, discrete Euler-Lagrange
// (DEL) boundary-value system, banded Newton solve and diagnostics.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"
#include "nhtrack/ode.hpp"
#include "nhtrack/pmp.hpp"
#include "nhtrack/tracking.hpp"

namespace nhtrack {

/// The DEL Jacobian is singular; see regularity_check.
class RegularityError : public std::runtime_error {
 public:
  RegularityError(const std::string& what, double rcond)
      : std::runtime_error(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

enum class InitialGuess { linear_interpolation, reference_samples };
enum class SlotDerivatives { automatic, analytic, finite_difference };

std::string to_string(InitialGuess mode);
InitialGuess initial_guess_from_string(const std::string& name);

struct DelSettings {
  double newton_tol = 1e-10;     // infinity norm of the DEL residual
  int max_iters = 100;
  double fd_step = 1e-6;         // slot and Jacobian differencing
  InitialGuess initial_guess = InitialGuess::linear_interpolation;
  bool enforce_first_interval = true;  // constrain the interval from node 0
  SlotDerivatives slot_derivatives = SlotDerivatives::automatic;
  // Velocity slot of Psi_d: midpoint average (default) or the difference
  // quotient (v_{k+1} - v_k) / h.
  bool difference_quotient_velocity = false;
  double damping = 0.5;
  int max_halvings = 30;
  int watchdog_steps = 4;  // undamped steps tried before backtracking

  void validate() const;
};

/// L = lambda0 * 1/2 (w |q - q_r|^2 + w |v - v_r|^2 + eps |u|^2) with
/// u = vdot + Gamma[v, v] + grad V.
double ocp_lagrangian(const SystemModel& model, const TrackingProblem& problem,
                      double t, const Vector& q, const Vector& v,
                      const Vector& vdot);

/// u = vdot + Gamma(q)[v, v] + grad V(q).
Vector control_from_acceleration(const SystemModel& model, const Vector& q,
                                 const Vector& v, const Vector& vdot);

struct LagrangianGradient {
  Vector dq;     // dL/dq
  Vector dv;     // dL/dv
  Vector dvdot;  // dL/dvdot
};

/// Partial derivatives of ocp_lagrangian; Gamma derivatives come from the
/// model (exact for the benchmarks, central differences otherwise).
LagrangianGradient lagrangian_gradient(const SystemModel& model,
                                       const TrackingProblem& problem,
                                       double t, const Vector& q,
                                       const Vector& v, const Vector& vdot,
                                       double fd_step = 1e-6);

/// Pointwise residual of the second-order optimality system
///   lambda' + dL/dq + (drho/dq v)^T lambda = 0
///   q' - rho(q) v = 0
///   d/dt dL/dvdot - dL/dv - rho^T lambda = 0
/// given the state, multiplier and their time derivatives (vddot enters
/// through d/dt dL/dvdot). Stacked as (n, n, r).
Vector optimality_residual_at(const SystemModel& model,
                              const TrackingProblem& problem, double t,
                              const Vector& q, const Vector& v,
                              const Vector& lambda, const Vector& qdot,
                              const Vector& vdot, const Vector& vddot,
                              const Vector& lambda_dot,
                              double fd_step = 1e-6);

struct ContinuousSample {
  double t;
  Vector q;
  Vector v;
  Vector lambda;
};

/// optimality_residual_at at every interior sample, with derivatives from
/// central differences. Samples must be uniformly spaced; throws
/// std::invalid_argument with fewer than 3.
std::vector<Vector> continuous_optimality_residual(
    const SystemModel& model, const TrackingProblem& problem,
    const std::vector<ContinuousSample>& samples, double fd_step = 1e-6);

/// Psi_d = (q1 - q0)/h - rho((q0 + q1)/2) (v0 + v1)/2.
Vector discrete_constraint(const SystemModel& model, const AdmissibleState& z0,
                           const AdmissibleState& z1, double h,
                           bool difference_quotient_velocity = false);

/// h * L(t_k + h/2, q_mid, v_mid, (v1 - v0)/h).
double discrete_lagrangian(const SystemModel& model,
                           const TrackingProblem& problem,
                           const AdmissibleState& z0, const AdmissibleState& z1,
                           double t_k, double h);

/// Derivatives of L_d and Psi_d with respect to the four slots
/// (q_k, v_k, q_{k+1}, v_{k+1}).
struct SlotDerivativesData {
  Vector l1, l2, l3, l4;   // D_i L_d
  Matrix p1, p2, p3, p4;   // D_i Psi_d, n x (n or r)
};

SlotDerivativesData slot_derivatives(const SystemModel& model,
                                     const TrackingProblem& problem,
                                     const AdmissibleState& z0,
                                     const AdmissibleState& z1, double t_k,
                                     double h, const DelSettings& settings);

struct DiscreteTrajectory {
  TimeGrid grid{0.0, 1.0, 1};
  std::vector<AdmissibleState> nodes;          // N + 1
  std::vector<Vector> multipliers;             // lambda^1 ... lambda^{N-1}
  std::optional<Vector> first_multiplier;      // lambda^0 when enforced
  std::vector<Vector> controls;                // one per interval
  ConvergenceReport report;

  double h() const { return grid.h(); }
  int steps() const { return grid.steps(); }
};

/// Node 0 from the problem, node N from the reference at T (both modes, as
/// the starting value in mayer mode), interior nodes and multipliers from
/// the initial-guess mode.
DiscreteTrajectory initial_trajectory(const SystemModel& model,
                                      const TrackingProblem& problem,
                                      const TimeGrid& grid,
                                      const DelSettings& settings);

/// Gradient of the extended action with respect to the unknowns, grouped by
/// node: [lambda^0] (if enforced), then for k = 1 ... N-1
/// [node equations k (n + r rows); Psi_d(k) (n rows)], then, in mayer
/// mode, the free terminal node equations (n + r rows).
Vector del_residual(const SystemModel& model, const TrackingProblem& problem,
                    const DiscreteTrajectory& traj,
                    const DelSettings& settings);

/// Sum of L_d plus sum of lambda^k . Psi_d(k) plus omega Phi (mayer).
double extended_action(const SystemModel& model,
                       const TrackingProblem& problem,
                       const DiscreteTrajectory& traj,
                       const DelSettings& settings);

/// Unknown vector in the del_residual ordering, and its inverse.
Vector pack_unknowns(const DiscreteTrajectory& traj,
                     const TrackingProblem& problem,
                     const DelSettings& settings);
void unpack_unknowns(const Vector& x, const TrackingProblem& problem,
                     const DelSettings& settings, DiscreteTrajectory& traj);

/// Newton on del_residual with a banded Jacobian. A full step is accepted when
/// it lowers |F|_2; otherwise up to watchdog_steps further undamped steps are
/// tried, and if none gets below the starting |F|_2 the solver backtracks from
/// the starting point. Nonconvergence is reported in traj.report; a singular
/// Jacobian raises RegularityError.
DiscreteTrajectory solve_del(const SystemModel& model,
                             const TrackingProblem& problem,
                             const TimeGrid& grid, const DelSettings& settings);

/// Per-interval u_k = (v1 - v0)/h + Gamma(q_mid)[v_mid, v_mid] + grad V.
std::vector<Vector> recover_controls(const SystemModel& model,
                                     const DiscreteTrajectory& traj);

/// Sum of L_d over all intervals plus omega Phi(node N) in mayer mode.
double discrete_cost(const SystemModel& model, const TrackingProblem& problem,
                     const DiscreteTrajectory& traj);

struct RegularityResult {
  Matrix m;
  double condition = 0.0;
  bool nonsingular = false;
};

/// M = d/d(q1, v1, lambda) of [D_1 L_d + D_1 Psi_d^T lambda;
/// D_2 L_d + D_2 Psi_d^T lambda; Psi_d], the local solvability matrix of
/// the DEL step from (z0, z1). Condition number from the SVD; nonsingular
/// when it is finite and below singular_condition.
RegularityResult regularity_check(const SystemModel& model,
                                  const TrackingProblem& problem,
                                  const AdmissibleState& z0,
                                  const AdmissibleState& z1, double t_k,
                                  double h, const Vector& lambda,
                                  const DelSettings& settings,
                                  double singular_condition = 1e14);

struct DiagnosticRow {
  double t = 0.0;
  AdmissibleState state;
  double running_cost = 0.0;       // C at the node, control of the next interval
  double cumulative_action = 0.0;  // sum of L_d over intervals before the node
  double energy = 0.0;             // 1/2 G(v, v) + V
  double constraint_residual = 0.0;  // |Psi_d| of the next interval, 0 at N
  Vector control;                  // control of the next interval, empty at N
};

std::vector<DiagnosticRow> diagnostics(const SystemModel& model,
                                       const TrackingProblem& problem,
                                       const DiscreteTrajectory& traj);

/// RK4 re-integration of the controlled dynamics from node 0 driven by the
/// piecewise-constant recovered controls, substeps per interval; returns the
/// state at every node time (N + 1 entries).
std::vector<AdmissibleState> reintegrate(const SystemModel& model,
                                         const DiscreteTrajectory& traj,
                                         int substeps);

}  // namespace nhtrack
