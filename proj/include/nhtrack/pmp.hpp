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

// Indirect method: optimal Hamiltonian, coupled state/costate flow and
// single shooting on the initial costate with a damped Newton iteration.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"
#include "nhtrack/ode.hpp"
#include "nhtrack/tracking.hpp"

namespace nhtrack {

/// Adjoint variables: lambda pairs with q, mu with v.
struct Costate {
  Vector lambda;
  Vector mu;
};

/// The state/costate flow left the finite range.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, double blow_up_time)
      : std::runtime_error(what), blow_up_time_(blow_up_time) {}
  double blow_up_time() const { return blow_up_time_; }

 private:
  double blow_up_time_;
};

/// The shooting Jacobian is numerically singular.
class SingularJacobianError : public std::runtime_error {
 public:
  SingularJacobianError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

struct ShootingSettings {
  double newton_tol = 1e-8;
  int max_iters = 50;
  double fd_step = 1e-6;
  double damping = 0.5;     // backtracking factor
  int max_halvings = 30;
  double inner_step = 1e-3;              // used when inner_grid is unset
  std::optional<TimeGrid> inner_grid;    // state/costate integration grid
  double singular_condition = 1e14;

  /// inner_grid if set, otherwise [0, T] with step close to inner_step.
  TimeGrid grid_for(double horizon) const;
  void validate() const;
};

/// u = -mu / (lambda0 eps). Throws std::invalid_argument for eps <= 0 or
/// lambda0 <= 0.
Vector optimal_control(const Vector& mu, double epsilon, double lambda0);

/// H = lambda0 C(q, v, u) + lambda . rho(q) v + mu . v'(q, v, u).
double hamiltonian(const SystemModel& model, const TrackingProblem& problem,
                   double t, const AdmissibleState& state,
                   const Costate& costate, const Vector& u);

/// H evaluated at the minimizing control.
double optimal_hamiltonian(const SystemModel& model,
                           const TrackingProblem& problem, double t,
                           const AdmissibleState& state,
                           const Costate& costate);

/// dH/du = lambda0 eps u + mu.
Vector hamiltonian_control_gradient(const TrackingProblem& problem,
                                    const Costate& costate, const Vector& u);

struct PmpDerivative {
  Vector qdot;
  Vector vdot;
  Vector lambda_dot;
  Vector mu_dot;
};

/// State equations driven by the optimal control and the adjoint equations
/// -lambda' = dH/dq, -mu' = dH/dv. Gamma derivatives come from the model
/// (central differences with fd_step unless the model is exact).
PmpDerivative pmp_rhs(const SystemModel& model, const TrackingProblem& problem,
                      double t, const AdmissibleState& state,
                      const Costate& costate, double fd_step = 1e-6);

struct PmpSample {
  double t;
  AdmissibleState state;
  Costate costate;
  Vector u;
};

/// Integrates the coupled flow from (problem.initial, alpha) over the grid.
/// Throws DivergedError with the blow-up time on non-finite values.
std::vector<PmpSample> pmp_flow(const SystemModel& model,
                                const TrackingProblem& problem,
                                const Costate& alpha, const TimeGrid& grid,
                                double fd_step = 1e-6);

/// Terminal residual of the flow started at alpha (2n - m entries):
///   mayer: (lambda(T) - omega (q(T) - q_r(T)), mu(T) - omega (v(T) - v_r(T)))
///   hard:  (q(T) - q_r(T), v(T) - v_r(T)), angles wrapped.
Vector shooting_residual(const SystemModel& model,
                         const TrackingProblem& problem, const Costate& alpha,
                         const ShootingSettings& settings);

/// Packs/unpacks alpha as (lambda, mu).
Vector pack(const Costate& c);
Costate unpack_costate(const Vector& x, int n);

struct NewtonRecord {
  int iteration = 0;
  double residual_norm = 0.0;
  double step_scale = 1.0;
  int halvings = 0;
};

struct ConvergenceReport {
  bool converged = false;
  int iterations = 0;
  double final_residual_norm = 0.0;
  std::vector<NewtonRecord> log;
  std::string message;
};

struct ShootingResult {
  Costate alpha;
  std::vector<PmpSample> trajectory;
  ConvergenceReport report;
  double total_cost = 0.0;  // integral of C plus omega Phi in mayer mode
};

/// Damped Newton on shooting_residual with a forward-difference Jacobian.
/// When backtracking cannot reduce the residual a Levenberg step is tried.
/// Nonconvergence is reported, not thrown; a Jacobian with condition number
/// above settings.singular_condition raises SingularJacobianError.
ShootingResult solve_shooting(const SystemModel& model,
                              const TrackingProblem& problem,
                              const Costate& alpha0,
                              const ShootingSettings& settings);

/// Zero initial costate sized for the model.
Costate zero_costate(const SystemModel& model);

/// Total cost J of a sampled trajectory (trapezoidal rule on the samples).
double trajectory_cost(const SystemModel& model, const TrackingProblem& problem,
                       const std::vector<PmpSample>& samples);

/// Abnormal-extremal diagnostic: integrates -lambda' = lambda drho/dq v along
/// the trajectory from a basis of the annihilator at t = 0 and measures how
/// far the best unit combination strays from lambda . rho = 0.
struct AbnormalReport {
  double min_violation = 0.0;  // RMS of rho^T lambda over samples, best unit lambda(0)
  bool admits_nonzero = false;
};

AbnormalReport abnormal_diagnostic(const SystemModel& model,
                                   const std::vector<PmpSample>& trajectory,
                                   double tolerance = 1e-8);

}  // namespace nhtrack
