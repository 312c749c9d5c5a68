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

#include "nhtrack/pmp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

namespace nhtrack {

TimeGrid ShootingSettings::grid_for(double horizon) const {
  if (inner_grid) return *inner_grid;
  const int steps =
      std::max(1, static_cast<int>(std::lround(horizon / inner_step)));
  return TimeGrid(0.0, horizon, steps);
}

void ShootingSettings::validate() const {
  if (!(newton_tol > 0.0) || max_iters <= 0 || !(fd_step > 0.0) ||
      !(damping > 0.0 && damping < 1.0) || max_halvings < 0 ||
      !(inner_step > 0.0)) {
    throw std::invalid_argument("shooting settings must be positive");
  }
}

Vector optimal_control(const Vector& mu, double epsilon, double lambda0) {
  if (!(epsilon > 0.0) || !(lambda0 > 0.0)) {
    throw std::invalid_argument(
        "optimal_control needs epsilon > 0 and lambda0 > 0");
  }
  return -mu / (lambda0 * epsilon);
}

double hamiltonian(const SystemModel& model, const TrackingProblem& problem,
                   double t, const AdmissibleState& state,
                   const Costate& costate, const Vector& u) {
  const StateDerivative d = dynamics_rhs(model, state, u);
  return problem.lambda0 * running_cost(model, problem, t, state, u) +
         costate.lambda.dot(d.qdot) + costate.mu.dot(d.vdot);
}

double optimal_hamiltonian(const SystemModel& model,
                           const TrackingProblem& problem, double t,
                           const AdmissibleState& state,
                           const Costate& costate) {
  return hamiltonian(
      model, problem, t, state, costate,
      optimal_control(costate.mu, problem.epsilon, problem.lambda0));
}

Vector hamiltonian_control_gradient(const TrackingProblem& problem,
                                    const Costate& costate, const Vector& u) {
  return problem.lambda0 * problem.epsilon * u + costate.mu;
}

PmpDerivative pmp_rhs(const SystemModel& model, const TrackingProblem& problem,
                      double t, const AdmissibleState& state,
                      const Costate& costate, double fd_step) {
  check_state(model, state);
  const int n = model.dim();
  const int r = model.rank();
  if (costate.lambda.size() != n || costate.mu.size() != r) {
    throw DimensionError("costate dimensions disagree with the model");
  }
  const Vector u = optimal_control(costate.mu, problem.epsilon, problem.lambda0);
  const StateDerivative sd = dynamics_rhs(model, state, u);
  const TrackingError e = tracking_error(model, state, problem.reference(t));
  const double w = problem.lambda0 * problem.state_weight;

  const Matrix rho = model.rho(state.q);
  const Tensor3 drho = model.rho_jac(state.q);
  const Tensor3 gamma = model.christoffel(state.q);
  const std::vector<Tensor3> dgamma = model.christoffel_jac(state.q, fd_step);
  const Matrix dpot = model.potential_grad_jac(state.q, fd_step);
  const Vector& v = state.v;
  const Vector& lam = costate.lambda;
  const Vector& mu = costate.mu;

  PmpDerivative out;
  out.qdot = sd.qdot;
  out.vdot = sd.vdot;
  out.lambda_dot.resize(n);
  for (int i = 0; i < n; ++i) {
    double acc = w * e.dq[i];
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < r; ++a) acc += lam[j] * drho(j, a, i) * v[a];
    }
    // mu_A d v'^A / d q^i
    for (int a = 0; a < r; ++a) {
      double dvdot = -dpot(a, i);
      for (int c = 0; c < r; ++c) {
        for (int b = 0; b < r; ++b) dvdot -= dgamma[i](a, c, b) * v[c] * v[b];
      }
      acc += mu[a] * dvdot;
    }
    out.lambda_dot[i] = -acc;
  }
  out.mu_dot.resize(r);
  const Vector rho_t_lambda = rho.transpose() * lam;
  for (int a = 0; a < r; ++a) {
    double acc = w * e.dv[a] + rho_t_lambda[a];
    // mu_B d v'^B / d v^A = -mu_B (Gamma^B_{AC} + Gamma^B_{CA}) v^C
    for (int b = 0; b < r; ++b) {
      for (int c = 0; c < r; ++c) {
        acc -= mu[b] * (gamma(b, a, c) + gamma(b, c, a)) * v[c];
      }
    }
    out.mu_dot[a] = -acc;
  }
  if (!out.lambda_dot.allFinite() || !out.mu_dot.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite costate derivative at t = " << t;
    throw DivergedError(msg.str(), t);
  }
  return out;
}

Vector pack(const Costate& c) {
  Vector x(c.lambda.size() + c.mu.size());
  x << c.lambda, c.mu;
  return x;
}

Costate unpack_costate(const Vector& x, int n) {
  return {x.head(n), x.tail(x.size() - n)};
}

Costate zero_costate(const SystemModel& model) {
  return {Vector::Zero(model.dim()), Vector::Zero(model.rank())};
}

namespace {

struct FlowLayout {
  int n;
  int r;

  Vector pack_all(const AdmissibleState& s, const Costate& c) const {
    Vector y(2 * n + 2 * r);
    y << s.q, s.v, c.lambda, c.mu;
    return y;
  }
  AdmissibleState state(const Vector& y) const {
    return {y.segment(0, n), y.segment(n, r)};
  }
  Costate costate(const Vector& y) const {
    return {y.segment(n + r, n), y.segment(2 * n + r, r)};
  }
};

}  // namespace

std::vector<PmpSample> pmp_flow(const SystemModel& model,
                                const TrackingProblem& problem,
                                const Costate& alpha, const TimeGrid& grid,
                                double fd_step) {
  problem.validate(model);
  const FlowLayout layout{model.dim(), model.rank()};
  if (alpha.lambda.size() != layout.n || alpha.mu.size() != layout.r) {
    throw DimensionError("initial costate dimensions disagree with the model");
  }
  VectorField f = [&](double t, const Vector& y) {
    const PmpDerivative d = pmp_rhs(model, problem, t, layout.state(y),
                                    layout.costate(y), fd_step);
    Vector out(y.size());
    out << d.qdot, d.vdot, d.lambda_dot, d.mu_dot;
    return out;
  };
  std::vector<PmpSample> out;
  out.reserve(grid.steps() + 1);
  Vector y = layout.pack_all(problem.initial, alpha);
  const double h = grid.h();
  for (int k = 0; k <= grid.steps(); ++k) {
    const double t = grid.time(k);
    const Costate c = layout.costate(y);
    out.push_back({t, layout.state(y), c,
                   optimal_control(c.mu, problem.epsilon, problem.lambda0)});
    if (k == grid.steps()) break;
    try {
      y = rk4_step(f, t, y, h);
    } catch (const NonFiniteError& e) {
      throw DivergedError(std::string("state/costate flow diverged: ") + e.what(),
                          e.time());
    }
  }
  return out;
}

namespace {

Vector terminal_residual(const SystemModel& model,
                         const TrackingProblem& problem, const PmpSample& end) {
  const AdmissibleState ref = problem.reference(problem.horizon);
  const TrackingError e = tracking_error(
      model, end.state, ref, problem.terminal == TerminalMode::hard);
  const int n = model.dim();
  const int r = model.rank();
  Vector res(n + r);
  if (problem.terminal == TerminalMode::mayer) {
    // Transversality for omega * 1/2 |gamma(T) - gamma_r(T)|^2.
    res << end.costate.lambda - problem.omega * e.dq,
        end.costate.mu - problem.omega * e.dv;
  } else {
    res << e.dq, e.dv;
  }
  return res;
}

}  // namespace

Vector shooting_residual(const SystemModel& model,
                         const TrackingProblem& problem, const Costate& alpha,
                         const ShootingSettings& settings) {
  const TimeGrid grid = settings.grid_for(problem.horizon);
  const std::vector<PmpSample> flow =
      pmp_flow(model, problem, alpha, grid, settings.fd_step);
  return terminal_residual(model, problem, flow.back());
}

double trajectory_cost(const SystemModel& model, const TrackingProblem& problem,
                       const std::vector<PmpSample>& samples) {
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double c0 =
        running_cost(model, problem, samples[k].t, samples[k].state, samples[k].u);
    const double c1 = running_cost(model, problem, samples[k + 1].t,
                                   samples[k + 1].state, samples[k + 1].u);
    integral += 0.5 * (samples[k + 1].t - samples[k].t) * (c0 + c1);
  }
  if (problem.terminal == TerminalMode::mayer && !samples.empty()) {
    integral += problem.omega * terminal_cost(model, problem, samples.back().state);
  }
  return integral;
}

ShootingResult solve_shooting(const SystemModel& model,
                              const TrackingProblem& problem,
                              const Costate& alpha0,
                              const ShootingSettings& settings) {
  settings.validate();
  problem.validate(model);
  const int n = model.dim();
  const TimeGrid grid = settings.grid_for(problem.horizon);

  auto residual_at = [&](const Vector& x) -> std::optional<Vector> {
    try {
      const auto flow =
          pmp_flow(model, problem, unpack_costate(x, n), grid, settings.fd_step);
      Vector res = terminal_residual(model, problem, flow.back());
      if (!res.allFinite()) return std::nullopt;
      return res;
    } catch (const DivergedError&) {
      return std::nullopt;
    }
  };

  ShootingResult result;
  ConvergenceReport& report = result.report;
  Vector x = pack(alpha0);
  std::optional<Vector> fx = residual_at(x);
  if (!fx) {
    // Let the caller see where the initial guess blows up.
    (void)pmp_flow(model, problem, alpha0, grid, settings.fd_step);
    throw DivergedError("initial costate guess diverged", 0.0);
  }
  double norm = fx->norm();
  report.log.push_back({0, norm, 0.0, 0});

  for (int iter = 1; iter <= settings.max_iters && norm > settings.newton_tol;
       ++iter) {
    const Eigen::Index dim = x.size();
    Matrix jac(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double step = settings.fd_step * std::max(1.0, std::abs(x[j]));
      Vector xp = x;
      xp[j] += step;
      const std::optional<Vector> fp = residual_at(xp);
      if (!fp) {
        report.message = "flow diverged while differencing the Jacobian";
        report.iterations = iter;
        report.final_residual_norm = norm;
        result.alpha = unpack_costate(x, n);
        return result;
      }
      jac.col(j) = (*fp - *fx) / step;
    }
    Eigen::JacobiSVD<Matrix> svd(jac);
    const auto& sv = svd.singularValues();
    const double cond = sv[sv.size() - 1] > 0.0
                            ? sv[0] / sv[sv.size() - 1]
                            : std::numeric_limits<double>::infinity();
    if (!(cond <= settings.singular_condition)) {
      std::ostringstream msg;
      msg << "shooting Jacobian is singular (condition estimate " << cond
          << "); try a larger epsilon or rescale omega";
      throw SingularJacobianError(msg.str(), cond);
    }
    const Vector dx = jac.colPivHouseholderQr().solve(-*fx);

    double scale = 1.0;
    int halvings = 0;
    bool accepted = false;
    for (; halvings <= settings.max_halvings; ++halvings) {
      const Vector trial = x + scale * dx;
      const std::optional<Vector> ft = residual_at(trial);
      if (ft && ft->norm() < (1.0 - 1e-4 * scale) * norm) {
        x = trial;
        fx = ft;
        norm = ft->norm();
        accepted = true;
        break;
      }
      scale *= settings.damping;
    }
    if (!accepted) {
      // Levenberg fallback when the Newton direction stalls.
      const Matrix jtj = jac.transpose() * jac;
      const Vector grad = jac.transpose() * *fx;
      double nu = 1e-4 * jtj.diagonal().maxCoeff();
      for (int tries = 0; tries < 16 && !accepted; ++tries, nu *= 10.0) {
        const Matrix reg = jtj + nu * Matrix::Identity(dim, dim);
        const Vector trial = x - reg.ldlt().solve(grad);
        const std::optional<Vector> ft = residual_at(trial);
        if (ft && ft->norm() < norm) {
          x = trial;
          fx = ft;
          norm = ft->norm();
          accepted = true;
          scale = 0.0;
        }
      }
    }
    report.log.push_back({iter, norm, accepted ? scale : 0.0, halvings});
    report.iterations = iter;
    if (!accepted) {
      report.message = "line search failed to reduce the residual";
      break;
    }
  }

  report.final_residual_norm = norm;
  report.converged = norm <= settings.newton_tol;
  if (report.converged) {
    report.message = "converged";
  } else if (report.message.empty()) {
    report.message = "maximum Newton iterations reached";
  }
  result.alpha = unpack_costate(x, n);
  result.trajectory =
      pmp_flow(model, problem, result.alpha, grid, settings.fd_step);
  result.total_cost = trajectory_cost(model, problem, result.trajectory);
  return result;
}

AbnormalReport abnormal_diagnostic(const SystemModel& model,
                                   const std::vector<PmpSample>& trajectory,
                                   double tolerance) {
  AbnormalReport report;
  if (trajectory.empty()) return report;
  const int n = model.dim();
  const int r = model.rank();

  auto coupling = [&](const PmpSample& s) {
    // lambda' = -K lambda with K_ij = drho^j_A/dq^i v^A
    const Tensor3 drho = model.rho_jac(s.state.q);
    Matrix k = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int a = 0; a < r; ++a) k(i, j) += drho(j, a, i) * s.state.v[a];
      }
    }
    return k;
  };

  // Orthonormal basis of the annihilator at t = 0.
  const Matrix basis =
      model.annihilator(trajectory.front().state.q).transpose().householderQr()
          .householderQ() * Matrix::Identity(n, model.corank());

  Matrix fundamental = Matrix::Identity(n, n);
  Matrix stacked(static_cast<Eigen::Index>(trajectory.size()) * r,
                 model.corank());
  Matrix k_prev = coupling(trajectory.front());
  for (std::size_t idx = 0; idx < trajectory.size(); ++idx) {
    if (idx > 0) {
      const double h = trajectory[idx].t - trajectory[idx - 1].t;
      const Matrix k_next = coupling(trajectory[idx]);
      // Heun step for the linear flow.
      const Matrix pred = fundamental - h * k_prev * fundamental;
      fundamental =
          fundamental - 0.5 * h * (k_prev * fundamental + k_next * pred);
      k_prev = k_next;
    }
    stacked.block(static_cast<Eigen::Index>(idx) * r, 0, r, model.corank()) =
        model.rho(trajectory[idx].state.q).transpose() * fundamental * basis;
  }
  Eigen::JacobiSVD<Matrix> svd(stacked);
  const double smallest = svd.singularValues().minCoeff();
  report.min_violation =
      smallest / std::sqrt(static_cast<double>(trajectory.size()));
  report.admits_nonzero = report.min_violation <= tolerance;
  return report;
}

}  // namespace nhtrack
