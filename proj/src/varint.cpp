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

#include "nhtrack/varint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <lapacke.h>
#include <Eigen/SVD>

namespace nhtrack {

std::string to_string(InitialGuess mode) {
  return mode == InitialGuess::linear_interpolation ? "linear-interpolation"
                                                    : "reference-samples";
}

InitialGuess initial_guess_from_string(const std::string& name) {
  if (name == "linear-interpolation") return InitialGuess::linear_interpolation;
  if (name == "reference-samples") return InitialGuess::reference_samples;
  throw std::invalid_argument("unknown initial guess mode '" + name +
                              "' (linear-interpolation | reference-samples)");
}

void DelSettings::validate() const {
  if (!(newton_tol > 0.0) || max_iters <= 0 || !(fd_step > 0.0) ||
      !(damping > 0.0 && damping < 1.0) || max_halvings < 0 ||
      watchdog_steps < 0) {
    throw std::invalid_argument("DEL settings must be positive");
  }
}

Vector control_from_acceleration(const SystemModel& model, const Vector& q,
                                 const Vector& v, const Vector& vdot) {
  return vdot + quadratic_term(model.christoffel(q), v) +
         model.potential_grad(q);
}

double ocp_lagrangian(const SystemModel& model, const TrackingProblem& problem,
                      double t, const Vector& q, const Vector& v,
                      const Vector& vdot) {
  if (q.size() != model.dim() || v.size() != model.rank() ||
      vdot.size() != model.rank()) {
    throw DimensionError("ocp_lagrangian: dimensions disagree with the model");
  }
  const Vector u = control_from_acceleration(model, q, v, vdot);
  return problem.lambda0 * running_cost(model, problem, t, {q, v}, u);
}

namespace {

// d/dq^i of Gamma[v, v] + grad V, as an r x n matrix.
Matrix quadratic_jac(const SystemModel& model, const Vector& q, const Vector& v,
                     double fd_step) {
  const int n = model.dim();
  const int r = model.rank();
  const std::vector<Tensor3> dgamma = model.christoffel_jac(q, fd_step);
  Matrix out = model.potential_grad_jac(q, fd_step);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < r; ++a) {
      double acc = 0.0;
      for (int c = 0; c < r; ++c) {
        for (int b = 0; b < r; ++b) acc += dgamma[i](a, c, b) * v[c] * v[b];
      }
      out(a, i) += acc;
    }
  }
  return out;
}

// d/dv^D of Gamma^A[v, v], as an r x r matrix (A, D).
Matrix quadratic_vjac(const Tensor3& gamma, const Vector& v) {
  const int r = static_cast<int>(v.size());
  Matrix out = Matrix::Zero(r, r);
  for (int a = 0; a < r; ++a) {
    for (int d = 0; d < r; ++d) {
      for (int b = 0; b < r; ++b) {
        out(a, d) += (gamma(a, d, b) + gamma(a, b, d)) * v[b];
      }
    }
  }
  return out;
}

// K(i, j) = sum_A d rho^i_A / d q^j w^A.
Matrix rho_contract(const Tensor3& drho, const Vector& w) {
  const int n = drho.dim(0);
  Matrix k = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < drho.dim(1); ++a) k(i, j) += drho(i, a, j) * w[a];
    }
  }
  return k;
}

}  // namespace

LagrangianGradient lagrangian_gradient(const SystemModel& model,
                                       const TrackingProblem& problem,
                                       double t, const Vector& q,
                                       const Vector& v, const Vector& vdot,
                                       double fd_step) {
  const TrackingError e = tracking_error(model, {q, v}, problem.reference(t));
  const Tensor3 gamma = model.christoffel(q);
  const Vector u = vdot + quadratic_term(gamma, v) + model.potential_grad(q);
  const double l0 = problem.lambda0;
  const double w = problem.state_weight;
  const double eps = problem.epsilon;
  LagrangianGradient g;
  g.dvdot = l0 * eps * u;
  g.dv = l0 * (w * e.dv + eps * quadratic_vjac(gamma, v).transpose() * u);
  g.dq = l0 * (w * e.dq +
               eps * quadratic_jac(model, q, v, fd_step).transpose() * u);
  return g;
}

Vector optimality_residual_at(const SystemModel& model,
                              const TrackingProblem& problem, double t,
                              const Vector& q, const Vector& v,
                              const Vector& lambda, const Vector& qdot,
                              const Vector& vdot, const Vector& vddot,
                              const Vector& lambda_dot, double fd_step) {
  const int n = model.dim();
  const int r = model.rank();
  const LagrangianGradient g =
      lagrangian_gradient(model, problem, t, q, v, vdot, fd_step);
  const Matrix rho = model.rho(q);
  const Matrix k = rho_contract(model.rho_jac(q), v);
  const Tensor3 gamma = model.christoffel(q);

  // d/dt of u = vdot + Gamma[v, v] + grad V along the curve.
  Vector udot = vddot + quadratic_jac(model, q, v, fd_step) * qdot;
  for (int a = 0; a < r; ++a) {
    for (int c = 0; c < r; ++c) {
      for (int b = 0; b < r; ++b) {
        udot[a] += gamma(a, c, b) * (vdot[c] * v[b] + v[c] * vdot[b]);
      }
    }
  }

  Vector out(2 * n + r);
  out.segment(0, n) = lambda_dot + g.dq + k.transpose() * lambda;
  out.segment(n, n) = qdot - rho * v;
  out.segment(2 * n, r) = problem.lambda0 * problem.epsilon * udot - g.dv -
                          rho.transpose() * lambda;
  return out;
}

std::vector<Vector> continuous_optimality_residual(
    const SystemModel& model, const TrackingProblem& problem,
    const std::vector<ContinuousSample>& samples, double fd_step) {
  if (samples.size() < 3) {
    throw std::invalid_argument(
        "continuous_optimality_residual needs at least 3 samples");
  }
  const double h = samples[1].t - samples[0].t;
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (std::abs(samples[k].t - samples[k - 1].t - h) > 1e-9 * std::abs(h) ||
        !(h > 0.0)) {
      throw std::invalid_argument("samples must be uniformly spaced in time");
    }
  }
  std::vector<Vector> out;
  out.reserve(samples.size() - 2);
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
    const ContinuousSample& a = samples[k - 1];
    const ContinuousSample& b = samples[k];
    const ContinuousSample& c = samples[k + 1];
    out.push_back(optimality_residual_at(
        model, problem, b.t, b.q, b.v, b.lambda, (c.q - a.q) / (2 * h),
        (c.v - a.v) / (2 * h), (c.v - 2 * b.v + a.v) / (h * h),
        (c.lambda - a.lambda) / (2 * h), fd_step));
  }
  return out;
}

Vector discrete_constraint(const SystemModel& model, const AdmissibleState& z0,
                           const AdmissibleState& z1, double h,
                           bool difference_quotient_velocity) {
  check_state(model, z0);
  check_state(model, z1);
  const Vector qm = 0.5 * (z0.q + z1.q);
  const Vector vel = difference_quotient_velocity ? Vector((z1.v - z0.v) / h)
                                                  : Vector(0.5 * (z0.v + z1.v));
  return (z1.q - z0.q) / h - model.rho(qm) * vel;
}

double discrete_lagrangian(const SystemModel& model,
                           const TrackingProblem& problem,
                           const AdmissibleState& z0, const AdmissibleState& z1,
                           double t_k, double h) {
  return h * ocp_lagrangian(model, problem, t_k + 0.5 * h,
                            0.5 * (z0.q + z1.q), 0.5 * (z0.v + z1.v),
                            (z1.v - z0.v) / h);
}

namespace {

bool use_analytic(const SystemModel& model, const DelSettings& settings) {
  switch (settings.slot_derivatives) {
    case SlotDerivatives::analytic:
      return true;
    case SlotDerivatives::finite_difference:
      return false;
    case SlotDerivatives::automatic:
      break;
  }
  return model.has_exact_derivatives();
}

SlotDerivativesData slot_derivatives_fd(const SystemModel& model,
                                        const TrackingProblem& problem,
                                        const AdmissibleState& z0,
                                        const AdmissibleState& z1, double t_k,
                                        double h, const DelSettings& settings) {
  const int n = model.dim();
  const int r = model.rank();
  SlotDerivativesData out;
  Vector* ls[4] = {&out.l1, &out.l2, &out.l3, &out.l4};
  Matrix* ps[4] = {&out.p1, &out.p2, &out.p3, &out.p4};
  for (int slot = 0; slot < 4; ++slot) {
    const int size = (slot % 2 == 0) ? n : r;
    ls[slot]->resize(size);
    ps[slot]->resize(n, size);
    for (int j = 0; j < size; ++j) {
      AdmissibleState a0 = z0, a1 = z1, b0 = z0, b1 = z1;
      Vector& pa = slot == 0 ? a0.q : slot == 1 ? a0.v : slot == 2 ? a1.q : a1.v;
      Vector& pb = slot == 0 ? b0.q : slot == 1 ? b0.v : slot == 2 ? b1.q : b1.v;
      const double step = settings.fd_step * std::max(1.0, std::abs(pa[j]));
      pa[j] += step;
      pb[j] -= step;
      (*ls[slot])[j] = (discrete_lagrangian(model, problem, a0, a1, t_k, h) -
                        discrete_lagrangian(model, problem, b0, b1, t_k, h)) /
                       (2 * step);
      ps[slot]->col(j) =
          (discrete_constraint(model, a0, a1, h,
                               settings.difference_quotient_velocity) -
           discrete_constraint(model, b0, b1, h,
                               settings.difference_quotient_velocity)) /
          (2 * step);
    }
  }
  return out;
}

}  // namespace

SlotDerivativesData slot_derivatives(const SystemModel& model,
                                     const TrackingProblem& problem,
                                     const AdmissibleState& z0,
                                     const AdmissibleState& z1, double t_k,
                                     double h, const DelSettings& settings) {
  if (!use_analytic(model, settings)) {
    return slot_derivatives_fd(model, problem, z0, z1, t_k, h, settings);
  }
  const int n = model.dim();
  const Vector qm = 0.5 * (z0.q + z1.q);
  const Vector vm = 0.5 * (z0.v + z1.v);
  const Vector acc = (z1.v - z0.v) / h;
  const LagrangianGradient g = lagrangian_gradient(
      model, problem, t_k + 0.5 * h, qm, vm, acc, settings.fd_step);

  SlotDerivativesData out;
  out.l1 = 0.5 * h * g.dq;
  out.l3 = out.l1;
  out.l2 = 0.5 * h * g.dv - g.dvdot;
  out.l4 = 0.5 * h * g.dv + g.dvdot;

  const Matrix rho = model.rho(qm);
  const Vector vel = settings.difference_quotient_velocity ? acc : vm;
  const Matrix k = rho_contract(model.rho_jac(qm), vel);
  const Matrix id = Matrix::Identity(n, n);
  out.p1 = -id / h - 0.5 * k;
  out.p3 = id / h - 0.5 * k;
  if (settings.difference_quotient_velocity) {
    out.p2 = rho / h;
    out.p4 = -rho / h;
  } else {
    out.p2 = -0.5 * rho;
    out.p4 = -0.5 * rho;
  }
  return out;
}

namespace {

// Unknowns and equations grouped in blocks 0 ... N:
//   block 0: lambda^0 (enforced first interval only)
//   block k: (q_k, v_k, lambda^k), k = 1 ... N-1
//   block N: (q_N, v_N) (mayer only)
struct Layout {
  int n;
  int r;
  int steps;
  bool first;
  bool free_end;
  std::vector<int> offsets;

  Layout(const SystemModel& model, int steps_, const TrackingProblem& problem,
         const DelSettings& settings)
      : n(model.dim()),
        r(model.rank()),
        steps(steps_),
        first(settings.enforce_first_interval),
        free_end(problem.terminal == TerminalMode::mayer) {
    offsets.resize(steps + 2);
    offsets[0] = 0;
    for (int b = 0; b <= steps; ++b) offsets[b + 1] = offsets[b] + size(b);
  }

  int s() const { return n + r; }
  int size(int b) const {
    if (b == 0) return first ? n : 0;
    if (b == steps) return free_end ? s() : 0;
    return s() + n;
  }
  int offset(int b) const { return offsets[b]; }
  int total() const { return offsets[steps + 1]; }
  int max_size() const {
    int m = 0;
    for (int b = 0; b <= steps; ++b) m = std::max(m, size(b));
    return m;
  }
  int bandwidth() const {
    int w = 0;
    for (int b = 0; b < steps; ++b) w = std::max(w, size(b) + size(b + 1));
    return std::max(0, w - 1);
  }
};

void check_trajectory(const SystemModel& model, const DiscreteTrajectory& traj,
                      const DelSettings& settings) {
  const int steps = traj.steps();
  if (steps < 2) throw std::invalid_argument("DEL needs at least 2 steps");
  if (static_cast<int>(traj.nodes.size()) != steps + 1 ||
      static_cast<int>(traj.multipliers.size()) != steps - 1) {
    throw DimensionError("trajectory node or multiplier count disagrees with "
                         "the grid");
  }
  for (const AdmissibleState& z : traj.nodes) check_state(model, z);
  for (const Vector& l : traj.multipliers) {
    if (l.size() != model.dim()) throw DimensionError("multiplier size");
  }
  if (settings.enforce_first_interval &&
      (!traj.first_multiplier || traj.first_multiplier->size() != model.dim())) {
    throw DimensionError("enforced first interval needs lambda^0");
  }
}

Vector lambda_at(const DiscreteTrajectory& traj, int k, int n) {
  if (k == 0) {
    return traj.first_multiplier ? *traj.first_multiplier : Vector::Zero(n);
  }
  return traj.multipliers[k - 1];
}

}  // namespace

DiscreteTrajectory initial_trajectory(const SystemModel& model,
                                      const TrackingProblem& problem,
                                      const TimeGrid& grid,
                                      const DelSettings& settings) {
  problem.validate(model);
  const int steps = grid.steps();
  DiscreteTrajectory traj;
  traj.grid = grid;
  traj.nodes.resize(steps + 1);
  traj.nodes[0] = problem.initial;
  traj.nodes[steps] = problem.reference(problem.horizon);
  for (int k = 1; k < steps; ++k) {
    if (settings.initial_guess == InitialGuess::reference_samples) {
      traj.nodes[k] = problem.reference(grid.time(k));
    } else {
      const double s = static_cast<double>(k) / steps;
      traj.nodes[k] = {
          traj.nodes[0].q + s * (traj.nodes[steps].q - traj.nodes[0].q),
          traj.nodes[0].v + s * (traj.nodes[steps].v - traj.nodes[0].v)};
    }
  }
  traj.multipliers.assign(std::max(0, steps - 1), Vector::Zero(model.dim()));
  if (settings.enforce_first_interval) {
    traj.first_multiplier = Vector::Zero(model.dim());
  }
  return traj;
}

Vector del_residual(const SystemModel& model, const TrackingProblem& problem,
                    const DiscreteTrajectory& traj,
                    const DelSettings& settings) {
  check_trajectory(model, traj, settings);
  const Layout layout(model, traj.steps(), problem, settings);
  const int n = layout.n;
  const int r = layout.r;
  const int steps = traj.steps();
  const double h = traj.h();

  std::vector<SlotDerivativesData> sd(steps);
  for (int k = 0; k < steps; ++k) {
    sd[k] = slot_derivatives(model, problem, traj.nodes[k], traj.nodes[k + 1],
                             traj.grid.time(k), h, settings);
  }
  auto psi = [&](int k) {
    return discrete_constraint(model, traj.nodes[k], traj.nodes[k + 1], h,
                               settings.difference_quotient_velocity);
  };

  Vector out(layout.total());
  if (layout.first) out.segment(layout.offset(0), n) = psi(0);
  for (int k = 1; k < steps; ++k) {
    const Vector lk = lambda_at(traj, k, n);
    const Vector lp = lambda_at(traj, k - 1, n);
    const int o = layout.offset(k);
    out.segment(o, n) = sd[k].l1 + sd[k - 1].l3 + sd[k].p1.transpose() * lk +
                        sd[k - 1].p3.transpose() * lp;
    out.segment(o + n, r) = sd[k].l2 + sd[k - 1].l4 +
                            sd[k].p2.transpose() * lk +
                            sd[k - 1].p4.transpose() * lp;
    out.segment(o + n + r, n) = psi(k);
  }
  if (layout.free_end) {
    const Vector lp = lambda_at(traj, steps - 1, n);
    const TrackingError e = tracking_error(model, traj.nodes[steps],
                                           problem.reference(problem.horizon));
    const int o = layout.offset(steps);
    out.segment(o, n) = sd[steps - 1].l3 + sd[steps - 1].p3.transpose() * lp +
                        problem.omega * e.dq;
    out.segment(o + n, r) = sd[steps - 1].l4 +
                            sd[steps - 1].p4.transpose() * lp +
                            problem.omega * e.dv;
  }
  if (!out.allFinite()) {
    throw DivergedError("non-finite DEL residual", traj.grid.tf());
  }
  return out;
}

double extended_action(const SystemModel& model,
                       const TrackingProblem& problem,
                       const DiscreteTrajectory& traj,
                       const DelSettings& settings) {
  check_trajectory(model, traj, settings);
  const int steps = traj.steps();
  const double h = traj.h();
  double total = 0.0;
  for (int k = 0; k < steps; ++k) {
    total += discrete_lagrangian(model, problem, traj.nodes[k],
                                 traj.nodes[k + 1], traj.grid.time(k), h);
    if (k == 0 && !settings.enforce_first_interval) continue;
    total += lambda_at(traj, k, model.dim())
                 .dot(discrete_constraint(model, traj.nodes[k],
                                          traj.nodes[k + 1], h,
                                          settings.difference_quotient_velocity));
  }
  if (problem.terminal == TerminalMode::mayer) {
    total += problem.omega * terminal_cost(model, problem, traj.nodes[steps]);
  }
  return total;
}

Vector pack_unknowns(const DiscreteTrajectory& traj,
                     const TrackingProblem& problem,
                     const DelSettings& settings) {
  const int n = static_cast<int>(traj.nodes.front().q.size());
  const int r = static_cast<int>(traj.nodes.front().v.size());
  const int steps = traj.steps();
  std::vector<double> x;
  if (settings.enforce_first_interval) {
    const Vector l0 = traj.first_multiplier.value_or(Vector::Zero(n));
    x.insert(x.end(), l0.data(), l0.data() + n);
  }
  for (int k = 1; k < steps; ++k) {
    const AdmissibleState& z = traj.nodes[k];
    x.insert(x.end(), z.q.data(), z.q.data() + n);
    x.insert(x.end(), z.v.data(), z.v.data() + r);
    x.insert(x.end(), traj.multipliers[k - 1].data(),
             traj.multipliers[k - 1].data() + n);
  }
  if (problem.terminal == TerminalMode::mayer) {
    const AdmissibleState& z = traj.nodes[steps];
    x.insert(x.end(), z.q.data(), z.q.data() + n);
    x.insert(x.end(), z.v.data(), z.v.data() + r);
  }
  return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void unpack_unknowns(const Vector& x, const TrackingProblem& problem,
                     const DelSettings& settings, DiscreteTrajectory& traj) {
  const int n = static_cast<int>(traj.nodes.front().q.size());
  const int r = static_cast<int>(traj.nodes.front().v.size());
  const int steps = traj.steps();
  Eigen::Index o = 0;
  if (settings.enforce_first_interval) {
    traj.first_multiplier = x.segment(o, n);
    o += n;
  }
  for (int k = 1; k < steps; ++k) {
    traj.nodes[k].q = x.segment(o, n);
    traj.nodes[k].v = x.segment(o + n, r);
    traj.multipliers[k - 1] = x.segment(o + n + r, n);
    o += n + r + n;
  }
  if (problem.terminal == TerminalMode::mayer) {
    traj.nodes[steps].q = x.segment(o, n);
    traj.nodes[steps].v = x.segment(o + n, r);
    o += n + r;
  }
  if (o != x.size()) throw DimensionError("unknown vector size disagrees");
}

std::vector<Vector> recover_controls(const SystemModel& model,
                                     const DiscreteTrajectory& traj) {
  std::vector<Vector> out;
  const double h = traj.h();
  for (int k = 0; k < traj.steps(); ++k) {
    const AdmissibleState& a = traj.nodes[k];
    const AdmissibleState& b = traj.nodes[k + 1];
    out.push_back(control_from_acceleration(model, 0.5 * (a.q + b.q),
                                            0.5 * (a.v + b.v), (b.v - a.v) / h));
  }
  return out;
}

double discrete_cost(const SystemModel& model, const TrackingProblem& problem,
                     const DiscreteTrajectory& traj) {
  double total = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    total += discrete_lagrangian(model, problem, traj.nodes[k],
                                 traj.nodes[k + 1], traj.grid.time(k), traj.h());
  }
  if (problem.terminal == TerminalMode::mayer) {
    total += problem.omega *
             terminal_cost(model, problem, traj.nodes[traj.steps()]);
  }
  return total;
}

namespace {

// Column-major LAPACK band storage for a square matrix with kl = ku = w.
class BandMatrix {
 public:
  BandMatrix(int size, int w)
      : size_(size), w_(w), ldab_(3 * w + 1),
        ab_(static_cast<std::size_t>(ldab_) * size, 0.0) {}

  void set(int i, int j, double value) {
    ab_[static_cast<std::size_t>(2 * w_ + i - j) +
        static_cast<std::size_t>(j) * ldab_] = value;
  }
  double norm1() const {
    double best = 0.0;
    for (int j = 0; j < size_; ++j) {
      double s = 0.0;
      for (int row = w_; row < ldab_; ++row) {
        s += std::abs(ab_[static_cast<std::size_t>(row) +
                          static_cast<std::size_t>(j) * ldab_]);
      }
      best = std::max(best, s);
    }
    return best;
  }

  // Solves A x = b in place; returns the reciprocal condition estimate.
  double solve(Vector& b) {
    const double anorm = norm1();
    std::vector<lapack_int> ipiv(size_);
    lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, size_, size_, w_, w_,
                                     ab_.data(), ldab_, ipiv.data());
    if (info > 0) {
      throw RegularityError(
          "DEL Jacobian is exactly singular; check the local solvability "
          "matrix M with regularity_check (is epsilon > 0?)",
          0.0);
    }
    double rcond = 0.0;
    LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', size_, w_, w_, ab_.data(), ldab_,
                   ipiv.data(), anorm, &rcond);
    if (rcond < std::numeric_limits<double>::epsilon()) {
      std::ostringstream msg;
      msg << "DEL Jacobian is numerically singular (rcond " << rcond
          << "); check the local solvability matrix M with regularity_check";
      throw RegularityError(msg.str(), rcond);
    }
    LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', size_, w_, w_, 1, ab_.data(), ldab_,
                   ipiv.data(), b.data(), size_);
    return rcond;
  }

 private:
  int size_;
  int w_;
  int ldab_;
  std::vector<double> ab_;
};

}  // namespace

DiscreteTrajectory solve_del(const SystemModel& model,
                             const TrackingProblem& problem,
                             const TimeGrid& grid, const DelSettings& settings) {
  settings.validate();
  problem.validate(model);
  if (grid.steps() < 2) throw std::invalid_argument("DEL needs at least 2 steps");
  if (std::abs(grid.tf() - grid.t0() - problem.horizon) >
      1e-12 * problem.horizon) {
    throw ProblemError("DEL grid must span [0, T]");
  }
  DiscreteTrajectory traj = initial_trajectory(model, problem, grid, settings);
  const Layout layout(model, grid.steps(), problem, settings);
  const int total = layout.total();
  const int w = layout.bandwidth();

  auto residual_at = [&](const Vector& x) -> std::optional<Vector> {
    DiscreteTrajectory trial = traj;
    unpack_unknowns(x, problem, settings, trial);
    try {
      return del_residual(model, problem, trial, settings);
    } catch (const DivergedError&) {
      return std::nullopt;
    }
  };

  ConvergenceReport& report = traj.report;
  Vector x = pack_unknowns(traj, problem, settings);
  std::optional<Vector> fx = residual_at(x);
  if (!fx) throw DivergedError("non-finite DEL residual at the initial guess", 0);
  double norm = fx->lpNorm<Eigen::Infinity>();
  report.log.push_back({0, norm, 0.0, 0});

  // Newton direction from a central-difference Jacobian with three block
  // colours: a block only couples to its neighbours, so blocks b, b + 3, ...
  // can be perturbed together.
  auto direction = [&](const Vector& at, const Vector& f_at) {
    BandMatrix jac(total, w);
    for (int colour = 0; colour < 3; ++colour) {
      for (int j = 0; j < layout.max_size(); ++j) {
        Vector xp = at;
        Vector xm = at;
        std::vector<std::pair<int, double>> cols;
        for (int b = colour; b <= layout.steps; b += 3) {
          if (j >= layout.size(b)) continue;
          const int col = layout.offset(b) + j;
          const double step = settings.fd_step * std::max(1.0, std::abs(at[col]));
          xp[col] += step;
          xm[col] -= step;
          cols.emplace_back(b, step);
        }
        if (cols.empty()) continue;
        const std::optional<Vector> fp = residual_at(xp);
        const std::optional<Vector> fm = residual_at(xm);
        if (!fp || !fm) {
          throw DivergedError("non-finite DEL residual while differencing", 0);
        }
        for (const auto& [b, step] : cols) {
          const int col = layout.offset(b) + j;
          const int lo = layout.offset(std::max(0, b - 1));
          const int hi = layout.offset(std::min(layout.steps, b + 1) + 1);
          for (int row = lo; row < hi; ++row) {
            jac.set(row, col, ((*fp)[row] - (*fm)[row]) / (2 * step));
          }
        }
      }
    }
    Vector dx = -f_at;
    jac.solve(dx);
    return dx;
  };

  int iter = 0;
  while (iter < settings.max_iters && norm > settings.newton_tol) {
    ++iter;
    const Vector dx = direction(x, *fx);
    const double norm2 = fx->norm();

    // Full step, then a short watchdog run of undamped steps that may raise
    // |F| temporarily; the first iterate below |F(x)| is accepted.
    std::optional<Vector> fy = residual_at(x + dx);
    Vector y = x + dx;
    bool accepted = fy && fy->norm() < norm2;
    int extra = 0;
    while (!accepted && fy && extra < settings.watchdog_steps &&
           iter + extra < settings.max_iters) {
      ++extra;
      try {
        y += direction(y, *fy);
      } catch (const std::exception&) {
        break;
      }
      fy = residual_at(y);
      accepted = fy && fy->norm() < norm2;
    }
    if (accepted) {
      iter += extra;
      x = y;
      fx = fy;
      norm = fx->lpNorm<Eigen::Infinity>();
      report.log.push_back({iter, norm, 1.0, 0});
      report.iterations = iter;
      continue;
    }

    double scale = settings.damping;
    int halvings = 1;
    for (; halvings <= settings.max_halvings; ++halvings) {
      const Vector trial = x + scale * dx;
      const std::optional<Vector> ft = residual_at(trial);
      if (ft && ft->norm() < norm2) {
        x = trial;
        fx = ft;
        norm = ft->lpNorm<Eigen::Infinity>();
        accepted = true;
        break;
      }
      scale *= settings.damping;
    }
    report.log.push_back({iter, norm, accepted ? scale : 0.0, halvings});
    report.iterations = iter;
    if (!accepted) {
      report.message = "line search failed to reduce the residual";
      break;
    }
  }
  unpack_unknowns(x, problem, settings, traj);
  report.final_residual_norm = norm;
  report.converged = norm <= settings.newton_tol;
  if (report.converged) {
    report.message = "converged";
  } else if (report.message.empty()) {
    report.message = "maximum Newton iterations reached";
  }
  traj.controls = recover_controls(model, traj);
  return traj;
}

RegularityResult regularity_check(const SystemModel& model,
                                  const TrackingProblem& problem,
                                  const AdmissibleState& z0,
                                  const AdmissibleState& z1, double t_k,
                                  double h, const Vector& lambda,
                                  const DelSettings& settings,
                                  double singular_condition) {
  const int n = model.dim();
  const int r = model.rank();
  const int s = n + r;
  auto local = [&](const AdmissibleState& b) {
    const SlotDerivativesData d =
        slot_derivatives(model, problem, z0, b, t_k, h, settings);
    Vector out(s + n);
    out << d.l1 + d.p1.transpose() * lambda, d.l2 + d.p2.transpose() * lambda,
        discrete_constraint(model, z0, b, h,
                            settings.difference_quotient_velocity);
    return out;
  };
  RegularityResult res;
  res.m = Matrix::Zero(s + n, s + n);
  for (int j = 0; j < s; ++j) {
    AdmissibleState a = z1, b = z1;
    double& pa = j < n ? a.q[j] : a.v[j - n];
    double& pb = j < n ? b.q[j] : b.v[j - n];
    const double step = settings.fd_step * std::max(1.0, std::abs(pa));
    pa += step;
    pb -= step;
    res.m.col(j) = (local(a) - local(b)) / (2 * step);
  }
  const SlotDerivativesData d =
      slot_derivatives(model, problem, z0, z1, t_k, h, settings);
  res.m.block(0, s, n, n) = d.p1.transpose();
  res.m.block(n, s, r, n) = d.p2.transpose();
  Eigen::JacobiSVD<Matrix> svd(res.m);
  const auto& sv = svd.singularValues();
  res.condition = sv[sv.size() - 1] > 0.0
                      ? sv[0] / sv[sv.size() - 1]
                      : std::numeric_limits<double>::infinity();
  res.nonsingular = std::isfinite(res.condition) &&
                    res.condition < singular_condition;
  return res;
}

std::vector<DiagnosticRow> diagnostics(const SystemModel& model,
                                       const TrackingProblem& problem,
                                       const DiscreteTrajectory& traj) {
  const int steps = traj.steps();
  const double h = traj.h();
  const std::vector<Vector> controls =
      traj.controls.size() == static_cast<std::size_t>(steps)
          ? traj.controls
          : recover_controls(model, traj);
  std::vector<DiagnosticRow> rows;
  double action = 0.0;
  for (int k = 0; k <= steps; ++k) {
    DiagnosticRow row;
    row.t = traj.grid.time(k);
    row.state = traj.nodes[k];
    row.cumulative_action = action;
    row.energy = restricted_energy(model, row.state);
    const Vector& u = controls[std::min(k, steps - 1)];
    row.running_cost =
        problem.lambda0 * running_cost(model, problem, row.t, row.state, u);
    if (k < steps) {
      row.control = u;
      row.constraint_residual =
          discrete_constraint(model, traj.nodes[k], traj.nodes[k + 1], h)
              .lpNorm<Eigen::Infinity>();
      action += discrete_lagrangian(model, problem, traj.nodes[k],
                                    traj.nodes[k + 1], row.t, h);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AdmissibleState> reintegrate(const SystemModel& model,
                                         const DiscreteTrajectory& traj,
                                         int substeps) {
  if (substeps <= 0) throw std::invalid_argument("substeps must be positive");
  const std::vector<Vector> controls =
      traj.controls.size() == static_cast<std::size_t>(traj.steps())
          ? traj.controls
          : recover_controls(model, traj);
  const int n = model.dim();
  const int r = model.rank();
  Vector y(n + r);
  y << traj.nodes[0].q, traj.nodes[0].v;
  const double h = traj.h() / substeps;
  std::vector<AdmissibleState> out{traj.nodes[0]};
  for (int k = 0; k < traj.steps(); ++k) {
    const Vector& u = controls[k];
    VectorField f = [&](double, const Vector& z) {
      const StateDerivative d =
          dynamics_rhs(model, {z.head(n), z.tail(r)}, u);
      Vector out(n + r);
      out << d.qdot, d.vdot;
      return out;
    };
    for (int j = 0; j < substeps; ++j) {
      y = rk4_step(f, traj.grid.time(k) + j * h, y, h);
    }
    out.push_back({y.head(n), y.tail(r)});
  }
  return out;
}

}  // namespace nhtrack
