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

#include "nhtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace nhtrack {

namespace {

void expect_size(const char* what, Eigen::Index got, int want) {
  if (got != want) {
    std::ostringstream msg;
    msg << what << " has " << got << " entries, model expects " << want;
    throw DimensionError(msg.str());
  }
}

}  // namespace

SystemModel::SystemModel(int dim, int corank, std::vector<int> angle_indices)
    : dim_(dim), corank_(corank), angle_indices_(std::move(angle_indices)) {
  if (dim <= 0 || corank <= 0 || corank >= dim) {
    throw std::invalid_argument("SystemModel: need 0 < corank < dim");
  }
  for (int i : angle_indices_) {
    if (i < 0 || i >= dim) {
      throw std::invalid_argument("SystemModel: angle index out of range");
    }
  }
}

bool SystemModel::is_angle(int i) const {
  return std::find(angle_indices_.begin(), angle_indices_.end(), i) !=
         angle_indices_.end();
}

Vector SystemModel::potential_grad(const Vector& /*q*/) const {
  return Vector::Zero(rank());
}

double SystemModel::potential(const Vector& /*q*/) const { return 0.0; }

std::vector<Tensor3> SystemModel::christoffel_jac(const Vector& q,
                                                  double fd_step) const {
  const int r = rank();
  std::vector<Tensor3> out;
  out.reserve(dim_);
  Vector qp = q;
  Vector qm = q;
  for (int j = 0; j < dim_; ++j) {
    const double step = fd_step * std::max(1.0, std::abs(q[j]));
    qp[j] = q[j] + step;
    qm[j] = q[j] - step;
    const Tensor3 gp = christoffel(qp);
    const Tensor3 gm = christoffel(qm);
    qp[j] = q[j];
    qm[j] = q[j];
    Tensor3 d(r, r, r);
    auto dd = d.data();
    auto pp = gp.data();
    auto mm = gm.data();
    for (std::size_t k = 0; k < dd.size(); ++k) {
      dd[k] = (pp[k] - mm[k]) / (2.0 * step);
    }
    out.push_back(std::move(d));
  }
  return out;
}

Matrix SystemModel::potential_grad_jac(const Vector& q, double fd_step) const {
  Matrix jac(rank(), dim_);
  Vector qp = q;
  Vector qm = q;
  for (int j = 0; j < dim_; ++j) {
    const double step = fd_step * std::max(1.0, std::abs(q[j]));
    qp[j] = q[j] + step;
    qm[j] = q[j] - step;
    jac.col(j) = (potential_grad(qp) - potential_grad(qm)) / (2.0 * step);
    qp[j] = q[j];
    qm[j] = q[j];
  }
  return jac;
}

std::optional<ConnectionData> SystemModel::connection_data(
    const Vector& /*q*/) const {
  return std::nullopt;
}

FunctionModel::FunctionModel(ModelFunctions fns)
    : SystemModel(fns.dim, fns.corank, fns.angle_indices),
      fns_(std::move(fns)) {
  if (!fns_.rho || !fns_.rho_jac || !fns_.christoffel || !fns_.metric_d ||
      !fns_.annihilator) {
    throw std::invalid_argument("FunctionModel: missing required callback");
  }
}

Vector FunctionModel::potential_grad(const Vector& q) const {
  return fns_.potential_grad ? fns_.potential_grad(q)
                             : SystemModel::potential_grad(q);
}

double FunctionModel::potential(const Vector& q) const {
  return fns_.potential ? fns_.potential(q) : SystemModel::potential(q);
}

void check_state(const SystemModel& model, const AdmissibleState& state) {
  expect_size("state.q", state.q.size(), model.dim());
  expect_size("state.v", state.v.size(), model.rank());
}

Vector admissibility_velocity(const SystemModel& model,
                              const AdmissibleState& state) {
  check_state(model, state);
  return model.rho(state.q) * state.v;
}

Vector quadratic_term(const Tensor3& christoffel, const Vector& v) {
  const int r = christoffel.dim(0);
  Vector out = Vector::Zero(r);
  for (int a = 0; a < r; ++a) {
    double acc = 0.0;
    for (int c = 0; c < r; ++c) {
      for (int b = 0; b < r; ++b) {
        acc += christoffel(a, c, b) * v[c] * v[b];
      }
    }
    out[a] = acc;
  }
  return out;
}

StateDerivative dynamics_rhs(const SystemModel& model,
                             const AdmissibleState& state, const Vector& u) {
  check_state(model, state);
  expect_size("u", u.size(), model.rank());
  StateDerivative out;
  out.qdot = model.rho(state.q) * state.v;
  out.vdot = -quadratic_term(model.christoffel(state.q), state.v) -
             model.potential_grad(state.q) + u;
  return out;
}

Vector constraint_residual(const SystemModel& model, const Vector& q,
                           const Vector& qdot) {
  expect_size("q", q.size(), model.dim());
  expect_size("qdot", qdot.size(), model.dim());
  return model.annihilator(q) * qdot;
}

Tensor3 christoffel_from_structure(const Tensor3& c) {
  const int r = c.dim(0);
  if (c.dim(1) != r || c.dim(2) != r) {
    throw DimensionError("structure constants must be an r x r x r array");
  }
  for (int k = 0; k < r; ++k) {
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < r; ++b) {
        if (std::abs(c(k, a, b) + c(k, b, a)) > 1e-12) {
          std::ostringstream msg;
          msg << "structure constants not antisymmetric in lower indices at ("
              << k << ", " << a << ", " << b << ")";
          throw std::invalid_argument(msg.str());
        }
      }
    }
  }
  // Gamma^C_{AB} = 1/2 (C^B_{CA} + C^A_{CB} + C^C_{AB}); tensor slot order is
  // (upper, lower, lower).
  Tensor3 gamma(r, r, r);
  for (int cc = 0; cc < r; ++cc) {
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < r; ++b) {
        gamma(cc, a, b) = 0.5 * (c(b, cc, a) + c(a, cc, b) + c(cc, a, b));
      }
    }
  }
  return gamma;
}

Tensor3 christoffel_from_structure(const ConnectionData& data) {
  const Tensor3& c = data.structure;
  const int r = c.dim(0);
  if (data.metric.rows() != r || data.metric.cols() != r ||
      data.metric_frame_deriv.dim(0) != r) {
    throw DimensionError("connection data dimensions disagree");
  }
  // Validates antisymmetry.
  (void)christoffel_from_structure(c);

  const Matrix& g = data.metric;
  const Tensor3& dg = data.metric_frame_deriv;
  const Matrix g_inv = g.inverse();
  Tensor3 gamma(r, r, r);
  // 2 G(nabla_B e_C, e_D) = e_B G_CD + e_C G_BD - e_D G_BC
  //                         + G(C_BC, e_D) - G(C_BD, e_C) - G(C_CD, e_B)
  for (int b = 0; b < r; ++b) {
    for (int cc = 0; cc < r; ++cc) {
      Vector lowered(r);
      for (int d = 0; d < r; ++d) {
        double acc = dg(b, cc, d) + dg(cc, b, d) - dg(d, b, cc);
        for (int e = 0; e < r; ++e) {
          acc += c(e, b, cc) * g(e, d) - c(e, b, d) * g(e, cc) -
                 c(e, cc, d) * g(e, b);
        }
        lowered[d] = 0.5 * acc;
      }
      const Vector raised = g_inv * lowered;
      for (int a = 0; a < r; ++a) gamma(a, b, cc) = raised[a];
    }
  }
  return gamma;
}

double restricted_lagrangian(const SystemModel& model,
                             const AdmissibleState& state) {
  check_state(model, state);
  return 0.5 * state.v.dot(model.metric_d(state.q) * state.v) -
         model.potential(state.q);
}

double restricted_energy(const SystemModel& model,
                         const AdmissibleState& state) {
  check_state(model, state);
  return 0.5 * state.v.dot(model.metric_d(state.q) * state.v) +
         model.potential(state.q);
}

double wrap_to_pi(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle + std::numbers::pi, two_pi);
  if (w <= 0.0) w += two_pi;
  return w - std::numbers::pi;
}

double wrap_to_two_pi(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w -= two_pi;
  return w;
}

Vector wrapped_configuration(const SystemModel& model, const Vector& q) {
  Vector out = q;
  for (int i : model.angle_indices()) out[i] = wrap_to_two_pi(q[i]);
  return out;
}

Vector configuration_error(const SystemModel& model, const Vector& q,
                           const Vector& q_ref) {
  expect_size("q", q.size(), model.dim());
  expect_size("q_ref", q_ref.size(), model.dim());
  Vector e = q - q_ref;
  for (int i : model.angle_indices()) e[i] = wrap_to_pi(e[i]);
  return e;
}

}  // namespace nhtrack
