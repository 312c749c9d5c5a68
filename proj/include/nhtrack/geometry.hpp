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

// Nonholonomic systems written in an adapted basis of the constraint
// distribution D: configuration q (n entries), quasi-velocities v (n - m
// entries), q' = rho(q) v and v' = -Gamma[v, v] - grad V + u.

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nhtrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an argument does not have the dimension the model expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense rank-3 array, row-major, used for Christoffel symbols and rho
/// derivatives.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2)
      : dims_{d0, d1, d2},
        data_(static_cast<std::size_t>(d0) * d1 * d2, 0.0) {}

  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

  int dim(int axis) const { return dims_[axis]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
  }

  std::array<int, 3> dims_{0, 0, 0};
  std::vector<double> data_;
};

/// A point of D: configuration plus quasi-velocities.
struct AdmissibleState {
  Vector q;
  Vector v;
};

/// Structure constants of the nonholonomic bracket together with the metric
/// data the Koszul formula needs when the basis is not orthonormal.
struct ConnectionData {
  Tensor3 structure;            // (C, A, B) -> C^C_{AB}
  Matrix metric;                // G^D_{AB}
  Tensor3 metric_frame_deriv;   // (D, A, B) -> e_D(G^D_{AB})
};

/// Abstract nonholonomic system in adapted coordinates. Implementations are
/// immutable; every method is a pure function of its arguments.
///
/// Index layouts:
///   rho(q)           n x r, column A holds e_A = rho_A^i d/dq^i
///   rho_jac(q)       (i, A, j) = d rho_A^i / d q^j
///   christoffel(q)   (A, B, C) = Gamma^A_{BC}
///   annihilator(q)   m x n, rows are the one-forms mu^a
class SystemModel {
 public:
  SystemModel(int dim, int corank, std::vector<int> angle_indices);
  virtual ~SystemModel() = default;

  int dim() const { return dim_; }
  int corank() const { return corank_; }
  int rank() const { return dim_ - corank_; }
  const std::vector<int>& angle_indices() const { return angle_indices_; }
  bool is_angle(int i) const;

  virtual std::string name() const = 0;

  virtual Matrix rho(const Vector& q) const = 0;
  virtual Tensor3 rho_jac(const Vector& q) const = 0;
  virtual Tensor3 christoffel(const Vector& q) const = 0;
  virtual Matrix metric_d(const Vector& q) const = 0;
  virtual Matrix annihilator(const Vector& q) const = 0;

  /// (G^D)^{AB} rho_B^i dV/dq^i. Zero unless overridden.
  virtual Vector potential_grad(const Vector& q) const;
  virtual double potential(const Vector& q) const;

  /// d Gamma / d q^j, one tensor per configuration index. The default uses
  /// central differences with the given step.
  virtual std::vector<Tensor3> christoffel_jac(const Vector& q,
                                               double fd_step) const;
  /// r x n matrix d potential_grad^A / d q^i. Central differences by default.
  virtual Matrix potential_grad_jac(const Vector& q, double fd_step) const;

  /// Structure constants and frame metric data, when the model knows them.
  virtual std::optional<ConnectionData> connection_data(const Vector& q) const;

  /// True when christoffel_jac is exact rather than differenced.
  virtual bool has_exact_derivatives() const { return false; }

 private:
  int dim_;
  int corank_;
  std::vector<int> angle_indices_;
};

/// A SystemModel assembled from user callbacks. Derivatives of Gamma and of
/// the potential gradient fall back to finite differences.
struct ModelFunctions {
  std::string name = "custom";
  int dim = 0;
  int corank = 0;
  std::vector<int> angle_indices;
  std::function<Matrix(const Vector&)> rho;
  std::function<Tensor3(const Vector&)> rho_jac;
  std::function<Tensor3(const Vector&)> christoffel;
  std::function<Matrix(const Vector&)> metric_d;
  std::function<Matrix(const Vector&)> annihilator;
  std::function<Vector(const Vector&)> potential_grad;  // optional
  std::function<double(const Vector&)> potential;       // optional
};

class FunctionModel final : public SystemModel {
 public:
  explicit FunctionModel(ModelFunctions fns);

  std::string name() const override { return fns_.name; }
  Matrix rho(const Vector& q) const override { return fns_.rho(q); }
  Tensor3 rho_jac(const Vector& q) const override { return fns_.rho_jac(q); }
  Tensor3 christoffel(const Vector& q) const override {
    return fns_.christoffel(q);
  }
  Matrix metric_d(const Vector& q) const override { return fns_.metric_d(q); }
  Matrix annihilator(const Vector& q) const override {
    return fns_.annihilator(q);
  }
  Vector potential_grad(const Vector& q) const override;
  double potential(const Vector& q) const override;

 private:
  ModelFunctions fns_;
};

/// Time derivative of an admissible state.
struct StateDerivative {
  Vector qdot;
  Vector vdot;
};

void check_state(const SystemModel& model, const AdmissibleState& state);

/// q' = rho(q) v.
Vector admissibility_velocity(const SystemModel& model,
                              const AdmissibleState& state);

/// Gamma^A_{CB} v^C v^B for every A.
Vector quadratic_term(const Tensor3& christoffel, const Vector& v);

/// Controlled nonholonomic equations in quasi-velocities.
StateDerivative dynamics_rhs(const SystemModel& model,
                             const AdmissibleState& state, const Vector& u);

/// annihilator(q) * qdot; zero exactly when qdot lies in D_q.
Vector constraint_residual(const SystemModel& model, const Vector& q,
                           const Vector& qdot);

/// Christoffel symbols of an orthonormal adapted basis from the structure
/// constants: Gamma^C_{AB} = 1/2 (C^B_{CA} + C^A_{CB} + C^C_{AB}).
/// Throws std::invalid_argument unless C^C_{AB} = -C^C_{BA}.
Tensor3 christoffel_from_structure(const Tensor3& structure);

/// Koszul formula for a general (not necessarily orthonormal) adapted basis.
/// Reduces to the single-argument overload when the metric is the identity
/// and its frame derivatives vanish.
Tensor3 christoffel_from_structure(const ConnectionData& data);

/// 1/2 G^D(v, v) - V(q).
double restricted_lagrangian(const SystemModel& model,
                             const AdmissibleState& state);
/// 1/2 G^D(v, v) + V(q).
double restricted_energy(const SystemModel& model,
                         const AdmissibleState& state);

/// Wraps into (-pi, pi].
double wrap_to_pi(double angle);
/// Wraps into [0, 2 pi).
double wrap_to_two_pi(double angle);

/// Copy of q with the model's angle coordinates wrapped to [0, 2 pi).
Vector wrapped_configuration(const SystemModel& model, const Vector& q);

/// q - q_ref with angle components differenced modulo 2 pi into (-pi, pi].
Vector configuration_error(const SystemModel& model, const Vector& q,
                           const Vector& q_ref);

}  // namespace nhtrack
