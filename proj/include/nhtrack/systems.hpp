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

// Built-in benchmark systems: the nonholonomic particle in R^3 and the
// Chaplygin sleigh on SE(2), both written in their adapted bases.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"

namespace nhtrack {

/// Nonholonomic particle, q = (x, y, z), constraint x' + y z' = 0, basis
/// Y1 = d/dy, Y2 = d/dz - y d/dx.
class ParticleModel final : public SystemModel {
 public:
  ParticleModel() : SystemModel(3, 1, {}) {}

  std::string name() const override { return "particle"; }
  Matrix rho(const Vector& q) const override;
  Tensor3 rho_jac(const Vector& q) const override;
  Tensor3 christoffel(const Vector& q) const override;
  Matrix metric_d(const Vector& q) const override;
  Matrix annihilator(const Vector& q) const override;
  std::vector<Tensor3> christoffel_jac(const Vector& q,
                                       double fd_step) const override;
  Matrix potential_grad_jac(const Vector& q, double fd_step) const override;
  std::optional<ConnectionData> connection_data(const Vector& q) const override;
  bool has_exact_derivatives() const override { return true; }
};

struct SleighParams {
  double mass = 1.0;     // kg
  double inertia = 4.0;  // kg m^2, about the center of mass
  double offset = 0.2;   // m, center of mass to blade contact

  /// a sqrt(m) / (J + m a^2).
  double eta() const;
  void validate() const;
};

/// Parameters used for the published sleigh tracking run.
SleighParams sleigh_paper_preset();

/// Chaplygin sleigh, q = (x1, x2, theta), orthonormal basis
/// X1 = d/dtheta / sqrt(J + m a^2), X2 = (cos theta d/dx1 + sin theta d/dx2) / sqrt(m).
class SleighModel final : public SystemModel {
 public:
  explicit SleighModel(SleighParams params);

  const SleighParams& params() const { return params_; }

  std::string name() const override;
  Matrix rho(const Vector& q) const override;
  Tensor3 rho_jac(const Vector& q) const override;
  Tensor3 christoffel(const Vector& q) const override;
  Matrix metric_d(const Vector& q) const override;
  Matrix annihilator(const Vector& q) const override;
  std::vector<Tensor3> christoffel_jac(const Vector& q,
                                       double fd_step) const override;
  Matrix potential_grad_jac(const Vector& q, double fd_step) const override;
  std::optional<ConnectionData> connection_data(const Vector& q) const override;
  bool has_exact_derivatives() const override { return true; }

 private:
  SleighParams params_;
  double eta_;
  double inv_sqrt_inertia_;
  double inv_sqrt_mass_;
};

std::shared_ptr<const SystemModel> particle_model();
std::shared_ptr<const SystemModel> sleigh_model(const SleighParams& params);

/// Resolves "particle", "sleigh:paper-5.1" or "sleigh:custom{m,J,a}".
/// Throws std::invalid_argument for unknown names or bad parameters.
std::shared_ptr<const SystemModel> resolve_preset(const std::string& name);

/// Names accepted by resolve_preset (custom form shown as a template).
std::vector<std::string> preset_names();

}  // namespace nhtrack
