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

#include "nhtrack/systems.hpp"

#include <charconv>
#include <cmath>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace nhtrack {

// Particle ----------------------------------------------------------------

Matrix ParticleModel::rho(const Vector& q) const {
  Matrix r = Matrix::Zero(3, 2);
  r(1, 0) = 1.0;
  r(0, 1) = -q[1];
  r(2, 1) = 1.0;
  return r;
}

Tensor3 ParticleModel::rho_jac(const Vector& /*q*/) const {
  Tensor3 d(3, 2, 3);
  d(0, 1, 1) = -1.0;  // d rho_2^x / dy
  return d;
}

Tensor3 ParticleModel::christoffel(const Vector& q) const {
  const double y = q[1];
  Tensor3 g(2, 2, 2);
  g(1, 0, 1) = y / (1.0 + y * y);
  return g;
}

Matrix ParticleModel::metric_d(const Vector& q) const {
  Matrix g = Matrix::Identity(2, 2);
  g(1, 1) = 1.0 + q[1] * q[1];
  return g;
}

Matrix ParticleModel::annihilator(const Vector& q) const {
  Matrix mu(1, 3);
  mu << 1.0, 0.0, q[1];
  return mu;
}

std::vector<Tensor3> ParticleModel::christoffel_jac(const Vector& q,
                                                    double /*fd_step*/) const {
  const double y = q[1];
  const double d = 1.0 + y * y;
  std::vector<Tensor3> out(3, Tensor3(2, 2, 2));
  out[1](1, 0, 1) = (1.0 - y * y) / (d * d);
  return out;
}

Matrix ParticleModel::potential_grad_jac(const Vector& /*q*/,
                                         double /*fd_step*/) const {
  return Matrix::Zero(2, 3);
}

std::optional<ConnectionData> ParticleModel::connection_data(
    const Vector& q) const {
  const double y = q[1];
  ConnectionData data;
  data.structure = Tensor3(2, 2, 2);
  // [[Y1, Y2]] = y / (1 + y^2) Y2
  data.structure(1, 0, 1) = y / (1.0 + y * y);
  data.structure(1, 1, 0) = -y / (1.0 + y * y);
  data.metric = metric_d(q);
  data.metric_frame_deriv = Tensor3(2, 2, 2);
  // Y1 = d/dy acting on G_22 = 1 + y^2.
  data.metric_frame_deriv(0, 1, 1) = 2.0 * y;
  return data;
}

// Sleigh ------------------------------------------------------------------

double SleighParams::eta() const {
  return offset * std::sqrt(mass) / (inertia + mass * offset * offset);
}

void SleighParams::validate() const {
  if (!(mass > 0.0) || !(inertia > 0.0) || !(offset >= 0.0) ||
      !(inertia + mass * offset * offset > 0.0) || !std::isfinite(mass) ||
      !std::isfinite(inertia) || !std::isfinite(offset)) {
    std::ostringstream msg;
    msg << "invalid sleigh parameters (m=" << mass << ", J=" << inertia
        << ", a=" << offset << "): need m > 0, J > 0, a >= 0";
    throw std::invalid_argument(msg.str());
  }
}

SleighParams sleigh_paper_preset() { return SleighParams{1.0, 4.0, 0.2}; }

SleighModel::SleighModel(SleighParams params)
    : SystemModel(3, 1, {2}), params_(params) {
  params_.validate();
  eta_ = params_.eta();
  inv_sqrt_inertia_ =
      1.0 / std::sqrt(params_.inertia + params_.mass * params_.offset * params_.offset);
  inv_sqrt_mass_ = 1.0 / std::sqrt(params_.mass);
}

std::string SleighModel::name() const {
  auto shortest = [](double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
  };
  return "sleigh:custom{" + shortest(params_.mass) + "," +
         shortest(params_.inertia) + "," + shortest(params_.offset) + "}";
}

Matrix SleighModel::rho(const Vector& q) const {
  Matrix r = Matrix::Zero(3, 2);
  r(2, 0) = inv_sqrt_inertia_;
  r(0, 1) = std::cos(q[2]) * inv_sqrt_mass_;
  r(1, 1) = std::sin(q[2]) * inv_sqrt_mass_;
  return r;
}

Tensor3 SleighModel::rho_jac(const Vector& q) const {
  Tensor3 d(3, 2, 3);
  d(0, 1, 2) = -std::sin(q[2]) * inv_sqrt_mass_;
  d(1, 1, 2) = std::cos(q[2]) * inv_sqrt_mass_;
  return d;
}

Tensor3 SleighModel::christoffel(const Vector& /*q*/) const {
  // Levi-Civita connection of the orthonormal basis: only the symmetric part
  // enters the dynamics, giving v1' = -eta v1 v2 and v2' = eta v1^2.
  Tensor3 g(2, 2, 2);
  g(0, 0, 1) = eta_;
  g(1, 0, 0) = -eta_;
  return g;
}

Matrix SleighModel::metric_d(const Vector& /*q*/) const {
  return Matrix::Identity(2, 2);
}

Matrix SleighModel::annihilator(const Vector& q) const {
  Matrix mu(1, 3);
  mu << -std::sin(q[2]), std::cos(q[2]), 0.0;
  return mu;
}

std::vector<Tensor3> SleighModel::christoffel_jac(const Vector& /*q*/,
                                                  double /*fd_step*/) const {
  return std::vector<Tensor3>(3, Tensor3(2, 2, 2));
}

Matrix SleighModel::potential_grad_jac(const Vector& /*q*/,
                                       double /*fd_step*/) const {
  return Matrix::Zero(2, 3);
}

std::optional<ConnectionData> SleighModel::connection_data(
    const Vector& /*q*/) const {
  ConnectionData data;
  data.structure = Tensor3(2, 2, 2);
  // [[X1, X2]] = eta X1
  data.structure(0, 0, 1) = eta_;
  data.structure(0, 1, 0) = -eta_;
  data.metric = Matrix::Identity(2, 2);
  data.metric_frame_deriv = Tensor3(2, 2, 2);
  return data;
}

// Presets -----------------------------------------------------------------

std::shared_ptr<const SystemModel> particle_model() {
  return std::make_shared<const ParticleModel>();
}

std::shared_ptr<const SystemModel> sleigh_model(const SleighParams& params) {
  return std::make_shared<const SleighModel>(params);
}

std::shared_ptr<const SystemModel> resolve_preset(const std::string& name) {
  if (name == "particle") return particle_model();
  if (name == "sleigh:paper-5.1") return sleigh_model(sleigh_paper_preset());
  static const std::regex custom(
      R"(sleigh:custom\{\s*([^,}]+)\s*,\s*([^,}]+)\s*,\s*([^,}]+)\s*\})");
  std::smatch m;
  if (std::regex_match(name, m, custom)) {
    SleighParams p;
    try {
      p.mass = std::stod(m[1].str());
      p.inertia = std::stod(m[2].str());
      p.offset = std::stod(m[3].str());
    } catch (const std::exception&) {
      throw std::invalid_argument("unparseable sleigh parameters in '" + name +
                                  "'");
    }
    return sleigh_model(p);
  }
  throw std::invalid_argument("unknown system preset '" + name +
                              "' (known: particle, sleigh:paper-5.1, "
                              "sleigh:custom{m,J,a})");
}

std::vector<std::string> preset_names() {
  return {"particle", "sleigh:paper-5.1", "sleigh:custom{m,J,a}"};
}

}  // namespace nhtrack
