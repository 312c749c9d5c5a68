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

// The optimal tracking problem: reference trajectory on D, weights, horizon
// and terminal condition, plus the running and terminal costs.

#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "nhtrack/geometry.hpp"

namespace nhtrack {

/// Raised when a tracking problem violates its invariants.
class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TerminalMode {
  mayer,  // terminal cost omega * 1/2 |gamma(T) - gamma_r(T)|^2, free endpoint
  hard,   // gamma(T) = gamma_r(T)
};

std::string to_string(TerminalMode mode);
TerminalMode terminal_mode_from_string(const std::string& name);

/// Reference trajectory t -> gamma_r(t) on D.
class Reference {
 public:
  using Sampler = std::function<AdmissibleState(double)>;

  Reference() = default;
  Reference(Sampler sampler, std::string description, bool time_independent);

  /// gamma_r(t) = (q0 + t q_rate, v0 + t v_rate).
  static Reference affine(Vector q0, Vector q_rate, Vector v0, Vector v_rate);
  static Reference constant(AdmissibleState state);
  /// Uncontrolled RK4 rollout of the model from start over [0, horizon],
  /// stored on a grid of roughly the given step and evaluated between nodes
  /// by cubic Hermite interpolation. Grid nodes, including t = horizon, are
  /// returned exactly.
  static Reference rollout(std::shared_ptr<const SystemModel> model,
                           AdmissibleState start, double horizon, double step);

  AdmissibleState operator()(double t) const { return sampler_(t); }
  bool valid() const { return static_cast<bool>(sampler_); }
  bool time_independent() const { return time_independent_; }
  const std::string& description() const { return description_; }

 private:
  Sampler sampler_;
  std::string description_;
  bool time_independent_ = false;
};

struct TrackingProblem {
  Reference reference;
  double horizon = 1.0;       // T, fixed
  double epsilon = 1.0;       // control regularization
  double omega = 1.0;         // terminal weight (mayer mode)
  double lambda0 = 1.0;       // cost multiplier, normal extremals
  double state_weight = 1.0;  // weight on the tracking-error terms
  TerminalMode terminal = TerminalMode::mayer;
  AdmissibleState initial;

  /// Throws ProblemError when epsilon <= 0 (singular problem), lambda0 <= 0,
  /// omega <= 0, horizon <= 0 or dimensions disagree with the model.
  void validate(const SystemModel& model) const;
};

/// Tracking error (q - q_r, v - v_r).
struct TrackingError {
  Vector dq;
  Vector dv;
};

/// Angles are treated as continuous lifts, so the costs stay smooth; with
/// wrap_angles the angle components are differenced into (-pi, pi] instead.
TrackingError tracking_error(const SystemModel& model,
                             const AdmissibleState& state,
                             const AdmissibleState& ref,
                             bool wrap_angles = false);

/// C = 1/2 (w |q - q_r|^2 + w |v - v_r|^2 + eps |u|^2), w = state_weight.
/// Throws ProblemError when t lies outside [0, T].
double running_cost(const SystemModel& model, const TrackingProblem& problem,
                    double t, const AdmissibleState& state, const Vector& u);

/// Phi = 1/2 |gamma(T) - gamma_r(T)|^2, without the omega weight.
double terminal_cost(const SystemModel& model, const TrackingProblem& problem,
                     const AdmissibleState& state);

/// Euclidean norm of the full terminal tracking error |gamma(T) - gamma_r(T)|,
/// angles wrapped.
double terminal_tracking_error(const SystemModel& model,
                               const TrackingProblem& problem,
                               const AdmissibleState& state);

}  // namespace nhtrack
