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

// Experiment configuration: INI-style text with [system], [problem],
// [solver], [output] and [compare] sections. Numeric values accept simple
// arithmetic (4*pi/3, 1/3, -2.5e-1); vectors are comma separated.

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"
#include "nhtrack/pmp.hpp"
#include "nhtrack/tracking.hpp"
#include "nhtrack/varint.hpp"

namespace nhtrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluates +, -, *, /, parentheses, numbers and the constant pi.
double evaluate_expression(const std::string& text);

enum class SolverMethod { pmp_shooting, variational };
std::string to_string(SolverMethod method);

enum class ReferenceKind { affine, rollout };

struct ExperimentConfig {
  // [system]
  std::string preset = "particle";

  // [problem]
  std::vector<double> initial_q;
  std::vector<double> initial_v;
  ReferenceKind reference = ReferenceKind::affine;
  std::vector<double> reference_q0;      // affine
  std::vector<double> reference_q_rate;  // affine
  std::vector<double> reference_v0;      // affine
  std::vector<double> reference_v_rate;  // affine
  std::vector<double> reference_start_q; // rollout
  std::vector<double> reference_start_v; // rollout
  double reference_step = 1e-3;          // rollout
  double horizon = 1.0;
  double epsilon = 1.0;
  double omega = 1.0;
  double lambda0 = 1.0;
  double state_weight = 1.0;
  TerminalMode terminal = TerminalMode::mayer;

  // [solver]
  SolverMethod method = SolverMethod::pmp_shooting;
  int steps = 50;               // variational grid
  double inner_step = 1e-3;     // shooting integration step
  double newton_tol = 0.0;      // 0 selects the solver default
  int max_iters = 0;            // 0 selects the solver default
  double fd_step = 1e-6;
  double damping = 0.5;
  int max_halvings = 30;
  std::vector<double> initial_costate;  // empty means zero
  InitialGuess initial_guess = InitialGuess::linear_interpolation;
  bool enforce_first_interval = true;
  SlotDerivatives slot_derivatives = SlotDerivatives::automatic;

  // [output]
  std::string directory = "out";
  int precision = 17;
  std::uint64_t seed = 0;

  // [compare]
  bool pmp_cross_check = false;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError for unknown presets, eps <= 0 and inconsistent
  /// dimensions.
  void validate() const;
};

ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config_string(echo_config(c)) == c.
std::string echo_config(const ExperimentConfig& config);

/// Objects the solvers need, built from a validated config.
struct ExperimentSetup {
  std::shared_ptr<const SystemModel> model;
  TrackingProblem problem;
  ShootingSettings shooting;
  DelSettings del;
  TimeGrid grid{0.0, 1.0, 1};
};

ExperimentSetup build_setup(const ExperimentConfig& config);

}  // namespace nhtrack
