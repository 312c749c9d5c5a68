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

// Invariant suite for a SystemModel, run by the CLI "check" subcommand and
// by the tests.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"

namespace nhtrack {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst value seen
  double threshold = 0.0;  // pass bound
  std::string detail;
};

struct CheckOptions {
  int samples = 100;
  std::uint64_t seed = 0;
  double coordinate_range = 2.0;  // q, v drawn uniformly from [-range, range]
};

/// Runs every model invariant: annihilator . rho = 0, rank of rho, metric
/// symmetry and definiteness, rho_jac and christoffel_jac against central
/// differences, Gamma against the structure constants, and fourth-order
/// energy drift of the uncontrolled RK4 flow.
std::vector<CheckResult> run_model_checks(const SystemModel& model,
                                          const CheckOptions& options = {});

}  // namespace nhtrack
