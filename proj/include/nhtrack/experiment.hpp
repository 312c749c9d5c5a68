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

// Experiment orchestration for the CLI: runs a configured solve and writes
// trajectory.csv, diagnostics.csv and report.txt; compare re-integrates the
// variational solution and measures the h-halving discrepancy ratio.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nhtrack/config.hpp"

namespace nhtrack {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNotConverged = 2;

struct RunOutcome {
  int exit_code = kExitConverged;
  std::string directory;
  std::string summary;  // one line for the terminal
};

/// Solves the configured problem and writes the artifacts to out_dir (or the
/// config's output directory). Solver failures give kExitNotConverged with
/// the artifacts that could be produced; config problems throw ConfigError.
RunOutcome run_experiment(const ExperimentConfig& config,
                          const std::optional<std::string>& out_dir = {});

struct CompareResult {
  double h = 0.0;
  double discrepancy_coarse = 0.0;  // |RK4(h/100) endpoint - node N| at h
  double discrepancy_fine = 0.0;    // same at h/2
  double ratio = 0.0;
  bool converged = false;
  double variational_cost = 0.0;
  std::optional<double> pmp_cost;   // when the cross check ran and converged
  std::string pmp_message;
  DiscreteTrajectory coarse;
  std::vector<AdmissibleState> reintegrated;  // at the coarse nodes
};

/// Solves the variational problem at h and h/2, re-integrates each with RK4
/// at h/100 driven by the recovered controls and, optionally, solves the same
/// problem by shooting for a cost comparison.
CompareResult compare_solutions(const ExperimentSetup& setup,
                                bool pmp_cross_check);

RunOutcome compare_experiment(const ExperimentConfig& config,
                              const std::optional<std::string>& out_dir = {});

}  // namespace nhtrack
