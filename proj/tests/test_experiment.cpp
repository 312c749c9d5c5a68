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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nhtrack/experiment.hpp"

namespace nhtrack {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nhtrack_test_experiment_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig bundled(const std::string& name) {
  return load_config(std::string(NHTRACK_CONFIG_DIR) + "/" + name);
}

TEST(RunExperiment, ParticleShootingWritesArtifacts) {
  const fs::path dir = scratch("case2");
  const RunOutcome out = run_experiment(bundled("particle-case2.cfg"), dir.string());
  EXPECT_EQ(out.exit_code, kExitConverged) << out.summary;
  for (const char* f : {"trajectory.csv", "diagnostics.csv", "report.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_NE(slurp(dir / "report.txt").find("terminal tracking error"), std::string::npos);
}

TEST(RunExperiment, SleighVariationalIsDeterministic) {
  const fs::path a = scratch("sleigh_a");
  const fs::path b = scratch("sleigh_b");
  const ExperimentConfig c = bundled("sleigh-paper51.cfg");
  const RunOutcome first = run_experiment(c, a.string());
  const RunOutcome second = run_experiment(c, b.string());
  EXPECT_EQ(first.exit_code, kExitConverged) << first.summary;
  EXPECT_EQ(second.exit_code, kExitConverged);
  for (const char* f : {"trajectory.csv", "diagnostics.csv", "report.txt"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "report.txt").find("final node minus reference endpoint (max abs): 0"),
            std::string::npos);
}

TEST(RunExperiment, NonconvergenceStillWritesArtifacts) {
  const fs::path dir = scratch("short");
  ExperimentConfig c = bundled("particle-case2.cfg");
  c.max_iters = 1;
  const RunOutcome out = run_experiment(c, dir.string());
  EXPECT_EQ(out.exit_code, kExitNotConverged);
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
}

TEST(RunExperiment, SingularProblemRejected) {
  ExperimentConfig c = bundled("particle-case2.cfg");
  c.epsilon = 0.0;
  EXPECT_THROW(run_experiment(c, scratch("eps0").string()), ConfigError);
}

TEST(Compare, SleighSecondOrder) {
  const ExperimentSetup s = build_setup(bundled("sleigh-paper51.cfg"));
  const CompareResult r = compare_solutions(s, false);
  ASSERT_TRUE(r.converged);
  EXPECT_GE(r.ratio, 3.0);
  EXPECT_LE(r.ratio, 5.0);
  EXPECT_FALSE(r.pmp_cost.has_value());
}

TEST(Compare, ConstantTrajectoryReintegratesExactly) {
  ExperimentConfig c = bundled("sleigh-paper51.cfg");
  c.initial_v = {0, 0};
  c.reference = ReferenceKind::affine;
  c.reference_q0 = c.initial_q;
  c.reference_q_rate = {0, 0, 0};
  c.reference_v0 = {0, 0};
  c.reference_v_rate = {0, 0};
  const CompareResult r = compare_solutions(build_setup(c), false);
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.discrepancy_coarse, 0.0);
  for (std::size_t k = 0; k < r.reintegrated.size(); ++k) {
    EXPECT_EQ(r.reintegrated[k].q, r.coarse.nodes[k].q);
    EXPECT_EQ(r.reintegrated[k].v, r.coarse.nodes[k].v);
  }
}

TEST(Compare, WritesArtifacts) {
  const fs::path dir = scratch("compare");
  const RunOutcome out = compare_experiment(bundled("sleigh-paper51.cfg"), dir.string());
  EXPECT_EQ(out.exit_code, kExitConverged) << out.summary;
  EXPECT_TRUE(fs::exists(dir / "compare.csv"));
  EXPECT_TRUE(fs::exists(dir / "compare_report.txt"));
}

}  // namespace
}  // namespace nhtrack
