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

#include <cmath>

#include "nhtrack/systems.hpp"
#include "nhtrack/tracking.hpp"

namespace nhtrack {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TrackingProblem particle_problem(double epsilon) {
  TrackingProblem p;
  p.reference = Reference::affine(vec({1, 0, 1}), vec({0, 0, 1}), vec({0, 1}), vec({0, 0}));
  p.horizon = 4.0;
  p.epsilon = epsilon;
  p.initial = {vec({0.5, 0.2, 0.7}), vec({0.5, 0.4})};
  return p;
}

TEST(RunningCost, ZeroOnReference) {
  const ParticleModel m;
  const TrackingProblem p = particle_problem(7);
  EXPECT_EQ(running_cost(m, p, 1.5, p.reference(1.5), Vector::Zero(2)), 0.0);
}

TEST(RunningCost, Arithmetic) {
  const ParticleModel m;
  const TrackingProblem p = particle_problem(9);
  const AdmissibleState ref = p.reference(2.0);
  const AdmissibleState s{ref.q + vec({0, 2, 0}), ref.v + vec({1, 0})};
  EXPECT_DOUBLE_EQ(running_cost(m, p, 2.0, s, vec({1, 1})), 11.5);
}

TEST(RunningCost, ControlTermQuadratic) {
  const ParticleModel m;
  const TrackingProblem p = particle_problem(9);
  const AdmissibleState s{vec({0.1, 0.2, 0.3}), vec({0.4, 0.5})};
  const Vector u = vec({0.3, -0.8});
  const double base = running_cost(m, p, 1.0, s, Vector::Zero(2));
  const double c1 = running_cost(m, p, 1.0, s, u) - base;
  const double c2 = running_cost(m, p, 1.0, s, 2 * u) - base;
  EXPECT_NEAR(c2, 4 * c1, 1e-13);
}

TEST(RunningCost, OutsideHorizonRejected) {
  const ParticleModel m;
  const TrackingProblem p = particle_problem(9);
  EXPECT_THROW(running_cost(m, p, 4.5, p.initial, Vector::Zero(2)), ProblemError);
  EXPECT_THROW(running_cost(m, p, -0.1, p.initial, Vector::Zero(2)), ProblemError);
}

TEST(Problem, Validation) {
  const ParticleModel m;
  TrackingProblem p = particle_problem(0.0);
  try {
    p.validate(m);
    FAIL();
  } catch (const ProblemError& e) {
    EXPECT_NE(std::string(e.what()).find("singular optimal control problem"),
              std::string::npos);
  }
  p.epsilon = 1.0;
  EXPECT_NO_THROW(p.validate(m));
  p.lambda0 = 0.0;
  EXPECT_THROW(p.validate(m), ProblemError);
  p.lambda0 = 1.0;
  p.initial.v = vec({1, 2, 3});
  EXPECT_THROW(p.validate(m), ProblemError);
}

TEST(TrackingError, AnglesOnlyWrappedOnRequest) {
  const SleighModel s(sleigh_paper_preset());
  const AdmissibleState a{vec({0, 0, 3.0}), vec({0, 0})};
  const AdmissibleState b{vec({0, 0, -3.0}), vec({0, 0})};
  EXPECT_DOUBLE_EQ(tracking_error(s, a, b).dq[2], 6.0);
  EXPECT_NEAR(tracking_error(s, a, b, true).dq[2], 6.0 - 2 * M_PI, 1e-14);
}

TEST(TerminalCost, FullStateHalfSquare) {
  const ParticleModel m;
  const TrackingProblem p = particle_problem(7);
  const AdmissibleState ref = p.reference(4.0);
  const AdmissibleState s{ref.q + vec({1, 0, 2}), ref.v + vec({0, 2})};
  EXPECT_DOUBLE_EQ(terminal_cost(m, p, s), 4.5);
  EXPECT_DOUBLE_EQ(terminal_tracking_error(m, p, s), 3.0);
}

TEST(Reference, AffineAndConstant) {
  const Reference r = Reference::affine(vec({1, 0, 1}), vec({0, 0, 1}), vec({0, 1}), vec({0, 0}));
  EXPECT_FALSE(r.time_independent());
  EXPECT_DOUBLE_EQ(r(2.5).q[2], 3.5);
  const Reference c = Reference::constant({vec({1, 2, 3}), vec({0, 0})});
  EXPECT_TRUE(c.time_independent());
  EXPECT_EQ(c(7.0).q, vec({1, 2, 3}));
}

TEST(Reference, RolloutMatchesNodesAndConservesSpeed) {
  auto model = resolve_preset("sleigh:paper-5.1");
  const Reference r = Reference::rollout(model, {vec({0, 0.5, 0}), vec({1.0 / 3, 1})}, 5.0, 1e-3);
  EXPECT_EQ(r(0.0).q, vec({0, 0.5, 0}));
  for (double t : {0.0, 0.05, 1.2345, 4.9999, 5.0}) {
    EXPECT_NEAR(r(t).v.squaredNorm(), 10.0 / 9, 1e-8) << t;
  }
  EXPECT_THROW(r(5.1), ProblemError);
}

TEST(TerminalMode, Names) {
  EXPECT_EQ(to_string(TerminalMode::mayer), "mayer");
  EXPECT_EQ(terminal_mode_from_string("hard"), TerminalMode::hard);
  EXPECT_THROW(terminal_mode_from_string("soft"), ProblemError);
}

}  // namespace
}  // namespace nhtrack
