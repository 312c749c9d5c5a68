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
#include <random>

#include "nhtrack/checks.hpp"
#include "nhtrack/ode.hpp"
#include "nhtrack/systems.hpp"

namespace nhtrack {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(Particle, Tables) {
  const ParticleModel p;
  EXPECT_EQ(p.dim(), 3);
  EXPECT_EQ(p.corank(), 1);
  EXPECT_TRUE(p.angle_indices().empty());
  const Vector q = vec({0.3, -1.7, 2.0});
  const Matrix rho = p.rho(q);
  EXPECT_EQ(rho(1, 0), 1.0);
  EXPECT_EQ(rho(2, 1), 1.0);
  EXPECT_EQ(rho(0, 1), 1.7);
  EXPECT_EQ(rho(0, 0), 0.0);
  EXPECT_EQ(rho(2, 0), 0.0);
  EXPECT_EQ(rho(1, 1), 0.0);
  const Matrix mu = p.annihilator(q);
  EXPECT_EQ(mu(0, 0), 1.0);
  EXPECT_EQ(mu(0, 1), 0.0);
  EXPECT_EQ(mu(0, 2), -1.7);
  EXPECT_DOUBLE_EQ(p.metric_d(q)(1, 1), 1.0 + 1.7 * 1.7);
  EXPECT_TRUE(p.potential_grad(q).isZero(0.0));
  const Tensor3 g = p.christoffel(q);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const double expected = (a == 1 && b == 0 && c == 1) ? -1.7 / (1 + 1.7 * 1.7) : 0.0;
        EXPECT_DOUBLE_EQ(g(a, b, c), expected);
      }
}

TEST(Particle, ConstraintOnBasis) {
  const ParticleModel p;
  const double y = 1.4, v1 = 0.2, v2 = -0.9;
  EXPECT_NEAR(constraint_residual(p, vec({0, y, 0}), vec({-y * v2, v1, v2}))[0], 0.0, 1e-15);
}

TEST(Sleigh, EtaAndTables) {
  const SleighModel s(sleigh_paper_preset());
  EXPECT_NEAR(s.params().eta(), 0.04950495049504950, 1e-15);
  EXPECT_EQ(s.angle_indices(), std::vector<int>{2});
  EXPECT_TRUE(s.metric_d(vec({0, 0, 1})).isIdentity(0.0));
  const Vector qd = admissibility_velocity(s, {vec({0, 0, M_PI / 2}), vec({0, 1})});
  EXPECT_NEAR(qd[0], 0.0, 1e-15);
  EXPECT_NEAR(qd[1], 1.0, 1e-15);
  EXPECT_NEAR(qd[2], 0.0, 1e-15);
  const Vector rot = admissibility_velocity(s, {vec({0, 0, 0}), vec({1, 0})});
  EXPECT_NEAR(rot[2], 1.0 / std::sqrt(4.04), 1e-15);
  const Tensor3 g = s.christoffel(vec({0, 0, 0}));
  EXPECT_NEAR(g(0, 0, 1) + g(0, 1, 0), s.params().eta(), 1e-15);
  EXPECT_NEAR(g(1, 0, 0), -s.params().eta(), 1e-15);
}

TEST(Sleigh, InvalidParameters) {
  EXPECT_THROW(SleighModel(SleighParams{0.0, 4.0, 0.2}), std::invalid_argument);
  EXPECT_THROW(SleighModel(SleighParams{1.0, -1.0, 0.2}), std::invalid_argument);
  EXPECT_THROW(SleighModel(SleighParams{1.0, 4.0, -0.1}), std::invalid_argument);
}

TEST(Sleigh, UncontrolledFlowConservesSpeed) {
  const SleighModel s(sleigh_paper_preset());
  VectorField f = [&](double, const Vector& y) {
    const auto d = dynamics_rhs(s, {y.head(3), y.tail(2)}, Vector::Zero(2));
    Vector out(5);
    out << d.qdot, d.vdot;
    return out;
  };
  Vector y0(5);
  y0 << 0, 0.5, 0, 1.0 / 3, 1;
  double worst = 0.0;
  for (const Sample& smp : integrate(f, y0, TimeGrid(0, 5, 5000))) {
    worst = std::max(worst, std::abs(smp.y.tail(2).squaredNorm() - 10.0 / 9));
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Presets, Resolve) {
  EXPECT_EQ(resolve_preset("particle")->name(), "particle");
  const auto s = resolve_preset("sleigh:paper-5.1");
  EXPECT_EQ(s->name(), "sleigh:custom{1,4,0.2}");
  const auto c = resolve_preset("sleigh:custom{2, 1.5, 0.1}");
  EXPECT_EQ(c->name(), "sleigh:custom{2,1.5,0.1}");
  EXPECT_THROW(resolve_preset("unicycle"), std::invalid_argument);
  EXPECT_THROW(resolve_preset("sleigh:custom{1,x,2}"), std::invalid_argument);
  EXPECT_THROW(resolve_preset("sleigh:custom{1,-4,0.2}"), std::invalid_argument);
  EXPECT_EQ(preset_names().size(), 3u);
}

class ModelChecks : public ::testing::TestWithParam<std::string> {};

TEST_P(ModelChecks, AllInvariantsPass) {
  const auto model = resolve_preset(GetParam());
  for (const CheckResult& r : run_model_checks(*model)) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.measured << " vs " << r.threshold
                          << " " << r.detail;
  }
}

INSTANTIATE_TEST_SUITE_P(Builtin, ModelChecks,
                         ::testing::Values("particle", "sleigh:paper-5.1",
                                           "sleigh:custom{2,0.5,0.7}"));

}  // namespace
}  // namespace nhtrack
