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

#include "nhtrack/geometry.hpp"
#include "nhtrack/systems.hpp"

namespace nhtrack {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(AdmissibilityVelocity, ZeroVelocity) {
  const ParticleModel p;
  EXPECT_TRUE(admissibility_velocity(p, {vec({0, 0, 0}), vec({0, 0})}).isZero(0.0));
}

TEST(AdmissibilityVelocity, ParticleTable) {
  const ParticleModel p;
  for (double x : {-3.0, 0.0, 5.0}) {
    const Vector qd = admissibility_velocity(p, {vec({x, 2, -x}), vec({1, 3})});
    EXPECT_DOUBLE_EQ(qd[0], -6.0);
    EXPECT_DOUBLE_EQ(qd[1], 1.0);
    EXPECT_DOUBLE_EQ(qd[2], 3.0);
  }
}

TEST(AdmissibilityVelocity, SleighAtZeroHeading) {
  const SleighModel s(sleigh_paper_preset());
  const Vector qd = admissibility_velocity(s, {vec({0, 0, 0}), vec({0, 1})});
  EXPECT_NEAR(qd[0], 1.0, 1e-15);
  EXPECT_NEAR(qd[1], 0.0, 1e-15);
  EXPECT_NEAR(qd[2], 0.0, 1e-15);
}

TEST(AdmissibilityVelocity, DimensionMismatchNamesField) {
  const ParticleModel p;
  try {
    admissibility_velocity(p, {vec({0, 0, 0}), vec({0, 0, 0})});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("v"), std::string::npos);
  }
  EXPECT_THROW(admissibility_velocity(p, {vec({0, 0}), vec({0, 0})}),
               DimensionError);
}

TEST(DynamicsRhs, ParticleFirstComponentIsFree) {
  const ParticleModel p;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-3, 3);
  for (int i = 0; i < 20; ++i) {
    const auto out = dynamics_rhs(p, {vec({d(rng), d(rng), d(rng)}), vec({d(rng), d(rng)})},
                                  Vector::Zero(2));
    EXPECT_EQ(out.vdot[0], 0.0);
  }
}

TEST(DynamicsRhs, ParticleCoupling) {
  const ParticleModel p;
  const auto out = dynamics_rhs(p, {vec({0, 1, 0}), vec({2, 3})}, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(out.vdot[1], -3.0);
  const auto forced = dynamics_rhs(p, {vec({0, 1, 0}), vec({2, 3})}, vec({0.5, 1}));
  EXPECT_DOUBLE_EQ(forced.vdot[0], 0.5);
  EXPECT_DOUBLE_EQ(forced.vdot[1], -2.0);
}

TEST(DynamicsRhs, SleighPureRotation) {
  const SleighModel s(sleigh_paper_preset());
  const auto out = dynamics_rhs(s, {vec({0, 0, 0}), vec({1, 0})}, Vector::Zero(2));
  EXPECT_NEAR(out.vdot[0], 0.0, 1e-15);
  EXPECT_NEAR(out.vdot[1], 0.2 / 4.04, 1e-15);
}

TEST(DynamicsRhs, ControlDimensionChecked) {
  const ParticleModel p;
  EXPECT_THROW(dynamics_rhs(p, {vec({0, 0, 0}), vec({0, 0})}, Vector::Zero(3)),
               DimensionError);
}

TEST(ConstraintResidual, Examples) {
  const ParticleModel p;
  const SleighModel s(sleigh_paper_preset());
  EXPECT_TRUE(constraint_residual(p, vec({1, 2, 3}), Vector::Zero(3)).isZero(0.0));
  EXPECT_TRUE(constraint_residual(s, vec({1, 2, 3}), Vector::Zero(3)).isZero(0.0));
  const double y = 0.7, b = -1.3, c = 2.1;
  EXPECT_NEAR(constraint_residual(p, vec({0, y, 0}), vec({-y * c, b, c}))[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(constraint_residual(p, vec({0, 1, 0}), vec({1, 0, 0}))[0], 1.0);
}

TEST(ChristoffelFromStructure, ZeroStructure) {
  const Tensor3 g = christoffel_from_structure(Tensor3(3, 3, 3));
  for (double x : g.data()) EXPECT_EQ(x, 0.0);
}

TEST(ChristoffelFromStructure, RandomAntisymmetricMatchesElementwise) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1, 1);
  const int r = 4;
  Tensor3 c(r, r, r);
  for (int k = 0; k < r; ++k)
    for (int a = 0; a < r; ++a)
      for (int b = a + 1; b < r; ++b) {
        c(k, a, b) = d(rng);
        c(k, b, a) = -c(k, a, b);
      }
  const Tensor3 g = christoffel_from_structure(c);
  for (int cc = 0; cc < r; ++cc)
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) {
        const double expected = 0.5 * (c(b, cc, a) + c(a, cc, b) + c(cc, a, b));
        EXPECT_DOUBLE_EQ(g(cc, a, b), expected);
      }
}

TEST(ChristoffelFromStructure, RejectsNonAntisymmetric) {
  Tensor3 c(2, 2, 2);
  c(0, 0, 1) = 1.0;
  c(0, 1, 0) = 1.0;
  EXPECT_THROW(christoffel_from_structure(c), std::invalid_argument);
}

TEST(ChristoffelFromStructure, ParticleViaMetricData) {
  const ParticleModel p;
  for (double y : {-2.0, -0.3, 0.0, 0.5, 1.0, 3.0}) {
    const Vector q = vec({0.1, y, -0.4});
    const Tensor3 g = christoffel_from_structure(*p.connection_data(q));
    const Tensor3 expected = p.christoffel(q);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          EXPECT_NEAR(g(a, b, c), expected(a, b, c), 1e-14) << a << b << c;
    EXPECT_NEAR(g(1, 0, 1), y / (1 + y * y), 1e-14);
  }
}

TEST(ChristoffelFromStructure, SleighOrthonormalFormula) {
  const SleighModel s(sleigh_paper_preset());
  const Vector q = vec({0, 0, 0.3});
  const Tensor3 printed = christoffel_from_structure(s.connection_data(q)->structure);
  const Tensor3 koszul = christoffel_from_structure(*s.connection_data(q));
  const Tensor3 stored = s.christoffel(q);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        EXPECT_NEAR(printed(a, b, c), stored(a, b, c), 1e-15);
        EXPECT_NEAR(koszul(a, b, c), stored(a, b, c), 1e-15);
      }
}

TEST(Wrap, IntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_to_pi(M_PI), M_PI);
  EXPECT_DOUBLE_EQ(wrap_to_pi(-M_PI), M_PI);
  EXPECT_NEAR(wrap_to_pi(3 * M_PI / 2), -M_PI / 2, 1e-15);
  EXPECT_NEAR(wrap_to_two_pi(-M_PI / 2), 3 * M_PI / 2, 1e-15);
  const SleighModel s(sleigh_paper_preset());
  const Vector e = configuration_error(s, vec({1, 2, 0.1}), vec({0, 0, 2 * M_PI}));
  EXPECT_NEAR(e[2], 0.1, 1e-14);
  EXPECT_DOUBLE_EQ(e[0], 1.0);
}

TEST(RestrictedEnergy, ParticleValue) {
  const ParticleModel p;
  EXPECT_DOUBLE_EQ(restricted_lagrangian(p, {vec({0, 1, 0}), vec({1, 1})}), 1.5);
  EXPECT_DOUBLE_EQ(restricted_energy(p, {vec({0, 1, 0}), vec({1, 1})}), 1.5);
  EXPECT_TRUE(p.metric_d(vec({0, 0, 0})).isIdentity(0.0));
}

TEST(FunctionModel, WrapsCallables) {
  // Planar point restricted to the x direction, V = x^2 / 2.
  ModelFunctions f;
  f.name = "rail";
  f.dim = 2;
  f.corank = 1;
  f.rho = [](const Vector&) { return Matrix(Matrix::Identity(2, 1)); };
  f.rho_jac = [](const Vector&) { return Tensor3(2, 1, 2); };
  f.christoffel = [](const Vector&) { return Tensor3(1, 1, 1); };
  f.metric_d = [](const Vector&) { return Matrix(Matrix::Identity(1, 1)); };
  f.annihilator = [](const Vector&) {
    Matrix m(1, 2);
    m << 0, 1;
    return m;
  };
  f.potential_grad = [](const Vector& q) { return Vector(q.head(1)); };
  f.potential = [](const Vector& q) { return 0.5 * q[0] * q[0]; };
  const FunctionModel m(f);
  EXPECT_EQ(m.name(), "rail");
  const auto out = dynamics_rhs(m, {vec({2, 5}), vec({3})}, Vector::Zero(1));
  EXPECT_DOUBLE_EQ(out.qdot[0], 3.0);
  EXPECT_DOUBLE_EQ(out.qdot[1], 0.0);
  EXPECT_DOUBLE_EQ(out.vdot[0], -2.0);
  EXPECT_DOUBLE_EQ(restricted_energy(m, {vec({2, 5}), vec({1})}), 2.5);
  EXPECT_DOUBLE_EQ(restricted_lagrangian(m, {vec({2, 5}), vec({1})}), -1.5);
}

}  // namespace
}  // namespace nhtrack
