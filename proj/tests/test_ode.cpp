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
#include <limits>

#include "nhtrack/ode.hpp"

namespace nhtrack {
namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

TEST(TimeGrid, Invariants) {
  EXPECT_THROW(TimeGrid(0, 1, 0), std::invalid_argument);
  EXPECT_THROW(TimeGrid(1, 1, 5), std::invalid_argument);
  EXPECT_THROW(TimeGrid(2, 1, 5), std::invalid_argument);
  const TimeGrid g(0, 5, 50);
  EXPECT_DOUBLE_EQ(g.h(), 0.1);
  EXPECT_EQ(g.time(0), 0.0);
  EXPECT_EQ(g.time(50), 5.0);
}

TEST(Rk4, ZeroFieldKeepsState) {
  const VectorField f = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  Vector y(3);
  y << 1, -2, 3;
  EXPECT_EQ(rk4_step(f, 0.0, y, 0.5), y);
  for (const Sample& s : integrate(f, y, TimeGrid(0, 1, 10))) EXPECT_EQ(s.y, y);
}

TEST(Rk4, ExponentialStep) {
  const VectorField f = [](double, const Vector& y) { return Vector(y); };
  EXPECT_NEAR(rk4_step(f, 0.0, scalar(1.0), 0.1)[0], 1.10517083333333, 1e-13);
}

TEST(Rk4, FourthOrder) {
  const VectorField f = [](double, const Vector& y) { return Vector(-0.7 * y); };
  double prev = 0.0;
  for (int steps : {10, 20, 40, 80}) {
    const auto s = integrate(f, scalar(1.0), TimeGrid(0, 2, steps));
    const double err = std::abs(s.back().y[0] - std::exp(-1.4));
    if (prev > 0.0) {
      EXPECT_NEAR(std::log2(prev / err), 4.0, 0.2);
    }
    prev = err;
  }
}

TEST(Rk4, NonFiniteStageReported) {
  const VectorField f = [](double t, const Vector& y) {
    if (t > 0.0) return Vector(scalar(std::numeric_limits<double>::quiet_NaN()));
    return Vector(y);
  };
  try {
    rk4_step(f, 0.0, scalar(1.0), 0.1);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.stage(), 2);
  }
}

TEST(Integrate, SamplesCoverGrid) {
  const VectorField f = [](double t, const Vector&) { return scalar(2 * t); };
  const auto s = integrate(f, scalar(0.0), TimeGrid(1, 3, 4));
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.front().t, 1.0);
  EXPECT_EQ(s.front().y[0], 0.0);
  EXPECT_EQ(s.back().t, 3.0);
  EXPECT_NEAR(s.back().y[0], 8.0, 1e-13);
}

}  // namespace
}  // namespace nhtrack
