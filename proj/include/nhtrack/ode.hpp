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

// Fixed-step classical Runge-Kutta integration.

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhtrack/geometry.hpp"

namespace nhtrack {

/// Uniform grid t0 < t0 + h < ... < tf with N steps.
class TimeGrid {
 public:
  /// Throws std::invalid_argument unless tf > t0 and steps > 0.
  TimeGrid(double t0, double tf, int steps);

  double t0() const { return t0_; }
  double tf() const { return tf_; }
  int steps() const { return steps_; }
  double h() const { return (tf_ - t0_) / steps_; }
  /// Node k; node N is tf exactly.
  double time(int k) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t0_;
  double tf_;
  int steps_;
};

/// Thrown when a Runge-Kutta stage produces a non-finite value.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int stage, double t);
  int stage() const { return stage_; }
  double time() const { return time_; }

 private:
  int stage_;
  double time_;
};

using VectorField = std::function<Vector(double t, const Vector& y)>;

/// One classical RK4 step of size h from (t, y).
Vector rk4_step(const VectorField& f, double t, const Vector& y, double h);

struct Sample {
  double t;
  Vector y;
};

/// RK4 over the grid; returns N + 1 samples starting with (t0, y0).
std::vector<Sample> integrate(const VectorField& f, const Vector& y0,
                              const TimeGrid& grid);

}  // namespace nhtrack
