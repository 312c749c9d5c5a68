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

#include "nhtrack/ode.hpp"

#include <cmath>
#include <sstream>

namespace nhtrack {

TimeGrid::TimeGrid(double t0, double tf, int steps)
    : t0_(t0), tf_(tf), steps_(steps) {
  if (!(tf > t0) || steps <= 0 || !std::isfinite(t0) || !std::isfinite(tf)) {
    std::ostringstream msg;
    msg << "invalid time grid [" << t0 << ", " << tf << "] with " << steps
        << " steps";
    throw std::invalid_argument(msg.str());
  }
}

double TimeGrid::time(int k) const {
  if (k == steps_) return tf_;
  return t0_ + k * h();
}

namespace {

std::string non_finite_message(int stage, double t) {
  std::ostringstream msg;
  msg << "non-finite value in RK4 stage " << stage << " at t = " << t;
  return msg.str();
}

void check_stage(const Vector& k, int stage, double t) {
  if (!k.allFinite()) throw NonFiniteError(stage, t);
}

}  // namespace

NonFiniteError::NonFiniteError(int stage, double t)
    : std::runtime_error(non_finite_message(stage, t)), stage_(stage), time_(t) {}

Vector rk4_step(const VectorField& f, double t, const Vector& y, double h) {
  const Vector k1 = f(t, y);
  check_stage(k1, 1, t);
  const Vector k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  check_stage(k2, 2, t + 0.5 * h);
  const Vector k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  check_stage(k3, 3, t + 0.5 * h);
  const Vector k4 = f(t + h, y + h * k3);
  check_stage(k4, 4, t + h);
  Vector out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw NonFiniteError(4, t + h);
  return out;
}

std::vector<Sample> integrate(const VectorField& f, const Vector& y0,
                              const TimeGrid& grid) {
  std::vector<Sample> out;
  out.reserve(grid.steps() + 1);
  out.push_back({grid.t0(), y0});
  const double h = grid.h();
  for (int k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    out.push_back({grid.time(k + 1), rk4_step(f, t, out.back().y, h)});
  }
  return out;
}

}  // namespace nhtrack
