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

#include "nhtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "nhtrack/ode.hpp"

namespace nhtrack {

std::string to_string(TerminalMode mode) {
  return mode == TerminalMode::mayer ? "mayer" : "hard";
}

TerminalMode terminal_mode_from_string(const std::string& name) {
  if (name == "mayer") return TerminalMode::mayer;
  if (name == "hard") return TerminalMode::hard;
  throw ProblemError("unknown terminal mode '" + name + "' (mayer | hard)");
}

Reference::Reference(Sampler sampler, std::string description,
                     bool time_independent)
    : sampler_(std::move(sampler)),
      description_(std::move(description)),
      time_independent_(time_independent) {}

Reference Reference::affine(Vector q0, Vector q_rate, Vector v0,
                            Vector v_rate) {
  const bool frozen = q_rate.isZero(0.0) && v_rate.isZero(0.0);
  return Reference(
      [q0 = std::move(q0), q_rate = std::move(q_rate), v0 = std::move(v0),
       v_rate = std::move(v_rate)](double t) {
        return AdmissibleState{q0 + t * q_rate, v0 + t * v_rate};
      },
      "affine", frozen);
}

Reference Reference::constant(AdmissibleState state) {
  return Reference([state = std::move(state)](double) { return state; },
                   "constant", true);
}

namespace {

struct RolloutTable {
  double h = 0.0;
  int rank = 0;
  std::vector<Vector> y;     // packed (q, v)
  std::vector<Vector> ydot;  // f(y)
};

}  // namespace

Reference Reference::rollout(std::shared_ptr<const SystemModel> model,
                             AdmissibleState start, double horizon,
                             double step) {
  check_state(*model, start);
  if (!(horizon > 0.0) || !(step > 0.0)) {
    throw ProblemError("rollout reference needs positive horizon and step");
  }
  const int n = model->dim();
  const int r = model->rank();
  const int steps = std::max(1, static_cast<int>(std::ceil(horizon / step - 1e-9)));
  const TimeGrid grid(0.0, horizon, steps);
  const Vector zero_u = Vector::Zero(r);
  VectorField f = [model, n, r, zero_u](double, const Vector& y) {
    const StateDerivative d =
        dynamics_rhs(*model, {y.head(n), y.tail(r)}, zero_u);
    Vector out(n + r);
    out << d.qdot, d.vdot;
    return out;
  };
  Vector y0(n + r);
  y0 << start.q, start.v;
  auto table = std::make_shared<RolloutTable>();
  table->h = grid.h();
  table->rank = r;
  for (const Sample& s : integrate(f, y0, grid)) {
    table->ydot.push_back(f(s.t, s.y));
    table->y.push_back(s.y);
  }
  return Reference(
      [table, n, r, steps, horizon](double t) {
        if (t < -1e-12 || t > horizon + 1e-12) {
          std::ostringstream msg;
          msg << "reference sampled at t = " << t << " outside [0, " << horizon
              << "]";
          throw ProblemError(msg.str());
        }
        const double h = table->h;
        int k = static_cast<int>(std::floor(t / h));
        k = std::clamp(k, 0, steps - 1);
        const double s = (t - k * h) / h;
        Vector y;
        if (s <= 0.0) {
          y = table->y[k];
        } else if (s >= 1.0 || t >= horizon) {
          y = table->y[k + 1];
        } else {
          const double s2 = s * s;
          const double s3 = s2 * s;
          const double h00 = 2 * s3 - 3 * s2 + 1;
          const double h10 = s3 - 2 * s2 + s;
          const double h01 = -2 * s3 + 3 * s2;
          const double h11 = s3 - s2;
          y = h00 * table->y[k] + h10 * h * table->ydot[k] +
              h01 * table->y[k + 1] + h11 * h * table->ydot[k + 1];
        }
        return AdmissibleState{y.head(n), y.tail(r)};
      },
      "rollout", false);
}

void TrackingProblem::validate(const SystemModel& model) const {
  if (!(epsilon > 0.0)) {
    throw ProblemError(
        "epsilon must be > 0: epsilon = 0 turns the tracking problem into a "
        "singular optimal control problem, which is not supported");
  }
  if (!(lambda0 > 0.0)) {
    throw ProblemError("lambda0 must be > 0 (normal extremals only)");
  }
  if (!(omega > 0.0)) throw ProblemError("omega must be > 0");
  if (!(horizon > 0.0)) throw ProblemError("horizon T must be > 0");
  if (!(state_weight >= 0.0)) throw ProblemError("state_weight must be >= 0");
  if (!reference.valid()) throw ProblemError("reference trajectory missing");
  try {
    check_state(model, initial);
    check_state(model, reference(0.0));
  } catch (const DimensionError& e) {
    throw ProblemError(std::string("problem/model mismatch: ") + e.what());
  }
}

TrackingError tracking_error(const SystemModel& model,
                             const AdmissibleState& state,
                             const AdmissibleState& ref, bool wrap_angles) {
  check_state(model, state);
  if (wrap_angles) {
    return {configuration_error(model, state.q, ref.q), state.v - ref.v};
  }
  return {state.q - ref.q, state.v - ref.v};
}

double running_cost(const SystemModel& model, const TrackingProblem& problem,
                    double t, const AdmissibleState& state, const Vector& u) {
  if (t < -1e-12 || t > problem.horizon + 1e-12) {
    std::ostringstream msg;
    msg << "running cost requested at t = " << t << " outside [0, "
        << problem.horizon << "]";
    throw ProblemError(msg.str());
  }
  const TrackingError e = tracking_error(model, state, problem.reference(t));
  return 0.5 * (problem.state_weight * (e.dq.squaredNorm() + e.dv.squaredNorm()) +
                problem.epsilon * u.squaredNorm());
}

double terminal_cost(const SystemModel& model, const TrackingProblem& problem,
                     const AdmissibleState& state) {
  const TrackingError e =
      tracking_error(model, state, problem.reference(problem.horizon));
  return 0.5 * (e.dq.squaredNorm() + e.dv.squaredNorm());
}

double terminal_tracking_error(const SystemModel& model,
                               const TrackingProblem& problem,
                               const AdmissibleState& state) {
  const TrackingError e = tracking_error(
      model, state, problem.reference(problem.horizon), true);
  return std::sqrt(e.dq.squaredNorm() + e.dv.squaredNorm());
}

}  // namespace nhtrack
