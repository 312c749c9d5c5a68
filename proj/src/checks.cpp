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

#include "nhtrack/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/SVD>

#include "nhtrack/ode.hpp"

namespace nhtrack {

namespace {

CheckResult make(std::string name, double measured, double threshold,
                 bool below) {
  CheckResult r;
  r.name = std::move(name);
  r.measured = measured;
  r.threshold = threshold;
  r.passed = below ? measured <= threshold : measured >= threshold;
  return r;
}

double energy_drift(const SystemModel& model, const AdmissibleState& start,
                    double horizon, int steps) {
  const int n = model.dim();
  const int r = model.rank();
  VectorField f = [&](double, const Vector& y) {
    const StateDerivative d =
        dynamics_rhs(model, {y.head(n), y.tail(r)}, Vector::Zero(r));
    Vector out(n + r);
    out << d.qdot, d.vdot;
    return out;
  };
  Vector y0(n + r);
  y0 << start.q, start.v;
  const double e0 = restricted_energy(model, start);
  double worst = 0.0;
  for (const Sample& s : integrate(f, y0, TimeGrid(0.0, horizon, steps))) {
    worst = std::max(worst, std::abs(restricted_energy(
                                model, {s.y.head(n), s.y.tail(r)}) - e0));
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_model_checks(const SystemModel& model,
                                          const CheckOptions& options) {
  const int n = model.dim();
  const int r = model.rank();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(-options.coordinate_range,
                                              options.coordinate_range);
  auto random_vector = [&](int size) {
    Vector x(size);
    for (int i = 0; i < size; ++i) x[i] = dist(rng);
    return x;
  };

  double annihilation = 0.0;
  double min_sigma = std::numeric_limits<double>::infinity();
  double asym = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  double rho_jac_err = 0.0;
  double gamma_jac_err = 0.0;
  double structure_err = 0.0;
  bool has_structure = false;
  const double step = 1e-6;

  for (int sample = 0; sample < options.samples; ++sample) {
    const Vector q = random_vector(n);
    const Vector v = random_vector(r);
    const Matrix rho = model.rho(q);

    const Vector qdot = admissibility_velocity(model, {q, v});
    annihilation = std::max(
        annihilation, constraint_residual(model, q, qdot).lpNorm<Eigen::Infinity>());
    annihilation = std::max(
        annihilation, (model.annihilator(q) * rho).lpNorm<Eigen::Infinity>());

    Eigen::JacobiSVD<Matrix> svd(rho);
    min_sigma = std::min(min_sigma, svd.singularValues().minCoeff());

    const Matrix g = model.metric_d(q);
    asym = std::max(asym, (g - g.transpose()).lpNorm<Eigen::Infinity>());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (g + g.transpose()));
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());

    const Tensor3 drho = model.rho_jac(q);
    const std::vector<Tensor3> dgamma = model.christoffel_jac(q, step);
    for (int j = 0; j < n; ++j) {
      Vector qp = q, qm = q;
      const double hj = step * std::max(1.0, std::abs(q[j]));
      qp[j] += hj;
      qm[j] -= hj;
      const Matrix fd = (model.rho(qp) - model.rho(qm)) / (2 * hj);
      const Tensor3 gp = model.christoffel(qp);
      const Tensor3 gm = model.christoffel(qm);
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < r; ++a) {
          const double err = std::abs(drho(i, a, j) - fd(i, a));
          rho_jac_err = std::max(
              rho_jac_err, err / std::max(1.0, std::abs(fd(i, a))));
        }
      }
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b) {
          for (int c = 0; c < r; ++c) {
            const double fdg = (gp(a, b, c) - gm(a, b, c)) / (2 * hj);
            gamma_jac_err =
                std::max(gamma_jac_err, std::abs(dgamma[j](a, b, c) - fdg) /
                                            std::max(1.0, std::abs(fdg)));
          }
        }
      }
    }

    if (const auto data = model.connection_data(q)) {
      has_structure = true;
      const Tensor3 expected = christoffel_from_structure(*data);
      const Tensor3 actual = model.christoffel(q);
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b) {
          for (int c = 0; c < r; ++c) {
            structure_err = std::max(
                structure_err, std::abs(expected(a, b, c) - actual(a, b, c)));
          }
        }
      }
    }
  }

  std::vector<CheckResult> out;
  out.push_back(make("annihilator . rho = 0", annihilation, 1e-12, true));
  out.push_back(make("rho full column rank (min singular value)", min_sigma,
                     1e-8, false));
  out.push_back(make("metric symmetric", asym, 1e-12, true));
  out.push_back(make("metric positive definite (min eigenvalue)", min_eig,
                     1e-12, false));
  out.push_back(make("rho_jac vs central differences", rho_jac_err, 1e-6, true));
  out.push_back(
      make("christoffel_jac vs central differences", gamma_jac_err, 1e-6, true));
  if (has_structure) {
    out.push_back(make("christoffel vs structure constants (Koszul)",
                       structure_err, 1e-12, true));
  }

  // Energy drift of the uncontrolled flow must shrink >= 8x when h halves.
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 3; ++trial) {
    const AdmissibleState start{random_vector(n), 2.0 * random_vector(r)};
    const double coarse = energy_drift(model, start, 5.0, 50);
    const double fine = energy_drift(model, start, 5.0, 100);
    if (coarse < 1e-13) continue;  // conserved to round-off at both steps
    worst_ratio = std::min(worst_ratio, coarse / std::max(fine, 1e-300));
  }
  CheckResult drift = make("RK4 energy drift reduction under h-halving",
                           worst_ratio, 8.0, false);
  if (std::isinf(worst_ratio)) {
    drift.passed = true;
    drift.detail = "energy conserved to round-off";
  }
  out.push_back(drift);
  return out;
}

}  // namespace nhtrack
