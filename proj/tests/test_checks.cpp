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

#include "nhtrack/checks.hpp"
#include "nhtrack/systems.hpp"

namespace nhtrack {
namespace {

TEST(Checks, DetectsBrokenModel) {
  // Particle tables with a wrong annihilator and a mis-scaled Gamma.
  const ParticleModel good;
  ModelFunctions f;
  f.name = "broken";
  f.dim = 3;
  f.corank = 1;
  f.rho = [&](const Vector& q) { return good.rho(q); };
  f.rho_jac = [&](const Vector& q) { return good.rho_jac(q); };
  f.christoffel = [&](const Vector& q) {
    Tensor3 g = good.christoffel(q);
    g(1, 0, 1) *= 2.0;
    return g;
  };
  f.metric_d = [&](const Vector& q) { return good.metric_d(q); };
  f.annihilator = [](const Vector&) {
    Matrix m(1, 3);
    m << 1, 0, 0;
    return m;
  };
  const FunctionModel broken(f);
  bool annihilator_failed = false;
  bool drift_failed = false;
  for (const CheckResult& r : run_model_checks(broken)) {
    if (!r.passed && r.name.find("annihilator") != std::string::npos) annihilator_failed = true;
    if (!r.passed && r.name.find("energy") != std::string::npos) drift_failed = true;
  }
  EXPECT_TRUE(annihilator_failed);
  EXPECT_TRUE(drift_failed);
}

TEST(Checks, Deterministic) {
  const auto m = resolve_preset("particle");
  const auto a = run_model_checks(*m, {50, 9, 1.5});
  const auto b = run_model_checks(*m, {50, 9, 1.5});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].measured, b[i].measured);
  }
}

}  // namespace
}  // namespace nhtrack
