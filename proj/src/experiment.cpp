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

#include "nhtrack/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nhtrack {

namespace {

namespace fs = std::filesystem;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, int precision)
      : out_(path), precision_(precision) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      out_ << (i ? "," : "") << names[i];
    }
    out_ << "\n";
  }
  CsvWriter& value(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", precision_, x);
    sep();
    out_ << buf;
    return *this;
  }
  CsvWriter& values(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) value(v[i]);
    return *this;
  }
  CsvWriter& blanks(int count) {
    for (int i = 0; i < count; ++i) sep();
    return *this;
  }
  void end() {
    out_ << "\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }

  std::ofstream out_;
  int precision_;
  bool first_ = true;
};

std::vector<std::string> columns(const std::string& prefix, int count) {
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_log(std::ostream& out, const ConvergenceReport& report) {
  out << "status: " << (report.converged ? "converged" : "not converged")
      << " (" << report.message << ")\n"
      << "iterations: " << report.iterations << "\n"
      << "final residual norm: " << fmt(report.final_residual_norm) << "\n"
      << "newton log (iteration, residual norm, step scale, halvings):\n";
  for (const NewtonRecord& r : report.log) {
    out << "  " << r.iteration << " " << fmt(r.residual_norm) << " "
        << fmt(r.step_scale) << " " << r.halvings << "\n";
  }
}

fs::path prepare_directory(const ExperimentConfig& config,
                           const std::optional<std::string>& out_dir) {
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(config.directory);
  fs::create_directories(dir);
  return dir;
}

// |annihilator . qdot| with qdot from differences of neighbouring samples.
double sampled_constraint_residual(const SystemModel& model,
                                   const std::vector<PmpSample>& traj,
                                   std::size_t k) {
  const std::size_t lo = k == 0 ? 0 : k - 1;
  const std::size_t hi = std::min(traj.size() - 1, k + 1);
  const Vector qdot = (traj[hi].state.q - traj[lo].state.q) /
                      (traj[hi].t - traj[lo].t);
  return constraint_residual(model, traj[k].state.q, qdot)
      .lpNorm<Eigen::Infinity>();
}

RunOutcome run_shooting(const ExperimentConfig& config,
                        const ExperimentSetup& setup, const fs::path& dir) {
  const SystemModel& model = *setup.model;
  const int n = model.dim();
  const int r = model.rank();
  RunOutcome outcome;
  outcome.directory = dir.string();

  std::ofstream report(dir / "report.txt");
  report << "nhtrack report\n"
         << "method: pmp-shooting\n"
         << "system: " << model.name() << "\n";

  Costate alpha0 = zero_costate(model);
  if (!config.initial_costate.empty()) {
    Vector x = Eigen::Map<const Vector>(config.initial_costate.data(),
                                        static_cast<Eigen::Index>(n + r));
    alpha0 = unpack_costate(x, n);
  }

  ShootingResult result;
  try {
    result = solve_shooting(model, setup.problem, alpha0, setup.shooting);
  } catch (const std::exception& e) {
    report << "status: failed\nerror: " << e.what() << "\n\n[config]\n"
           << echo_config(config);
    outcome.exit_code = kExitNotConverged;
    outcome.summary = std::string("shooting failed: ") + e.what();
    return outcome;
  }

  CsvWriter traj(dir / "trajectory.csv", config.precision);
  traj.header(concat({{"t"}, columns("q", n), columns("v", r), columns("u", r),
                      columns("lambda", n), columns("mu", r)}));
  CsvWriter diag(dir / "diagnostics.csv", config.precision);
  diag.header({"t", "cost", "action", "energy", "constraint_residual"});
  double action = 0.0;
  double prev_cost = 0.0;
  double max_constraint = 0.0;
  for (std::size_t k = 0; k < result.trajectory.size(); ++k) {
    const PmpSample& s = result.trajectory[k];
    traj.value(s.t).values(s.state.q).values(s.state.v).values(s.u)
        .values(s.costate.lambda).values(s.costate.mu).end();
    const double cost = setup.problem.lambda0 *
                        running_cost(model, setup.problem, s.t, s.state, s.u);
    if (k > 0) {
      action += 0.5 * (s.t - result.trajectory[k - 1].t) * (cost + prev_cost);
    }
    prev_cost = cost;
    const double cres = sampled_constraint_residual(model, result.trajectory, k);
    max_constraint = std::max(max_constraint, cres);
    diag.value(s.t).value(cost).value(action)
        .value(restricted_energy(model, s.state)).value(cres).end();
  }

  const AdmissibleState& end = result.trajectory.back().state;
  const double terminal =
      terminal_tracking_error(model, setup.problem, end);
  const AbnormalReport abnormal = abnormal_diagnostic(model, result.trajectory);
  write_log(report, result.report);
  report << "initial costate: " << pack(result.alpha).transpose().format(
                Eigen::IOFormat(Eigen::FullPrecision, 0, ", ", ", "))
         << "\n"
         << "terminal tracking error: " << fmt(terminal) << "\n"
         << "total cost: " << fmt(result.total_cost) << "\n"
         << "max constraint residual (differenced q'): " << fmt(max_constraint)
         << "\n"
         << "abnormal diagnostic: min violation " << fmt(abnormal.min_violation)
         << (abnormal.admits_nonzero ? " (nonzero abnormal multiplier fits)"
                                     : " (no abnormal multiplier fits)")
         << "\n\n"
         << "[columns]\n"
         << "trajectory.csv: t, q1..q" << n << ", v1..v" << r << ", u1..u" << r
         << ", lambda1..lambda" << n << ", mu1..mu" << r << "\n"
         << "diagnostics.csv: t, running cost, cumulative cost (trapezoid), "
            "restricted energy, |constraint residual|\n\n"
         << "[config]\n"
         << echo_config(config);

  outcome.exit_code =
      result.report.converged ? kExitConverged : kExitNotConverged;
  outcome.summary = std::string(result.report.converged ? "converged"
                                                        : "not converged") +
                    ", terminal tracking error " + fmt(terminal) +
                    ", cost " + fmt(result.total_cost);
  return outcome;
}

void write_variational(const ExperimentConfig& config,
                       const ExperimentSetup& setup,
                       const DiscreteTrajectory& traj, const fs::path& dir) {
  const SystemModel& model = *setup.model;
  const int n = model.dim();
  const int r = model.rank();
  const int steps = traj.steps();
  CsvWriter out(dir / "trajectory.csv", config.precision);
  out.header(concat({{"t"}, columns("q", n), columns("v", r), columns("u", r),
                     columns("lambda", n)}));
  for (int k = 0; k <= steps; ++k) {
    out.value(traj.grid.time(k)).values(traj.nodes[k].q).values(traj.nodes[k].v);
    if (k < steps) {
      out.values(traj.controls[k]);
    } else {
      out.blanks(r);
    }
    if (k == 0 && traj.first_multiplier) {
      out.values(*traj.first_multiplier);
    } else if (k >= 1 && k < steps) {
      out.values(traj.multipliers[k - 1]);
    } else {
      out.blanks(n);
    }
    out.end();
  }
  CsvWriter diag(dir / "diagnostics.csv", config.precision);
  diag.header({"t", "cost", "action", "energy", "constraint_residual"});
  for (const DiagnosticRow& row : diagnostics(model, setup.problem, traj)) {
    diag.value(row.t).value(row.running_cost).value(row.cumulative_action)
        .value(row.energy).value(row.constraint_residual).end();
  }
}

RunOutcome run_variational(const ExperimentConfig& config,
                           const ExperimentSetup& setup, const fs::path& dir) {
  const SystemModel& model = *setup.model;
  RunOutcome outcome;
  outcome.directory = dir.string();
  std::ofstream report(dir / "report.txt");
  report << "nhtrack report\n"
         << "method: variational\n"
         << "system: " << model.name() << "\n";

  DiscreteTrajectory traj;
  try {
    traj = solve_del(model, setup.problem, setup.grid, setup.del);
  } catch (const std::exception& e) {
    report << "status: failed\nerror: " << e.what() << "\n\n[config]\n"
           << echo_config(config);
    outcome.exit_code = kExitNotConverged;
    outcome.summary = std::string("variational solve failed: ") + e.what();
    return outcome;
  }
  write_variational(config, setup, traj, dir);

  const int steps = traj.steps();
  double max_psi = 0.0;
  for (int k = setup.del.enforce_first_interval ? 0 : 1; k < steps; ++k) {
    max_psi = std::max(max_psi, discrete_constraint(model, traj.nodes[k],
                                                    traj.nodes[k + 1], traj.h())
                                    .lpNorm<Eigen::Infinity>());
  }
  const AdmissibleState ref_end = setup.problem.reference(setup.problem.horizon);
  const AdmissibleState& end = traj.nodes[steps];
  const double node_gap = std::max((end.q - ref_end.q).lpNorm<Eigen::Infinity>(),
                                   (end.v - ref_end.v).lpNorm<Eigen::Infinity>());
  const double terminal = terminal_tracking_error(model, setup.problem, end);
  const double cost = discrete_cost(model, setup.problem, traj);

  write_log(report, traj.report);
  report << "grid: h = " << fmt(traj.h()) << ", N = " << steps << "\n"
         << "first interval constrained: "
         << (setup.del.enforce_first_interval ? "yes" : "no") << "\n"
         << "initial guess: " << to_string(setup.del.initial_guess) << "\n"
         << "max |Psi_d| over constrained intervals: " << fmt(max_psi) << "\n"
         << "final node minus reference endpoint (max abs): " << fmt(node_gap)
         << "\n"
         << "terminal tracking error: " << fmt(terminal) << "\n"
         << "total cost: " << fmt(cost) << "\n\n"
         << "[columns]\n"
         << "trajectory.csv: t, q1..q" << model.dim() << ", v1..v"
         << model.rank() << ", u1..u" << model.rank()
         << " (control of the interval starting at the node), lambda1..lambda"
         << model.dim() << " (multiplier of that interval)\n"
         << "diagnostics.csv: t, running cost, cumulative discrete action, "
            "restricted energy, |Psi_d| of the next interval\n\n"
         << "[config]\n"
         << echo_config(config);

  outcome.exit_code =
      traj.report.converged ? kExitConverged : kExitNotConverged;
  outcome.summary = std::string(traj.report.converged ? "converged"
                                                      : "not converged") +
                    ", max |Psi_d| " + fmt(max_psi) + ", final node gap " +
                    fmt(node_gap) + ", cost " + fmt(cost);
  return outcome;
}

double state_distance(const AdmissibleState& a, const AdmissibleState& b) {
  return std::sqrt((a.q - b.q).squaredNorm() + (a.v - b.v).squaredNorm());
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config,
                          const std::optional<std::string>& out_dir) {
  const ExperimentSetup setup = build_setup(config);
  const fs::path dir = prepare_directory(config, out_dir);
  if (config.method == SolverMethod::pmp_shooting) {
    return run_shooting(config, setup, dir);
  }
  return run_variational(config, setup, dir);
}

CompareResult compare_solutions(const ExperimentSetup& setup,
                                bool pmp_cross_check) {
  const SystemModel& model = *setup.model;
  constexpr int kSubsteps = 100;
  CompareResult out;
  out.coarse = solve_del(model, setup.problem, setup.grid, setup.del);
  const TimeGrid fine_grid(setup.grid.t0(), setup.grid.tf(),
                           2 * setup.grid.steps());
  const DiscreteTrajectory fine =
      solve_del(model, setup.problem, fine_grid, setup.del);
  out.h = out.coarse.h();
  out.converged = out.coarse.report.converged && fine.report.converged;
  out.reintegrated = reintegrate(model, out.coarse, kSubsteps);
  out.discrepancy_coarse =
      state_distance(out.reintegrated.back(), out.coarse.nodes.back());
  out.discrepancy_fine = state_distance(reintegrate(model, fine, kSubsteps).back(),
                                        fine.nodes.back());
  out.ratio = out.discrepancy_coarse / out.discrepancy_fine;
  out.variational_cost = discrete_cost(model, setup.problem, out.coarse);
  if (pmp_cross_check) {
    try {
      const ShootingResult shot = solve_shooting(
          model, setup.problem, zero_costate(model), setup.shooting);
      if (shot.report.converged) {
        out.pmp_cost = shot.total_cost;
      }
      out.pmp_message = shot.report.message;
    } catch (const std::exception& e) {
      out.pmp_message = e.what();
    }
  }
  return out;
}

RunOutcome compare_experiment(const ExperimentConfig& config,
                              const std::optional<std::string>& out_dir) {
  const ExperimentSetup setup = build_setup(config);
  const fs::path dir = prepare_directory(config, out_dir);
  RunOutcome outcome;
  outcome.directory = dir.string();
  std::ofstream report(dir / "compare_report.txt");
  report << "nhtrack compare\n"
         << "system: " << setup.model->name() << "\n";

  CompareResult result;
  try {
    result = compare_solutions(setup, config.pmp_cross_check);
  } catch (const std::exception& e) {
    report << "status: failed\nerror: " << e.what() << "\n";
    outcome.exit_code = kExitNotConverged;
    outcome.summary = std::string("compare failed: ") + e.what();
    return outcome;
  }

  const SystemModel& model = *setup.model;
  const int n = model.dim();
  const int r = model.rank();
  CsvWriter csv(dir / "compare.csv", config.precision);
  csv.header(concat({{"t", "energy_variational", "energy_rk4"},
                     columns("q_variational", n), columns("v_variational", r),
                     columns("q_rk4", n), columns("v_rk4", r)}));
  for (int k = 0; k <= result.coarse.steps(); ++k) {
    const AdmissibleState& a = result.coarse.nodes[k];
    const AdmissibleState& b = result.reintegrated[k];
    csv.value(result.coarse.grid.time(k)).value(restricted_energy(model, a))
        .value(restricted_energy(model, b)).values(a.q).values(a.v)
        .values(b.q).values(b.v).end();
  }

  report << "solves converged: " << (result.converged ? "yes" : "no") << "\n"
         << "h: " << fmt(result.h) << "\n"
         << "endpoint discrepancy at h: " << fmt(result.discrepancy_coarse)
         << "\n"
         << "endpoint discrepancy at h/2: " << fmt(result.discrepancy_fine)
         << "\n"
         << "discrepancy ratio: " << fmt(result.ratio) << "\n"
         << "variational cost: " << fmt(result.variational_cost) << "\n";
  if (config.pmp_cross_check) {
    if (result.pmp_cost) {
      report << "shooting cost: " << fmt(*result.pmp_cost) << "\n"
             << "relative cost difference: "
             << fmt(std::abs(result.variational_cost - *result.pmp_cost) /
                    std::abs(*result.pmp_cost))
             << "\n";
    } else {
      report << "shooting cross check failed: " << result.pmp_message << "\n";
    }
  }
  report << "\n[columns]\n"
         << "compare.csv: t, restricted energy (variational, RK4 at h/100), "
            "variational node state, re-integrated state\n\n"
         << "[config]\n"
         << echo_config(config);

  outcome.exit_code = result.converged ? kExitConverged : kExitNotConverged;
  outcome.summary = "discrepancy ratio " + fmt(result.ratio) +
                    ", variational cost " + fmt(result.variational_cost);
  if (result.pmp_cost) outcome.summary += ", shooting cost " + fmt(*result.pmp_cost);
  return outcome;
}

}  // namespace nhtrack
