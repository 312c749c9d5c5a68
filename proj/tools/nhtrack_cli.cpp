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

// nhtrack: run, compare and check optimal tracking experiments.

#include <algorithm>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nhtrack/checks.hpp"
#include "nhtrack/config.hpp"
#include "nhtrack/experiment.hpp"
#include "nhtrack/systems.hpp"

#ifndef NHTRACK_CONFIG_DIR
#define NHTRACK_CONFIG_DIR "configs"
#endif

namespace {

using nhtrack::RunOutcome;

// Output directory for one of several configs: --out/<config stem>.
std::optional<std::string> out_for(const std::optional<std::string>& out,
                                   const std::string& config, bool many) {
  if (!out) return std::nullopt;
  if (!many) return out;
  return (std::filesystem::path(*out) / std::filesystem::path(config).stem())
      .string();
}

RunOutcome guarded(const std::string& path, bool compare,
                   const std::optional<std::string>& out) {
  try {
    const nhtrack::ExperimentConfig config = nhtrack::load_config(path);
    return compare ? nhtrack::compare_experiment(config, out)
                   : nhtrack::run_experiment(config, out);
  } catch (const nhtrack::ConfigError& e) {
    return {nhtrack::kExitConfigError, "", std::string("config error: ") + e.what()};
  } catch (const std::exception& e) {
    return {nhtrack::kExitConfigError, "", std::string("error: ") + e.what()};
  }
}

int run_all(const std::vector<std::string>& configs,
            const std::optional<std::string>& out, int jobs, bool compare) {
  std::vector<RunOutcome> results(configs.size());
  const bool many = configs.size() > 1;
  std::size_t next = 0;
  while (next < configs.size()) {
    std::vector<std::future<RunOutcome>> batch;
    const std::size_t end =
        std::min(configs.size(), next + static_cast<std::size_t>(jobs));
    for (std::size_t i = next; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, guarded, configs[i],
                                 compare, out_for(out, configs[i], many)));
    }
    for (std::size_t i = next; i < end; ++i) results[i] = batch[i - next].get();
    next = end;
  }
  int code = nhtrack::kExitConverged;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::ostream& os = results[i].exit_code == nhtrack::kExitConfigError
                           ? std::cerr
                           : std::cout;
    os << configs[i] << ": " << results[i].summary;
    if (!results[i].directory.empty()) os << " [" << results[i].directory << "]";
    os << "\n";
    code = std::max(code, results[i].exit_code);
  }
  return code;
}

int run_checks(const std::string& preset) {
  const auto model = nhtrack::resolve_preset(preset);
  bool ok = true;
  for (const nhtrack::CheckResult& c : nhtrack::run_model_checks(*model)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured "
              << c.measured << ", bound " << c.threshold;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
    ok = ok && c.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal trajectory tracking for nonholonomic systems"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::optional<std::string> out;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Solve configured experiments");
  run->add_option("--config", configs, "Experiment config file(s)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Configs solved concurrently")
      ->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand(
      "compare", "Re-integrate a variational solution and measure its order");
  compare->add_option("--config", configs, "Variational config file(s)")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--out", out, "Output directory (overrides the config)");
  compare->add_option("--jobs", jobs, "Configs compared concurrently")
      ->check(CLI::PositiveNumber);

  std::string preset;
  std::string check_config;
  auto* check = app.add_subcommand("check", "Run the model invariant suite");
  auto* preset_opt = check->add_option("--preset", preset, "System preset");
  check->add_option("--config", check_config, "Take the preset from a config")
      ->check(CLI::ExistingFile)
      ->excludes(preset_opt);

  auto* presets = app.add_subcommand("presets", "List systems and configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : nhtrack::kExitConfigError;
  }

  try {
    if (*run) return run_all(configs, out, jobs, false);
    if (*compare) return run_all(configs, out, jobs, true);
    if (*check) {
      if (!check_config.empty()) {
        preset = nhtrack::load_config(check_config).preset;
      }
      if (preset.empty()) preset = "particle";
      return run_checks(preset);
    }
    if (*presets) {
      std::cout << "systems:\n";
      for (const std::string& name : nhtrack::preset_names()) {
        std::cout << "  " << name << "\n";
      }
      std::cout << "configs (" << NHTRACK_CONFIG_DIR << "):\n";
      std::vector<std::string> files;
      std::error_code ec;
      for (const auto& entry :
           std::filesystem::directory_iterator(NHTRACK_CONFIG_DIR, ec)) {
        if (entry.path().extension() == ".cfg") {
          files.push_back(entry.path().filename().string());
        }
      }
      std::sort(files.begin(), files.end());
      for (const std::string& f : files) std::cout << "  " << f << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nhtrack::kExitConfigError;
  }
  return 0;
}
