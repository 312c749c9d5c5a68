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

#include "nhtrack/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nhtrack/systems.hpp"

namespace nhtrack {

namespace {

class ExpressionParser {
 public:
  explicit ExpressionParser(const std::string& text) : text_(text) {}

  double parse() {
    const double value = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected character");
    return value;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }
  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("cannot evaluate '" + text_ + "': " + what);
  }

  double sum() {
    double value = product();
    for (;;) {
      if (eat('+')) {
        value += product();
      } else if (eat('-')) {
        value -= product();
      } else {
        return value;
      }
    }
  }
  double product() {
    double value = unary();
    for (;;) {
      if (eat('*')) {
        value *= unary();
      } else if (eat('/')) {
        value /= unary();
      } else {
        return value;
      }
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }
  double atom() {
    skip();
    if (eat('(')) {
      const double value = sum();
      if (!eat(')')) fail("missing ')'");
      return value;
    }
    if (text_.compare(pos_, 2, "pi") == 0) {
      pos_ += 2;
      return std::numbers::pi;
    }
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return value;
  }

  std::string text_;
  std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string vec(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += number(v[i]);
  }
  return out;
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(evaluate_expression(item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + t + "'");
}

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "system.preset",
      "problem.initial_q", "problem.initial_v", "problem.reference",
      "problem.reference_q0", "problem.reference_q_rate",
      "problem.reference_v0", "problem.reference_v_rate",
      "problem.reference_start_q", "problem.reference_start_v",
      "problem.reference_step", "problem.horizon", "problem.epsilon",
      "problem.omega", "problem.lambda0", "problem.state_weight",
      "problem.terminal",
      "solver.method", "solver.steps", "solver.inner_step",
      "solver.newton_tol", "solver.max_iters", "solver.fd_step",
      "solver.damping", "solver.max_halvings", "solver.initial_costate",
      "solver.initial_guess", "solver.enforce_first_interval",
      "solver.slot_derivatives",
      "output.directory", "output.precision", "output.seed",
      "compare.pmp_cross_check"};
  return keys;
}

SlotDerivatives slot_derivatives_from_string(const std::string& s) {
  if (s == "automatic") return SlotDerivatives::automatic;
  if (s == "analytic") return SlotDerivatives::analytic;
  if (s == "finite-difference") return SlotDerivatives::finite_difference;
  throw ConfigError("solver.slot_derivatives: expected automatic, analytic or "
                    "finite-difference, got '" + s + "'");
}

std::string to_string(SlotDerivatives s) {
  switch (s) {
    case SlotDerivatives::automatic:
      return "automatic";
    case SlotDerivatives::analytic:
      return "analytic";
    case SlotDerivatives::finite_difference:
      break;
  }
  return "finite-difference";
}

}  // namespace

double evaluate_expression(const std::string& text) {
  return ExpressionParser(text).parse();
}

std::string to_string(SolverMethod method) {
  return method == SolverMethod::pmp_shooting ? "pmp-shooting" : "variational";
}

ExperimentConfig parse_config_string(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : body) {
      if (!known_keys().count(section + "." + key)) {
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      }
    }
  }

  ExperimentConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(path)) return trim(*v);
    return std::nullopt;
  };
  auto num = [&](const std::string& path, double& out) {
    if (auto v = get(path)) out = evaluate_expression(*v);
  };
  auto integer = [&](const std::string& path, auto& out) {
    if (auto v = get(path)) {
      const double x = evaluate_expression(*v);
      if (x != std::floor(x)) throw ConfigError(path + ": expected an integer");
      out = static_cast<std::remove_reference_t<decltype(out)>>(x);
    }
  };
  auto vector = [&](const std::string& path, std::vector<double>& out) {
    if (auto v = get(path)) out = parse_vector(*v);
  };

  try {
    if (auto v = get("system.preset")) c.preset = *v;

    vector("problem.initial_q", c.initial_q);
    vector("problem.initial_v", c.initial_v);
    if (auto v = get("problem.reference")) {
      if (*v == "affine") {
        c.reference = ReferenceKind::affine;
      } else if (*v == "rollout") {
        c.reference = ReferenceKind::rollout;
      } else {
        throw ConfigError("problem.reference: expected affine or rollout");
      }
    }
    vector("problem.reference_q0", c.reference_q0);
    vector("problem.reference_q_rate", c.reference_q_rate);
    vector("problem.reference_v0", c.reference_v0);
    vector("problem.reference_v_rate", c.reference_v_rate);
    vector("problem.reference_start_q", c.reference_start_q);
    vector("problem.reference_start_v", c.reference_start_v);
    num("problem.reference_step", c.reference_step);
    num("problem.horizon", c.horizon);
    num("problem.epsilon", c.epsilon);
    num("problem.omega", c.omega);
    num("problem.lambda0", c.lambda0);
    num("problem.state_weight", c.state_weight);
    if (auto v = get("problem.terminal")) c.terminal = terminal_mode_from_string(*v);

    if (auto v = get("solver.method")) {
      if (*v == "pmp-shooting") {
        c.method = SolverMethod::pmp_shooting;
      } else if (*v == "variational") {
        c.method = SolverMethod::variational;
      } else {
        throw ConfigError("solver.method: expected pmp-shooting or variational");
      }
    }
    integer("solver.steps", c.steps);
    num("solver.inner_step", c.inner_step);
    num("solver.newton_tol", c.newton_tol);
    integer("solver.max_iters", c.max_iters);
    num("solver.fd_step", c.fd_step);
    num("solver.damping", c.damping);
    integer("solver.max_halvings", c.max_halvings);
    vector("solver.initial_costate", c.initial_costate);
    if (auto v = get("solver.initial_guess")) {
      c.initial_guess = initial_guess_from_string(*v);
    }
    if (auto v = get("solver.enforce_first_interval")) {
      c.enforce_first_interval = parse_bool("solver.enforce_first_interval", *v);
    }
    if (auto v = get("solver.slot_derivatives")) {
      c.slot_derivatives = slot_derivatives_from_string(*v);
    }

    if (auto v = get("output.directory")) c.directory = *v;
    integer("output.precision", c.precision);
    integer("output.seed", c.seed);

    if (auto v = get("compare.pmp_cross_check")) {
      c.pmp_cross_check = parse_bool("compare.pmp_cross_check", *v);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_string(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void ExperimentConfig::validate() const {
  std::shared_ptr<const SystemModel> model;
  try {
    model = resolve_preset(preset);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError(
        "problem.epsilon must be > 0: epsilon = 0 turns the tracking problem "
        "into a singular optimal control problem, which is not supported");
  }
  const auto n = static_cast<std::size_t>(model->dim());
  const auto r = static_cast<std::size_t>(model->rank());
  auto need = [](const std::vector<double>& v, std::size_t size,
                 const std::string& key) {
    if (v.size() != size) {
      throw ConfigError(key + ": expected " + std::to_string(size) +
                        " values, got " + std::to_string(v.size()));
    }
  };
  need(initial_q, n, "problem.initial_q");
  need(initial_v, r, "problem.initial_v");
  if (reference == ReferenceKind::affine) {
    need(reference_q0, n, "problem.reference_q0");
    need(reference_q_rate, n, "problem.reference_q_rate");
    need(reference_v0, r, "problem.reference_v0");
    need(reference_v_rate, r, "problem.reference_v_rate");
  } else {
    need(reference_start_q, n, "problem.reference_start_q");
    need(reference_start_v, r, "problem.reference_start_v");
    if (!(reference_step > 0.0)) {
      throw ConfigError("problem.reference_step must be > 0");
    }
  }
  if (!initial_costate.empty()) {
    need(initial_costate, n + r, "solver.initial_costate");
  }
  if (!(horizon > 0.0) || !(omega > 0.0) || !(lambda0 > 0.0) ||
      !(state_weight >= 0.0)) {
    throw ConfigError("problem: horizon, omega and lambda0 must be > 0 and "
                      "state_weight >= 0");
  }
  if (steps < 2) throw ConfigError("solver.steps must be >= 2");
  if (!(inner_step > 0.0) || !(fd_step > 0.0) || newton_tol < 0.0 ||
      max_iters < 0 || !(damping > 0.0 && damping < 1.0) || max_halvings < 0) {
    throw ConfigError("solver: step sizes, tolerances and damping out of range");
  }
  if (precision < 1 || precision > 17) {
    throw ConfigError("output.precision must be in 1..17");
  }
}

std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[system]\n"
      << "preset = " << c.preset << "\n\n"
      << "[problem]\n"
      << "initial_q = " << vec(c.initial_q) << "\n"
      << "initial_v = " << vec(c.initial_v) << "\n"
      << "reference = "
      << (c.reference == ReferenceKind::affine ? "affine" : "rollout") << "\n";
  if (c.reference == ReferenceKind::affine) {
    out << "reference_q0 = " << vec(c.reference_q0) << "\n"
        << "reference_q_rate = " << vec(c.reference_q_rate) << "\n"
        << "reference_v0 = " << vec(c.reference_v0) << "\n"
        << "reference_v_rate = " << vec(c.reference_v_rate) << "\n";
  } else {
    out << "reference_start_q = " << vec(c.reference_start_q) << "\n"
        << "reference_start_v = " << vec(c.reference_start_v) << "\n";
  }
  out << "reference_step = " << number(c.reference_step) << "\n"
      << "horizon = " << number(c.horizon) << "\n"
      << "epsilon = " << number(c.epsilon) << "\n"
      << "omega = " << number(c.omega) << "\n"
      << "lambda0 = " << number(c.lambda0) << "\n"
      << "state_weight = " << number(c.state_weight) << "\n"
      << "terminal = " << to_string(c.terminal) << "\n\n"
      << "[solver]\n"
      << "method = " << to_string(c.method) << "\n"
      << "steps = " << c.steps << "\n"
      << "inner_step = " << number(c.inner_step) << "\n"
      << "newton_tol = " << number(c.newton_tol) << "\n"
      << "max_iters = " << c.max_iters << "\n"
      << "fd_step = " << number(c.fd_step) << "\n"
      << "damping = " << number(c.damping) << "\n"
      << "max_halvings = " << c.max_halvings << "\n"
      << "initial_costate = " << vec(c.initial_costate) << "\n"
      << "initial_guess = " << to_string(c.initial_guess) << "\n"
      << "enforce_first_interval = "
      << (c.enforce_first_interval ? "true" : "false") << "\n"
      << "slot_derivatives = " << to_string(c.slot_derivatives) << "\n\n"
      << "[output]\n"
      << "directory = " << c.directory << "\n"
      << "precision = " << c.precision << "\n"
      << "seed = " << c.seed << "\n\n"
      << "[compare]\n"
      << "pmp_cross_check = " << (c.pmp_cross_check ? "true" : "false")
      << "\n";
  return out.str();
}

ExperimentSetup build_setup(const ExperimentConfig& c) {
  c.validate();
  ExperimentSetup s;
  s.model = resolve_preset(c.preset);
  TrackingProblem& p = s.problem;
  p.initial = {to_eigen(c.initial_q), to_eigen(c.initial_v)};
  if (c.reference == ReferenceKind::affine) {
    p.reference = Reference::affine(to_eigen(c.reference_q0),
                                    to_eigen(c.reference_q_rate),
                                    to_eigen(c.reference_v0),
                                    to_eigen(c.reference_v_rate));
  } else {
    p.reference = Reference::rollout(
        s.model, {to_eigen(c.reference_start_q), to_eigen(c.reference_start_v)},
        c.horizon, c.reference_step);
  }
  p.horizon = c.horizon;
  p.epsilon = c.epsilon;
  p.omega = c.omega;
  p.lambda0 = c.lambda0;
  p.state_weight = c.state_weight;
  p.terminal = c.terminal;
  try {
    p.validate(*s.model);
  } catch (const ProblemError& e) {
    throw ConfigError(e.what());
  }

  s.shooting.inner_step = c.inner_step;
  s.shooting.fd_step = c.fd_step;
  s.shooting.damping = c.damping;
  s.shooting.max_halvings = c.max_halvings;
  if (c.newton_tol > 0.0) s.shooting.newton_tol = c.newton_tol;
  if (c.max_iters > 0) s.shooting.max_iters = c.max_iters;

  s.del.fd_step = c.fd_step;
  s.del.damping = c.damping;
  s.del.max_halvings = c.max_halvings;
  s.del.initial_guess = c.initial_guess;
  s.del.enforce_first_interval = c.enforce_first_interval;
  s.del.slot_derivatives = c.slot_derivatives;
  if (c.newton_tol > 0.0) s.del.newton_tol = c.newton_tol;
  if (c.max_iters > 0) s.del.max_iters = c.max_iters;

  s.grid = TimeGrid(0.0, c.horizon, c.steps);
  return s;
}

}  // namespace nhtrack
