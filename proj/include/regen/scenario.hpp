#pragma once

// JSON-backed run configuration. One Scenario feeds every subcommand: it
// fixes the model parameters, the actuator bank, the motion endpoints, the
// transcription grid, controller gains, simulation settings and solver
// options. Every field has a built-in default matching the studied arm, so
// an empty JSON object is a complete, runnable scenario.
//
// Validation is strict: unknown keys, wrong array sizes and out-of-range
// values raise ConfigError with the offending dotted path in the message.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "regen/actuator.hpp"
#include "regen/collocation.hpp"
#include "regen/controller.hpp"
#include "regen/model.hpp"
#include "regen/simulation.hpp"

namespace regen {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  Theta theta = default_theta();

  std::array<SemiActiveJoint, 3> joints = default_joints();
  Capacitor cap{};
  double eta = 1.0;

  Vec3 q_start{0.0, -M_PI / 2.0, 0.0};
  Vec3 qd_start = Vec3::Zero();
  Vec3 q_end{M_PI / 3.0, 0.0, M_PI / 4.0};
  Vec3 qd_end = Vec3::Zero();
  double horizon = 2.0;
  int intervals = 100;
  double v_bus = 27.0;
  CollocationProblem::Defects defects =
      CollocationProblem::Defects::backward_euler;
  CollocationProblem::Quadrature quadrature =
      CollocationProblem::Quadrature::trapezoid;

  ControllerGains gains{};
  std::optional<Theta> theta_plant;  // defaults to the nominal model

  double dt = 1e-3;
  double v_min = 0.1;

  SolveOptions solver{};

  std::string out_dir = "out";

  CollocationProblem problem(bool reverse = false) const {
    CollocationProblem p;
    p.q_start = reverse ? q_end : q_start;
    p.qd_start = reverse ? qd_end : qd_start;
    p.q_end = reverse ? q_start : q_end;
    p.qd_end = reverse ? qd_start : qd_end;
    p.horizon = horizon;
    p.intervals = intervals;
    p.theta = theta;
    p.joints = joints;
    p.v_bus = v_bus;
    p.defects = defects;
    p.quadrature = quadrature;
    return p;
  }

  SimOptions sim_options() const {
    SimOptions o;
    o.dt = dt;
    o.v_min = v_min;
    o.eta = eta;
    o.cap = cap;
    o.joints = joints;
    o.theta_plant = theta_plant.value_or(theta);
    o.controller = RobustController(theta, gains);
    return o;
  }
};

namespace detail {

inline void expect_keys(const nlohmann::json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double get_num(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + " must be a number");
  return j.get<double>();
}

template <int N>
inline Eigen::Matrix<double, N, 1> get_vec(const nlohmann::json& j,
                                           const std::string& path) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(path + " must be an array of " + std::to_string(N) +
                      " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = get_num(j[i], path);
  return v;
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& root) {
  detail::expect_keys(root, "scenario",
                      {"model", "actuators", "problem", "controller",
                       "simulation", "solver", "output"});
  Scenario s;

  if (root.contains("model")) {
    const auto& m = root["model"];
    detail::expect_keys(m, "model", {"theta"});
    if (m.contains("theta")) s.theta = detail::get_vec<13>(m["theta"], "model.theta");
  }

  if (root.contains("actuators")) {
    const auto& a = root["actuators"];
    detail::expect_keys(a, "actuators",
                        {"k", "emf_share", "a", "resistance", "capacitance",
                         "v_init", "eta"});
    const bool explicit_machine = a.contains("a") || a.contains("resistance");
    const bool ratio_machine = a.contains("k") || a.contains("emf_share");
    if (explicit_machine && ratio_machine) {
      throw ConfigError(
          "actuators: give either {a, resistance} or {k, emf_share}, not both");
    }
    if (explicit_machine) {
      if (!a.contains("a") || !a.contains("resistance")) {
        throw ConfigError("actuators: a and resistance must come together");
      }
      const Vec3 av = detail::get_vec<3>(a["a"], "actuators.a");
      const Vec3 rv = detail::get_vec<3>(a["resistance"], "actuators.resistance");
      for (int j = 0; j < 3; ++j) {
        if (!(av[j] > 0.0) || !(rv[j] > 0.0)) {
          throw ConfigError("actuators: machine constants must be positive");
        }
        s.joints[j] = SemiActiveJoint{av[j], rv[j]};
      }
    } else if (ratio_machine) {
      Vec3 kv(kDefaultK[0], kDefaultK[1], kDefaultK[2]);
      Vec3 share(kDefaultEmfShare[0], kDefaultEmfShare[1],
                 kDefaultEmfShare[2]);
      if (a.contains("k")) kv = detail::get_vec<3>(a["k"], "actuators.k");
      if (a.contains("emf_share")) {
        const auto& e = a["emf_share"];
        if (e.is_array()) {
          share = detail::get_vec<3>(e, "actuators.emf_share");
        } else {
          share.setConstant(detail::get_num(e, "actuators.emf_share"));
        }
      }
      for (int j = 0; j < 3; ++j) {
        if (!(share[j] > 0.0 && share[j] <= 1.0)) {
          throw ConfigError("actuators.emf_share must be in (0, 1]");
        }
        if (!(kv[j] > 0.0)) throw ConfigError("actuators.k must be positive");
        const double ka = share[j] * s.theta[10 + j];
        const double aj = ka / kv[j];
        s.joints[j] = SemiActiveJoint{aj, aj / kv[j]};
      }
    }
    if (a.contains("capacitance")) {
      s.cap.capacitance = detail::get_num(a["capacitance"], "actuators.capacitance");
      if (!(s.cap.capacitance > 0.0)) {
        throw ConfigError("actuators.capacitance must be positive");
      }
    }
    if (a.contains("v_init")) {
      s.cap.v_init = detail::get_num(a["v_init"], "actuators.v_init");
      if (!(s.cap.v_init > 0.0)) {
        throw ConfigError("actuators.v_init must be positive");
      }
    }
    if (a.contains("eta")) {
      s.eta = detail::get_num(a["eta"], "actuators.eta");
      if (!(s.eta > 0.0 && s.eta <= 1.0)) {
        throw ConfigError("actuators.eta must be in (0, 1]");
      }
    }
  }

  if (root.contains("problem")) {
    const auto& p = root["problem"];
    detail::expect_keys(p, "problem",
                        {"q_start", "qd_start", "q_end", "qd_end", "horizon",
                         "intervals", "v_bus", "defects", "quadrature"});
    if (p.contains("q_start")) s.q_start = detail::get_vec<3>(p["q_start"], "problem.q_start");
    if (p.contains("qd_start")) s.qd_start = detail::get_vec<3>(p["qd_start"], "problem.qd_start");
    if (p.contains("q_end")) s.q_end = detail::get_vec<3>(p["q_end"], "problem.q_end");
    if (p.contains("qd_end")) s.qd_end = detail::get_vec<3>(p["qd_end"], "problem.qd_end");
    if (p.contains("horizon")) {
      s.horizon = detail::get_num(p["horizon"], "problem.horizon");
      if (!(s.horizon > 0.0)) throw ConfigError("problem.horizon must be positive");
    }
    if (p.contains("intervals")) {
      if (!p["intervals"].is_number_integer()) {
        throw ConfigError("problem.intervals must be an integer");
      }
      s.intervals = p["intervals"].get<int>();
      if (s.intervals < 2) throw ConfigError("problem.intervals must be >= 2");
    }
    if (p.contains("v_bus")) {
      s.v_bus = detail::get_num(p["v_bus"], "problem.v_bus");
      if (!(s.v_bus > 0.0)) throw ConfigError("problem.v_bus must be positive");
    }
    if (p.contains("defects")) {
      const std::string d = p["defects"].get<std::string>();
      if (d == "backward_euler") {
        s.defects = CollocationProblem::Defects::backward_euler;
      } else if (d == "trapezoidal") {
        s.defects = CollocationProblem::Defects::trapezoidal;
      } else {
        throw ConfigError(
            "problem.defects must be 'backward_euler' or 'trapezoidal'");
      }
    }
    if (p.contains("quadrature")) {
      const std::string q = p["quadrature"].get<std::string>();
      if (q == "trapezoid") {
        s.quadrature = CollocationProblem::Quadrature::trapezoid;
      } else if (q == "rectangle") {
        s.quadrature = CollocationProblem::Quadrature::rectangle;
      } else {
        throw ConfigError(
            "problem.quadrature must be 'trapezoid' or 'rectangle'");
      }
    }
  }

  if (root.contains("controller")) {
    const auto& c = root["controller"];
    detail::expect_keys(c, "controller", {"lambda", "gain", "rho", "epsilon"});
    if (c.contains("lambda")) s.gains.lambda = detail::get_vec<3>(c["lambda"], "controller.lambda");
    if (c.contains("gain")) s.gains.k = detail::get_vec<3>(c["gain"], "controller.gain");
    if (c.contains("rho")) s.gains.rho = detail::get_num(c["rho"], "controller.rho");
    if (c.contains("epsilon")) {
      s.gains.epsilon = detail::get_num(c["epsilon"], "controller.epsilon");
      if (!(s.gains.epsilon > 0.0)) {
        throw ConfigError("controller.epsilon must be positive");
      }
    }
    if (s.gains.rho < 0.0) throw ConfigError("controller.rho must be >= 0");
    for (int j = 0; j < 3; ++j) {
      if (s.gains.lambda[j] < 0.0 || s.gains.k[j] < 0.0) {
        throw ConfigError("controller gains must be nonnegative");
      }
    }
  }

  if (root.contains("simulation")) {
    const auto& sm = root["simulation"];
    detail::expect_keys(sm, "simulation", {"dt", "v_min", "theta_plant"});
    if (sm.contains("dt")) {
      s.dt = detail::get_num(sm["dt"], "simulation.dt");
      if (!(s.dt > 0.0)) throw ConfigError("simulation.dt must be positive");
    }
    if (sm.contains("v_min")) {
      s.v_min = detail::get_num(sm["v_min"], "simulation.v_min");
      if (!(s.v_min > 0.0)) throw ConfigError("simulation.v_min must be positive");
    }
    if (sm.contains("theta_plant")) {
      s.theta_plant = detail::get_vec<13>(sm["theta_plant"], "simulation.theta_plant");
    }
  }

  if (root.contains("solver")) {
    const auto& so = root["solver"];
    detail::expect_keys(so, "solver",
                        {"random_starts", "seed", "parallel", "tol",
                         "feas_tol", "max_outer", "max_inner"});
    if (so.contains("random_starts")) {
      s.solver.random_starts = so["random_starts"].get<int>();
      if (s.solver.random_starts < 0) {
        throw ConfigError("solver.random_starts must be >= 0");
      }
    }
    if (so.contains("seed")) s.solver.seed = so["seed"].get<unsigned>();
    if (so.contains("parallel")) s.solver.parallel = so["parallel"].get<bool>();
    if (so.contains("tol")) s.solver.nlp.tol = detail::get_num(so["tol"], "solver.tol");
    if (so.contains("feas_tol")) {
      s.solver.nlp.feas_tol = detail::get_num(so["feas_tol"], "solver.feas_tol");
      s.solver.feasible_tol = s.solver.nlp.feas_tol;
    }
    if (so.contains("max_outer")) s.solver.nlp.max_outer = so["max_outer"].get<int>();
    if (so.contains("max_inner")) s.solver.nlp.max_inner = so["max_inner"].get<int>();
  }

  if (root.contains("output")) {
    const auto& o = root["output"];
    detail::expect_keys(o, "output", {"directory"});
    if (o.contains("directory")) s.out_dir = o["directory"].get<std::string>();
  }

  // Cross-field checks.
  const Theta plant = s.theta_plant.value_or(s.theta);
  for (int j = 0; j < 3; ++j) {
    if (mechanical_damping(s.joints[j], plant[10 + j]) < -1e-9) {
      throw ConfigError(
          "actuators: back-EMF damping k*a exceeds the identified viscous "
          "friction of joint " +
          std::to_string(j + 1));
    }
  }
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["model"]["theta"] = std::vector<double>(s.theta.data(), s.theta.data() + 13);
  j["actuators"]["a"] = {s.joints[0].a, s.joints[1].a, s.joints[2].a};
  j["actuators"]["resistance"] = {s.joints[0].R, s.joints[1].R, s.joints[2].R};
  j["actuators"]["capacitance"] = s.cap.capacitance;
  j["actuators"]["v_init"] = s.cap.v_init;
  j["actuators"]["eta"] = s.eta;
  j["problem"]["q_start"] = {s.q_start[0], s.q_start[1], s.q_start[2]};
  j["problem"]["qd_start"] = {s.qd_start[0], s.qd_start[1], s.qd_start[2]};
  j["problem"]["q_end"] = {s.q_end[0], s.q_end[1], s.q_end[2]};
  j["problem"]["qd_end"] = {s.qd_end[0], s.qd_end[1], s.qd_end[2]};
  j["problem"]["horizon"] = s.horizon;
  j["problem"]["intervals"] = s.intervals;
  j["problem"]["v_bus"] = s.v_bus;
  j["problem"]["defects"] =
      s.defects == CollocationProblem::Defects::backward_euler
          ? "backward_euler"
          : "trapezoidal";
  j["problem"]["quadrature"] =
      s.quadrature == CollocationProblem::Quadrature::trapezoid ? "trapezoid"
                                                                : "rectangle";
  j["controller"]["lambda"] = {s.gains.lambda[0], s.gains.lambda[1],
                               s.gains.lambda[2]};
  j["controller"]["gain"] = {s.gains.k[0], s.gains.k[1], s.gains.k[2]};
  j["controller"]["rho"] = s.gains.rho;
  j["controller"]["epsilon"] = s.gains.epsilon;
  j["simulation"]["dt"] = s.dt;
  j["simulation"]["v_min"] = s.v_min;
  if (s.theta_plant) {
    j["simulation"]["theta_plant"] =
        std::vector<double>(s.theta_plant->data(), s.theta_plant->data() + 13);
  }
  j["solver"]["random_starts"] = s.solver.random_starts;
  j["solver"]["seed"] = s.solver.seed;
  j["solver"]["parallel"] = s.solver.parallel;
  j["solver"]["tol"] = s.solver.nlp.tol;
  j["solver"]["feas_tol"] = s.solver.nlp.feas_tol;
  j["solver"]["max_outer"] = s.solver.nlp.max_outer;
  j["solver"]["max_inner"] = s.solver.nlp.max_inner;
  j["output"]["directory"] = s.out_dir;
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace regen
