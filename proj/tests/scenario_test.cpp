#include "regen/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace regen {
namespace {

using nlohmann::json;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Scenario, EmptyObjectIsACompleteRunnableScenario) {
  const Scenario s = scenario_from_json(json::object());

  EXPECT_NEAR((s.theta - default_theta()).norm(), 0.0, 0.0);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(s.joints[j].a, default_joints()[j].a);
    EXPECT_DOUBLE_EQ(s.joints[j].R, default_joints()[j].R);
  }
  EXPECT_DOUBLE_EQ(s.cap.capacitance, 165.0);
  EXPECT_DOUBLE_EQ(s.cap.v_init, 27.0);
  EXPECT_DOUBLE_EQ(s.eta, 1.0);
  EXPECT_DOUBLE_EQ(s.horizon, 2.0);
  EXPECT_EQ(s.intervals, 100);
  EXPECT_DOUBLE_EQ(s.v_bus, 27.0);
  EXPECT_EQ(s.defects, CollocationProblem::Defects::backward_euler);
  EXPECT_EQ(s.quadrature, CollocationProblem::Quadrature::trapezoid);
  EXPECT_DOUBLE_EQ(s.dt, 1e-3);
  EXPECT_DOUBLE_EQ(s.v_min, 0.1);
  EXPECT_FALSE(s.theta_plant.has_value());
  EXPECT_EQ(s.solver.random_starts, 8);
  EXPECT_EQ(s.out_dir, "out");

  const ControllerGains g;
  EXPECT_NEAR((s.gains.lambda - g.lambda).norm(), 0.0, 0.0);
  EXPECT_NEAR((s.gains.k - g.k).norm(), 0.0, 0.0);
  EXPECT_DOUBLE_EQ(s.gains.rho, g.rho);
  EXPECT_DOUBLE_EQ(s.gains.epsilon, g.epsilon);
}

TEST(Scenario, ProblemViewSwapsEndpointsOnReverse) {
  json cfg;
  cfg["problem"]["q_start"] = {0.1, 0.2, 0.3};
  cfg["problem"]["q_end"] = {0.4, 0.5, 0.6};
  cfg["problem"]["qd_end"] = {0.0, 0.1, 0.0};
  const Scenario s = scenario_from_json(cfg);

  const CollocationProblem fwd = s.problem();
  EXPECT_DOUBLE_EQ(fwd.q_start[0], 0.1);
  EXPECT_DOUBLE_EQ(fwd.q_end[2], 0.6);
  EXPECT_DOUBLE_EQ(fwd.qd_end[1], 0.1);

  const CollocationProblem back = s.problem(true);
  EXPECT_DOUBLE_EQ(back.q_start[0], 0.4);
  EXPECT_DOUBLE_EQ(back.q_end[0], 0.1);
  EXPECT_DOUBLE_EQ(back.qd_start[1], 0.1);
  EXPECT_DOUBLE_EQ(back.qd_end[1], 0.0);
  EXPECT_EQ(back.intervals, s.intervals);
  EXPECT_DOUBLE_EQ(back.v_bus, s.v_bus);
}

TEST(Scenario, SimOptionsCarryPlantOverrideAndTiming) {
  json cfg;
  cfg["simulation"]["dt"] = 5e-4;
  cfg["simulation"]["v_min"] = 0.5;
  const Theta th = default_theta();
  std::vector<double> plant(th.data(), th.data() + 13);
  plant[0] *= 1.1;
  cfg["simulation"]["theta_plant"] = plant;
  const Scenario s = scenario_from_json(cfg);

  ASSERT_TRUE(s.theta_plant.has_value());
  const SimOptions o = s.sim_options();
  EXPECT_DOUBLE_EQ(o.dt, 5e-4);
  EXPECT_DOUBLE_EQ(o.v_min, 0.5);
  EXPECT_DOUBLE_EQ(o.theta_plant[0], default_theta()[0] * 1.1);
  EXPECT_DOUBLE_EQ(o.theta_plant[5], default_theta()[5]);

  const SimOptions nominal = scenario_from_json(json::object()).sim_options();
  EXPECT_NEAR((nominal.theta_plant - default_theta()).norm(), 0.0, 0.0);
}

TEST(Scenario, ScalarEmfShareBroadcastsToEveryJoint) {
  json cfg;
  cfg["actuators"]["emf_share"] = 0.5;
  const Scenario s = scenario_from_json(cfg);
  for (int j = 0; j < 3; ++j) {
    const double ka = s.joints[j].k() * s.joints[j].a;
    EXPECT_NEAR(ka, 0.5 * s.theta[10 + j], 1e-12);
    EXPECT_NEAR(s.joints[j].k(), kDefaultK[j], 1e-12);
  }
}

TEST(Scenario, PerJointEmfShareArrayIsHonored) {
  json cfg;
  cfg["actuators"]["emf_share"] = {0.4, 0.6, 0.8};
  cfg["actuators"]["k"] = {2.0, 3.0, 4.0};
  const Scenario s = scenario_from_json(cfg);
  const Vec3 share(0.4, 0.6, 0.8);
  const Vec3 k(2.0, 3.0, 4.0);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(s.joints[j].k(), k[j], 1e-12);
    EXPECT_NEAR(s.joints[j].k() * s.joints[j].a, share[j] * s.theta[10 + j],
                1e-12);
  }
}

TEST(Scenario, ExplicitMachineConstantsTakeBothFields) {
  json cfg;
  cfg["actuators"]["a"] = {1.0, 2.0, 3.0};
  cfg["actuators"]["resistance"] = {0.5, 0.5, 0.5};
  const Scenario s = scenario_from_json(cfg);
  EXPECT_DOUBLE_EQ(s.joints[1].a, 2.0);
  EXPECT_DOUBLE_EQ(s.joints[2].R, 0.5);
  EXPECT_DOUBLE_EQ(s.joints[0].k(), 2.0);

  json half;
  half["actuators"]["a"] = {1.0, 2.0, 3.0};
  EXPECT_THROW(scenario_from_json(half), ConfigError);

  json mixed;
  mixed["actuators"]["a"] = {1.0, 2.0, 3.0};
  mixed["actuators"]["resistance"] = {0.5, 0.5, 0.5};
  mixed["actuators"]["emf_share"] = 0.9;
  EXPECT_THROW(scenario_from_json(mixed), ConfigError);
}

TEST(Scenario, UnknownKeysAreRejectedWithTheirPath) {
  try {
    scenario_from_json(json::parse(R"({"problms": {}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("problms"), std::string::npos);
  }

  try {
    scenario_from_json(json::parse(R"({"problem": {"horzon": 1.0}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("problem"), std::string::npos);
    EXPECT_NE(msg.find("horzon"), std::string::npos);
  }
}

TEST(Scenario, OutOfRangeValuesAreRejected) {
  EXPECT_THROW(scenario_from_json(json::parse(R"({"problem":{"horizon":0.0}})")),
               ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"problem":{"intervals":1}})")),
               ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"problem":{"intervals":10.5}})")),
      ConfigError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"problem":{"v_bus":-27}})")),
               ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"problem":{"defects":"midpoint"}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"problem":{"quadrature":"simpson"}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"actuators":{"emf_share":1.5}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"actuators":{"eta":0.0}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"controller":{"epsilon":0.0}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"controller":{"rho":-1.0}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"controller":{"gain":[1,-1,1]}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"simulation":{"dt":0.0}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"solver":{"random_starts":-1}})")),
      ConfigError);
  EXPECT_THROW(
      scenario_from_json(json::parse(R"({"model":{"theta":[1,2,3]}})")),
      ConfigError);
}

TEST(Scenario, BackEmfDampingMustNotExceedViscousFriction) {
  // Electrical damping k*a above the plant's viscous coefficient would make
  // the passive machine inject energy; the config layer refuses it.
  json cfg;
  cfg["actuators"]["emf_share"] = 1.0;
  const Theta th = default_theta();
  std::vector<double> plant(th.data(), th.data() + 13);
  plant[10] *= 0.5;
  cfg["simulation"]["theta_plant"] = plant;
  EXPECT_THROW(scenario_from_json(cfg), ConfigError);

  cfg["actuators"]["emf_share"] = 0.45;
  EXPECT_NO_THROW(scenario_from_json(cfg));
}

TEST(Scenario, FeasTolDrivesBothSolverThresholds) {
  json cfg;
  cfg["solver"]["feas_tol"] = 1e-4;
  cfg["solver"]["tol"] = 1e-3;
  cfg["solver"]["max_outer"] = 7;
  cfg["solver"]["seed"] = 42;
  cfg["solver"]["parallel"] = false;
  const Scenario s = scenario_from_json(cfg);
  EXPECT_DOUBLE_EQ(s.solver.nlp.feas_tol, 1e-4);
  EXPECT_DOUBLE_EQ(s.solver.feasible_tol, 1e-4);
  EXPECT_DOUBLE_EQ(s.solver.nlp.tol, 1e-3);
  EXPECT_EQ(s.solver.nlp.max_outer, 7);
  EXPECT_EQ(s.solver.seed, 42u);
  EXPECT_FALSE(s.solver.parallel);
}

TEST(Scenario, JsonRoundTripPreservesEveryField) {
  json cfg;
  cfg["actuators"]["emf_share"] = {0.4, 0.6, 0.8};
  cfg["actuators"]["capacitance"] = 80.0;
  cfg["actuators"]["eta"] = 0.9;
  cfg["problem"]["horizon"] = 1.5;
  cfg["problem"]["intervals"] = 40;
  cfg["problem"]["defects"] = "trapezoidal";
  cfg["problem"]["quadrature"] = "rectangle";
  cfg["controller"]["rho"] = 3.0;
  cfg["simulation"]["dt"] = 2e-3;
  cfg["solver"]["random_starts"] = 3;
  cfg["output"]["directory"] = "elsewhere";
  const Scenario s = scenario_from_json(cfg);

  const Scenario r = scenario_from_json(scenario_to_json(s));
  EXPECT_NEAR((r.theta - s.theta).norm(), 0.0, 0.0);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(r.joints[j].a, s.joints[j].a);
    EXPECT_DOUBLE_EQ(r.joints[j].R, s.joints[j].R);
  }
  EXPECT_DOUBLE_EQ(r.cap.capacitance, 80.0);
  EXPECT_DOUBLE_EQ(r.eta, 0.9);
  EXPECT_DOUBLE_EQ(r.horizon, 1.5);
  EXPECT_EQ(r.intervals, 40);
  EXPECT_EQ(r.defects, CollocationProblem::Defects::trapezoidal);
  EXPECT_EQ(r.quadrature, CollocationProblem::Quadrature::rectangle);
  EXPECT_DOUBLE_EQ(r.gains.rho, 3.0);
  EXPECT_DOUBLE_EQ(r.dt, 2e-3);
  EXPECT_EQ(r.solver.random_starts, 3);
  EXPECT_EQ(r.theta_plant.has_value(), s.theta_plant.has_value());
  EXPECT_EQ(r.out_dir, "elsewhere");
}

TEST(Scenario, LoadScenarioReportsFileAndParseFailures) {
  EXPECT_THROW(load_scenario(temp_path("no_such_scenario.json")), ConfigError);

  const std::string bad = temp_path("regen_bad_scenario.json");
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  try {
    load_scenario(bad);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("parse error"), std::string::npos);
  }
  std::remove(bad.c_str());

  const std::string good = temp_path("regen_good_scenario.json");
  {
    std::ofstream out(good);
    out << R"({"problem": {"horizon": 3.0}})";
  }
  const Scenario s = load_scenario(good);
  EXPECT_DOUBLE_EQ(s.horizon, 3.0);
  std::remove(good.c_str());
}

}  // namespace
}  // namespace regen
