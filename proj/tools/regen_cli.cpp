// Command-line front end.
//
// Subcommands:
//   optimize        solve the point-to-point energy-recovery problem
//   simulate        track solution files in closed loop and audit the result
//   compare         pit the optimized motion against perturbed neighbors
//   audit           recompute the energy ledger of a trace or solution file
//   gradient-check  verify analytic NLP derivatives against finite differences
//
// Exit codes: 0 success, 1 configuration or input error, 2 solver or check
// failure, 3 storage depleted during simulation.
//
// Output directory precedence: --out flag, then REGEN_OUTPUT_DIR, then the
// scenario's output.directory.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regen/regen.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kFailure = 2;
constexpr int kDepleted = 3;
constexpr const char* kOutputDirEnv = "REGEN_OUTPUT_DIR";

struct CommonArgs {
  std::string config_path;
  std::string out_dir_flag;
};

regen::Scenario load(const CommonArgs& args) {
  regen::Scenario sc = args.config_path.empty()
                           ? regen::Scenario{}
                           : regen::load_scenario(args.config_path);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    sc.out_dir = env;
  }
  if (!args.out_dir_flag.empty()) sc.out_dir = args.out_dir_flag;
  // Every run records the scenario it actually used, defaults and overrides
  // included, in a form that parses back into the same scenario.
  regen::write_json_file(
      (std::filesystem::path(sc.out_dir) / "effective_config.json").string(),
      regen::scenario_to_json(sc));
  return sc;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void print_start_summary(const regen::CollocationSolution& sol) {
  int feasible = 0;
  for (const auto& st : sol.starts) feasible += st.feasible ? 1 : 0;
  std::cout << "  starts: " << sol.starts.size() << " (" << feasible
            << " feasible), selected #" << sol.selected_start << "\n";
  std::cout << "  J = " << regen::detail::sig6(sol.objective)
            << " J, max defect = " << regen::detail::sig6(sol.max_defect)
            << ", " << sol.report.message << "\n";
}

int cmd_optimize(const CommonArgs& common, const std::string& direction) {
  const regen::Scenario sc = load(common);
  std::vector<std::pair<std::string, bool>> legs;
  if (direction == "forward" || direction == "both") {
    legs.emplace_back("forward", false);
  }
  if (direction == "return" || direction == "both") {
    legs.emplace_back("return", true);
  }

  std::vector<regen::EnergyLedger> ledgers;
  for (const auto& [name, reverse] : legs) {
    const regen::CollocationProblem problem = sc.problem(reverse);
    std::cout << "optimizing " << name << " motion (N = " << problem.intervals
              << ", T = " << problem.horizon << " s)\n";
    regen::CollocationSolution sol;
    try {
      sol = regen::solve(problem, sc.solver);
    } catch (const regen::OptimizationError& e) {
      std::cerr << "optimize " << name << ": " << e.what() << "\n";
      regen::write_solution_csv(
          join(sc.out_dir, "solution_" + name + "_failed.csv"), e.best);
      return kFailure;
    }
    print_start_summary(sol);

    regen::write_solution_csv(join(sc.out_dir, "solution_" + name + ".csv"),
                              sol);
    regen::write_json_file(join(sc.out_dir, "solution_" + name + ".json"),
                           regen::solution_summary_json(sol, problem));
    regen::EnergyLedger lg = regen::audit(sol, sc.theta, sc.joints);
    lg.label = name;
    regen::write_json_file(join(sc.out_dir, "sankey_" + name + ".json"),
                           regen::sankey_json(lg));
    ledgers.push_back(std::move(lg));
  }

  const std::string table = regen::energy_table(ledgers);
  std::cout << table;
  regen::write_text_file(join(sc.out_dir, "energy_table.txt"), table);
  nlohmann::json ej = nlohmann::json::array();
  for (const auto& lg : ledgers) ej.push_back(regen::ledger_json(lg));
  regen::write_json_file(join(sc.out_dir, "energy.json"), ej);
  return kOk;
}

int cmd_simulate(const CommonArgs& common, std::vector<std::string> inputs) {
  const regen::Scenario sc = load(common);
  if (inputs.empty()) {
    inputs.push_back(join(sc.out_dir, "solution_forward.csv"));
  }
  std::vector<std::shared_ptr<const regen::Reference>> refs;
  for (const auto& path : inputs) {
    const regen::CollocationSolution sol = regen::read_solution_csv(path);
    refs.push_back(std::make_shared<regen::HermiteReference>(sol.t, sol.q,
                                                             sol.qd));
  }
  const std::shared_ptr<const regen::Reference> ref =
      refs.size() == 1
          ? refs.front()
          : std::make_shared<regen::ConcatReference>(std::move(refs));

  const regen::SimTrace tr = regen::simulate(*ref, sc.sim_options());
  regen::write_trace_csv(join(sc.out_dir, "trace.csv"), tr);
  regen::write_json_file(join(sc.out_dir, "sim_summary.json"),
                         regen::sim_summary_json(tr));

  regen::EnergyLedger lg =
      regen::audit(tr, sc.theta_plant.value_or(sc.theta), sc.joints, sc.cap,
                   sc.eta);
  lg.label = "simulated";
  regen::write_json_file(join(sc.out_dir, "audit.json"),
                         regen::ledger_json(lg));
  regen::write_json_file(join(sc.out_dir, "sankey_simulated.json"),
                         regen::sankey_json(lg));
  std::cout << regen::energy_table({lg});
  std::cout << "status: "
            << (tr.status == regen::SimStatus::ok ? "ok" : "depleted")
            << ", v " << regen::detail::sig6(tr.v.front()) << " -> "
            << regen::detail::sig6(tr.v.back()) << " V\n";

  if (tr.status == regen::SimStatus::depleted) {
    std::cerr << "storage depleted at t = " << tr.t.back() << " s\n";
    return kDepleted;
  }
  if (lg.relative_residual() > 0.01) {
    std::cerr << "energy ledger inconsistent: residual "
              << regen::detail::sig6(lg.residual) << " J ("
              << regen::detail::sig6(100.0 * lg.relative_residual())
              << " % of gross flows)\n";
    return kFailure;
  }
  return kOk;
}

int cmd_compare(const CommonArgs& common, const std::string& base_path,
                const std::vector<std::string>& against) {
  const regen::Scenario sc = load(common);
  std::string base = base_path.empty()
                         ? join(sc.out_dir, "solution_forward.csv")
                         : base_path;
  regen::CollocationSolution base_sol;
  if (std::filesystem::exists(base)) {
    base_sol = regen::read_solution_csv(base);
  } else {
    if (!base_path.empty()) {
      std::cerr << "compare: no such solution file: " << base << "\n";
      return kConfigError;
    }
    std::cout << "no stored solution, optimizing first\n";
    base_sol = regen::solve(sc.problem(false), sc.solver);
    regen::write_solution_csv(base, base_sol);
  }

  const auto base_ref =
      std::make_shared<regen::HermiteReference>(base_sol.t, base_sol.q,
                                                base_sol.qd);
  std::vector<std::pair<std::string, std::shared_ptr<const regen::Reference>>>
      motions;
  motions.emplace_back("optimal", base_ref);
  if (against.empty()) {
    motions.emplace_back(
        "neighbor+", std::make_shared<regen::GaussianNeighborReference>(
                         base_ref, +1.0));
    motions.emplace_back(
        "neighbor-", std::make_shared<regen::GaussianNeighborReference>(
                         base_ref, -1.0));
  } else {
    for (const auto& path : against) {
      const regen::CollocationSolution s = regen::read_solution_csv(path);
      motions.emplace_back(
          std::filesystem::path(path).stem().string(),
          std::make_shared<regen::HermiteReference>(s.t, s.q, s.qd));
    }
  }

  const regen::SimOptions sim_opts = sc.sim_options();
  std::vector<regen::EnergyLedger> ledgers;
  bool depleted = false;
  for (const auto& [name, ref] : motions) {
    const regen::SimTrace tr = regen::simulate(*ref, sim_opts);
    depleted = depleted || tr.status == regen::SimStatus::depleted;
    regen::EnergyLedger lg =
        regen::audit(tr, sc.theta_plant.value_or(sc.theta), sc.joints, sc.cap,
                     sc.eta);
    lg.label = name;
    ledgers.push_back(std::move(lg));
    regen::write_trace_csv(join(sc.out_dir, "trace_" + name + ".csv"), tr);
  }

  const std::string table = regen::energy_table(ledgers);
  std::cout << table;
  bool dominates = true;
  for (std::size_t i = 1; i < ledgers.size(); ++i) {
    if (ledgers[0].total_motor >= ledgers[i].total_motor) dominates = false;
  }
  std::cout << "optimal consumes least: " << (dominates ? "yes" : "no")
            << "\n";
  nlohmann::json cj;
  cj["ledgers"] = nlohmann::json::array();
  for (const auto& lg : ledgers) cj["ledgers"].push_back(regen::ledger_json(lg));
  cj["optimal_dominates"] = dominates;
  regen::write_json_file(join(sc.out_dir, "compare.json"), cj);
  regen::write_text_file(join(sc.out_dir, "compare_table.txt"), table);
  return depleted ? kDepleted : kOk;
}

int cmd_audit(const CommonArgs& common, const std::string& trace_path,
              const std::string& solution_path) {
  const regen::Scenario sc = load(common);
  regen::EnergyLedger lg;
  bool simulated = false;
  if (!trace_path.empty()) {
    const regen::SimTrace tr = regen::read_trace_csv(trace_path);
    lg = regen::audit(tr, sc.theta_plant.value_or(sc.theta), sc.joints, sc.cap,
                      sc.eta);
    lg.label = std::filesystem::path(trace_path).stem().string();
    simulated = true;
  } else {
    const regen::CollocationSolution sol =
        regen::read_solution_csv(solution_path);
    lg = regen::audit(sol, sc.theta, sc.joints);
    lg.label = std::filesystem::path(solution_path).stem().string();
  }
  std::cout << regen::energy_table({lg});
  regen::write_json_file(join(sc.out_dir, "audit.json"),
                         regen::ledger_json(lg));
  regen::write_json_file(join(sc.out_dir, "sankey_" + lg.label + ".json"),
                         regen::sankey_json(lg));
  if (simulated && lg.relative_residual() > 0.01) {
    std::cerr << "energy ledger inconsistent: residual "
              << regen::detail::sig6(lg.residual) << " J ("
              << regen::detail::sig6(100.0 * lg.relative_residual())
              << " % of gross flows)\n";
    return kFailure;
  }
  return kOk;
}

int cmd_gradient_check(const CommonArgs& common, int points, unsigned seed) {
  const regen::Scenario sc = load(common);
  const regen::GradientCheckResult res =
      regen::gradient_check(sc.problem(false), points, seed);
  std::cout << "gradient check over " << points << " points\n";
  std::cout << "  objective gradient max rel error: "
            << regen::detail::sig6(res.objective_error) << "\n";
  std::cout << "  constraint Jacobian max rel error: "
            << regen::detail::sig6(res.jacobian_error) << "\n";
  nlohmann::json j;
  j["points"] = points;
  j["objective_error"] = res.objective_error;
  j["jacobian_error"] = res.jacobian_error;
  j["max_rel_error"] = res.max_rel_error;
  j["per_point"] = res.per_point;
  regen::write_json_file(join(sc.out_dir, "gradient_check.json"), j);
  if (res.max_rel_error >= 1e-5) {
    std::cerr << "gradient check FAILED: max rel error "
              << regen::detail::sig6(res.max_rel_error) << "\n";
    return kFailure;
  }
  std::cout << "  OK (max " << regen::detail::sig6(res.max_rel_error)
            << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Trajectory optimization and simulation for a three-joint arm with "
      "regenerative semi-active drives"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("-c,--config", common.config_path,
                 "Scenario JSON file (defaults are built in)");
  app.add_option("-o,--out", common.out_dir_flag,
                 "Output directory (overrides config and " +
                     std::string(kOutputDirEnv) + ")");

  auto* optimize = app.add_subcommand(
      "optimize", "Solve the energy-optimal point-to-point problem");
  std::string direction = "both";
  optimize->add_option("--direction", direction,
                       "Which motion to solve: forward, return or both")
      ->check(CLI::IsMember({"forward", "return", "both"}));

  auto* simulate =
      app.add_subcommand("simulate", "Closed-loop simulation of solution files");
  std::vector<std::string> sim_inputs;
  simulate->add_option("-i,--input", sim_inputs,
                       "Solution CSVs to track back to back (default: "
                       "<out>/solution_forward.csv)");

  auto* compare = app.add_subcommand(
      "compare", "Simulate the optimum against perturbed neighbor motions");
  std::string base_path;
  std::vector<std::string> against;
  compare->add_option("-i,--input", base_path,
                      "Base solution CSV (default: <out>/solution_forward.csv)");
  compare->add_option("--against", against,
                      "Extra solution CSVs instead of the Gaussian neighbors");

  auto* audit = app.add_subcommand(
      "audit", "Recompute the energy ledger of a trace or solution file");
  std::string trace_path, solution_path;
  audit->add_option("--trace", trace_path, "Simulation trace CSV");
  audit->add_option("--solution", solution_path, "Planned solution CSV");

  auto* gradcheck = app.add_subcommand(
      "gradient-check", "Finite-difference validation of NLP derivatives");
  int points = 10;
  unsigned seed = 7;
  gradcheck->add_option("--points", points, "Number of sample points")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", seed, "RNG seed for the sample points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*optimize) return cmd_optimize(common, direction);
    if (*simulate) return cmd_simulate(common, sim_inputs);
    if (*compare) return cmd_compare(common, base_path, against);
    if (*audit) {
      if (trace_path.empty() == solution_path.empty()) {
        std::cerr << "audit: give exactly one of --trace or --solution\n";
        return kConfigError;
      }
      return cmd_audit(common, trace_path, solution_path);
    }
    if (*gradcheck) return cmd_gradient_check(common, points, seed);
  } catch (const regen::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const regen::IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const regen::OptimizationError& e) {
    std::cerr << "optimization failed: " << e.what() << "\n";
    return kFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kConfigError;
}
