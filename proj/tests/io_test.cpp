#include "regen/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace regen {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_lines(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

CollocationSolution awkward_solution() {
  CollocationSolution sol;
  sol.t = {0.0, 1.0 / 3.0, 2.0 / 3.0};
  sol.q = {Vec3(M_PI, -2.5e-7, 6.02e23), Vec3(0.1, 0.2, 0.3),
           Vec3(-1e-300, 1e300, 0.0)};
  sol.qd = {Vec3::Zero(), Vec3(0.5, -0.5, 0.25), Vec3::Ones()};
  sol.tau = {Vec3(135.51, -217.85, 117.67), Vec3(1e-17, -1e-17, 0.0),
             Vec3::Zero()};
  return sol;
}

TEST(Io, SolutionCsvRoundTripsBitExactly) {
  const CollocationSolution sol = awkward_solution();
  const std::string path = temp_path("regen_sol_roundtrip.csv");
  write_solution_csv(path, sol);
  const CollocationSolution back = read_solution_csv(path);
  std::remove(path.c_str());

  ASSERT_EQ(back.t.size(), sol.t.size());
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    EXPECT_EQ(back.t[i], sol.t[i]);
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(back.q[i][j], sol.q[i][j]);
      EXPECT_EQ(back.qd[i][j], sol.qd[i][j]);
      EXPECT_EQ(back.tau[i][j], sol.tau[i][j]);
    }
  }
}

TEST(Io, TraceCsvRoundTripsBitExactly) {
  const HoldReference ref(Vec3(0.0, -M_PI / 2.0, 0.0), 0.1);
  SimOptions opt;
  const SimTrace tr = simulate(ref, opt);
  const std::string path = temp_path("regen_trace_roundtrip.csv");
  write_trace_csv(path, tr);
  const SimTrace back = read_trace_csv(path);
  std::remove(path.c_str());

  ASSERT_EQ(back.size(), tr.size());
  EXPECT_EQ(back.duration, tr.t.back());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_EQ(back.t[i], tr.t[i]);
    EXPECT_EQ(back.v[i], tr.v[i]);
    EXPECT_EQ(back.i_cap[i], tr.i_cap[i]);
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(back.qd_ref[i][j], tr.qd_ref[i][j]);
      EXPECT_EQ(back.q[i][j], tr.q[i][j]);
      EXPECT_EQ(back.qd[i][j], tr.qd[i][j]);
      EXPECT_EQ(back.tau[i][j], tr.tau[i][j]);
      EXPECT_EQ(back.duty[i][j], tr.duty[i][j]);
      EXPECT_EQ(back.saturated[i][j], tr.saturated[i][j]);
      EXPECT_EQ(back.p_motor[i][j], tr.p_motor[i][j]);
    }
  }
}

TEST(Io, RejectsMalformedSolutionFiles) {
  EXPECT_THROW(read_solution_csv(temp_path("regen_no_such.csv")), IoError);

  const std::string path = temp_path("regen_bad_sol.csv");

  write_lines(path, "");
  EXPECT_THROW(read_solution_csv(path), IoError);

  write_lines(path, "time,q1\n0,0\n");
  EXPECT_THROW(read_solution_csv(path), IoError);

  write_lines(path, std::string(kSolutionHeader) + "\n0,0,0,0,0,0,0,0,0\n");
  EXPECT_THROW(read_solution_csv(path), IoError);

  write_lines(path,
              std::string(kSolutionHeader) + "\n0,0,0,oops,0,0,0,0,0,0\n");
  EXPECT_THROW(read_solution_csv(path), IoError);

  write_lines(path, std::string(kSolutionHeader) + "\n0,0,0,0,0,0,0,0,0,0\n");
  EXPECT_THROW(read_solution_csv(path), IoError);

  std::remove(path.c_str());
}

TEST(Io, RejectsMalformedTraceFiles) {
  const std::string path = temp_path("regen_bad_trace.csv");

  write_lines(path, std::string(kSolutionHeader) + "\n");
  EXPECT_THROW(read_trace_csv(path), IoError);

  std::string row = "0";
  for (int i = 0; i < 23; ++i) row += ",0";
  write_lines(path, std::string(kTraceHeader) + "\n" + row + "\n");
  EXPECT_THROW(read_trace_csv(path), IoError);  // single sample

  write_lines(path, std::string(kTraceHeader) + "\n" + row + ",extra\n");
  EXPECT_THROW(read_trace_csv(path), IoError);

  std::remove(path.c_str());
}

TEST(Io, WritingToAnUnopenablePathThrows) {
  const CollocationSolution sol = awkward_solution();
  EXPECT_THROW(
      write_solution_csv(std::filesystem::temp_directory_path().string(), sol),
      IoError);
}

TEST(Io, SolutionSummaryCarriesProblemAndSolverFields) {
  CollocationProblem p;
  CollocationSolution sol;
  sol.objective = -17.5;
  sol.control_effort = 123.4;
  sol.max_defect = 2e-7;
  sol.selected_start = 1;
  sol.report.converged = true;
  sol.report.message = "converged";
  StartOutcome st;
  st.index = 0;
  st.feasible = true;
  st.objective = -17.5;
  sol.starts = {st};

  const nlohmann::json j = solution_summary_json(sol, p);
  EXPECT_DOUBLE_EQ(j["objective"].get<double>(), -17.5);
  EXPECT_DOUBLE_EQ(j["control_effort"].get<double>(), 123.4);
  EXPECT_EQ(j["intervals"].get<int>(), p.intervals);
  EXPECT_DOUBLE_EQ(j["horizon"].get<double>(), p.horizon);
  const Vec3 tl = p.tau_limit();
  EXPECT_DOUBLE_EQ(j["tau_limit"][1].get<double>(), tl[1]);
  EXPECT_DOUBLE_EQ(j["q_end"][0].get<double>(), p.q_end[0]);
  EXPECT_TRUE(j["solver"]["converged"].get<bool>());
  EXPECT_EQ(j["starts"].size(), 1u);
  EXPECT_EQ(j["starts"][0]["index"].get<int>(), 0);
  EXPECT_EQ(j["selected_start"].get<int>(), 1);
}

TEST(Io, SimSummaryReflectsTraceOutcome) {
  const HoldReference ref(Vec3(0.0, -M_PI / 2.0, 0.0), 0.05);
  SimOptions opt;
  const SimTrace tr = simulate(ref, opt);

  const nlohmann::json j = sim_summary_json(tr);
  EXPECT_EQ(j["status"].get<std::string>(), "ok");
  EXPECT_DOUBLE_EQ(j["duration"].get<double>(), tr.duration);
  EXPECT_EQ(j["samples"].get<std::size_t>(), tr.size());
  EXPECT_DOUBLE_EQ(j["v_start"].get<double>(), tr.v.front());
  EXPECT_DOUBLE_EQ(j["v_end"].get<double>(), tr.v.back());
  EXPECT_EQ(j["max_tracking_error"].size(), 3u);
  EXPECT_EQ(j["chatter"].size(), 3u);
}

TEST(Io, RepeatedSolvesProduceByteIdenticalFiles) {
  CollocationProblem p;
  p.intervals = 8;
  SolveOptions opts;
  opts.random_starts = 2;

  std::string bytes[2];
  for (int i = 0; i < 2; ++i) {
    const CollocationSolution sol = solve(p, opts);
    const std::string path = temp_path("regen_repro.csv");
    write_solution_csv(path, sol);
    std::ifstream in(path, std::ios::binary);
    bytes[i].assign(std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>());
    std::remove(path.c_str());
  }
  ASSERT_FALSE(bytes[0].empty());
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST(Io, JsonAndTextWritersCreateParentDirectories) {
  const std::string dir = temp_path("regen_io_nested");
  std::filesystem::remove_all(dir);
  const std::string jpath = dir + "/a/b/summary.json";
  const std::string tpath = dir + "/a/c/table.txt";

  write_json_file(jpath, nlohmann::json{{"x", 1}});
  write_text_file(tpath, "hello\n");

  std::ifstream jin(jpath);
  nlohmann::json j;
  jin >> j;
  EXPECT_EQ(j["x"].get<int>(), 1);

  std::ifstream tin(tpath);
  std::string word;
  tin >> word;
  EXPECT_EQ(word, "hello");

  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace regen
