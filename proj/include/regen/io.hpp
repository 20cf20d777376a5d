#pragma once

// CSV and JSON serialization of solutions and simulation traces.
//
// Solution CSV columns:
//   t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3
// Trace CSV columns:
//   t,qd_ref1..3,q1..3,qdot1..3,tau1..3,r1..3,sat1..3,p_motor1..3,v_cap,i_cap
// Values are written with round-trip precision so files can be audited
// without loss.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "regen/audit.hpp"
#include "regen/collocation.hpp"
#include "regen/simulation.hpp"

namespace regen {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_num(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse number '" + s + "'");
  }
}

inline void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
}

}  // namespace detail

inline const char* kSolutionHeader = "t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3";
inline const char* kTraceHeader =
    "t,qd_ref1,qd_ref2,qd_ref3,q1,q2,q3,qdot1,qdot2,qdot3,"
    "tau1,tau2,tau3,r1,r2,r3,sat1,sat2,sat3,"
    "p_motor1,p_motor2,p_motor3,v_cap,i_cap";

inline void write_solution_csv(const std::string& path,
                               const CollocationSolution& sol) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kSolutionHeader << "\n";
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    out << detail::fmt17(sol.t[i]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(sol.q[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(sol.qd[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(sol.tau[i][j]);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline CollocationSolution read_solution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open solution file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty solution file: " + path);
  {
    auto hdr = detail::split_csv_line(line);
    auto want = detail::split_csv_line(kSolutionHeader);
    if (hdr != want) {
      throw IoError(path + ": unexpected solution header '" + line + "'");
    }
  }
  CollocationSolution sol;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected 10 columns, got " + std::to_string(f.size()));
    }
    const std::string where = path + ":" + std::to_string(lineno);
    sol.t.push_back(detail::parse_num(f[0], where));
    Vec3 q, qd, tau;
    for (int j = 0; j < 3; ++j) q[j] = detail::parse_num(f[1 + j], where);
    for (int j = 0; j < 3; ++j) qd[j] = detail::parse_num(f[4 + j], where);
    for (int j = 0; j < 3; ++j) tau[j] = detail::parse_num(f[7 + j], where);
    sol.q.push_back(q);
    sol.qd.push_back(qd);
    sol.tau.push_back(tau);
  }
  if (sol.t.size() < 2) throw IoError(path + ": fewer than two samples");
  return sol;
}

inline void write_trace_csv(const std::string& path, const SimTrace& tr) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kTraceHeader << "\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out << detail::fmt17(tr.t[i]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.qd_ref[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.q[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.qd[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.tau[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.duty[i][j]);
    for (int j = 0; j < 3; ++j) out << ',' << tr.saturated[i][j];
    for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(tr.p_motor[i][j]);
    out << ',' << detail::fmt17(tr.v[i]) << ',' << detail::fmt17(tr.i_cap[i]);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline SimTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trace file: " + path);
  {
    auto hdr = detail::split_csv_line(line);
    auto want = detail::split_csv_line(kTraceHeader);
    if (hdr != want) {
      throw IoError(path + ": unexpected trace header '" + line + "'");
    }
  }
  SimTrace tr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 24) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected 24 columns, got " + std::to_string(f.size()));
    }
    const std::string where = path + ":" + std::to_string(lineno);
    tr.t.push_back(detail::parse_num(f[0], where));
    Vec3 qdr, q, qd, tau, duty, pmot;
    std::array<int, 3> sat{};
    for (int j = 0; j < 3; ++j) qdr[j] = detail::parse_num(f[1 + j], where);
    for (int j = 0; j < 3; ++j) q[j] = detail::parse_num(f[4 + j], where);
    for (int j = 0; j < 3; ++j) qd[j] = detail::parse_num(f[7 + j], where);
    for (int j = 0; j < 3; ++j) tau[j] = detail::parse_num(f[10 + j], where);
    for (int j = 0; j < 3; ++j) duty[j] = detail::parse_num(f[13 + j], where);
    for (int j = 0; j < 3; ++j) {
      sat[j] = static_cast<int>(detail::parse_num(f[16 + j], where));
    }
    for (int j = 0; j < 3; ++j) pmot[j] = detail::parse_num(f[19 + j], where);
    tr.qd_ref.push_back(qdr);
    tr.q.push_back(q);
    tr.qd.push_back(qd);
    tr.tau.push_back(tau);
    tr.duty.push_back(duty);
    tr.saturated.push_back(sat);
    tr.p_motor.push_back(pmot);
    tr.v.push_back(detail::parse_num(f[22], where));
    tr.i_cap.push_back(detail::parse_num(f[23], where));
  }
  if (tr.size() < 2) throw IoError(path + ": fewer than two samples");
  tr.duration = tr.t.back();
  return tr;
}

inline nlohmann::json solution_summary_json(const CollocationSolution& sol,
                                            const CollocationProblem& p) {
  nlohmann::json j;
  j["objective"] = sol.objective;
  j["control_effort"] = sol.control_effort;
  j["max_defect"] = sol.max_defect;
  j["intervals"] = p.intervals;
  j["horizon"] = p.horizon;
  j["v_bus"] = p.v_bus;
  const Vec3 tl = p.tau_limit();
  j["tau_limit"] = {tl[0], tl[1], tl[2]};
  j["q_start"] = {p.q_start[0], p.q_start[1], p.q_start[2]};
  j["q_end"] = {p.q_end[0], p.q_end[1], p.q_end[2]};
  j["selected_start"] = sol.selected_start;
  j["solver"] = {{"converged", sol.report.converged},
                 {"message", sol.report.message},
                 {"outer_iterations", sol.report.outer_iterations},
                 {"inner_iterations", sol.report.inner_iterations},
                 {"evaluations", sol.report.evaluations},
                 {"stationarity", sol.report.stationarity},
                 {"feasibility", sol.report.feasibility}};
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& st : sol.starts) {
    starts.push_back({{"index", st.index},
                      {"feasible", st.feasible},
                      {"converged", st.converged},
                      {"objective", st.objective},
                      {"max_defect", st.feasibility},
                      {"stationarity", st.stationarity},
                      {"inner_iterations", st.inner_iterations}});
  }
  j["starts"] = starts;
  return j;
}

inline nlohmann::json sim_summary_json(const SimTrace& tr) {
  nlohmann::json j;
  j["status"] = tr.status == SimStatus::ok ? "ok" : "depleted";
  j["duration"] = tr.duration;
  j["samples"] = tr.size();
  j["max_tracking_error"] = {tr.max_tracking_error[0], tr.max_tracking_error[1],
                             tr.max_tracking_error[2]};
  j["final_tracking_error"] = {tr.final_tracking_error[0],
                               tr.final_tracking_error[1],
                               tr.final_tracking_error[2]};
  j["chatter"] = {tr.chatter[0], tr.chatter[1], tr.chatter[2]};
  if (!tr.v.empty()) {
    j["v_start"] = tr.v.front();
    j["v_end"] = tr.v.back();
  }
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace regen
