#pragma once

// Energy bookkeeping. Every motion, simulated or planned, is summarized by a
// five-term ledger
//
//   delta_mech + sigma_mech + sigma_elec + delta_storage + driver_loss = 0
//
// with delta_mech the change of mechanical energy, sigma_mech the friction
// loss, sigma_elec the winding Joule loss, delta_storage the capacitor energy
// change and driver_loss the converter tax (zero at unit efficiency). The
// residual of that sum, relative to the gross flow magnitude, is the audit's
// health measure: a simulated trace violating it indicates a model or
// bookkeeping bug, not physics.
//
// Per-joint motor_energy is the consumption-positive electrical energy drawn
// on the motor side; negative entries are joints that returned net energy.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regen/actuator.hpp"
#include "regen/collocation.hpp"
#include "regen/model.hpp"
#include "regen/simulation.hpp"

namespace regen {

struct EnergyLedger {
  std::string label;
  Vec3 motor_energy = Vec3::Zero();  // per joint, consumption positive [J]
  double total_motor = 0.0;
  double delta_mech = 0.0;
  double sigma_mech = 0.0;
  double sigma_elec = 0.0;
  double delta_storage = 0.0;
  double driver_loss = 0.0;
  double residual = 0.0;
  double gross = 0.0;            // magnitude scale for the residual
  double regen_fraction = 0.0;   // regenerated / consumed across joints
  double v_start = std::numeric_limits<double>::quiet_NaN();
  double v_end = std::numeric_limits<double>::quiet_NaN();

  double relative_residual() const {
    return std::abs(residual) / std::max(gross, 1e-12);
  }
};

namespace detail {

inline void finish_ledger(EnergyLedger& lg) {
  lg.total_motor = lg.motor_energy.sum();
  lg.residual = lg.delta_mech + lg.sigma_mech + lg.sigma_elec +
                lg.delta_storage + lg.driver_loss;
  lg.gross = std::max({std::abs(lg.delta_mech), std::abs(lg.sigma_mech),
                       std::abs(lg.sigma_elec), std::abs(lg.delta_storage),
                       std::abs(lg.total_motor)});
  double regen = 0.0, consumed = 0.0;
  for (int j = 0; j < 3; ++j) {
    if (lg.motor_energy[j] < 0.0) {
      regen -= lg.motor_energy[j];
    } else {
      consumed += lg.motor_energy[j];
    }
  }
  lg.regen_fraction = consumed > 1e-12 ? regen / consumed : 0.0;
}

}  // namespace detail

// Ledger of a simulated trace over [t0, t1] (defaults to the whole trace).
// Joule and friction losses are recomputed from the recorded duty ratios and
// voltages; storage change comes from the capacitor endpoints.
inline EnergyLedger audit(const SimTrace& tr, const Theta& theta_plant,
                          const std::array<SemiActiveJoint, 3>& joints,
                          const Capacitor& cap, double eta = 1.0,
                          double t0 = -std::numeric_limits<double>::infinity(),
                          double t1 = std::numeric_limits<double>::infinity()) {
  if (tr.size() < 2) throw std::invalid_argument("audit: trace too short");
  std::size_t i0 = 0, i1 = tr.size() - 1;
  while (i0 + 1 < tr.size() && tr.t[i0] < t0 - 1e-12) ++i0;
  while (i1 > 0 && tr.t[i1] > t1 + 1e-12) --i1;
  if (i1 <= i0) throw std::invalid_argument("audit: empty time window");

  EnergyLedger lg;
  const auto losses_at = [&](std::size_t i, double* joule, double* friction,
                             double* driver, Vec3* pmot) {
    *joule = *friction = *driver = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double im =
          motor_current(joints[j], tr.duty[i][j], tr.v[i], tr.qd[i][j]);
      *joule += joints[j].R * im * im;
      const double bm = mechanical_damping(joints[j], theta_plant[10 + j]);
      *friction += bm * tr.qd[i][j] * tr.qd[i][j];
      const double praw =
          charging_current(joints[j], tr.duty[i][j], tr.v[i], tr.qd[i][j]) *
          tr.v[i];
      const double ptaxed = praw >= 0.0 ? eta * praw : praw / eta;
      *driver += praw - ptaxed;
      (*pmot)[j] = tr.duty[i][j] * tr.v[i] * im;
    }
  };

  double j0, f0, d0, j1, f1, d1;
  Vec3 p0, p1;
  losses_at(i0, &j0, &f0, &d0, &p0);
  for (std::size_t i = i0; i < i1; ++i) {
    losses_at(i + 1, &j1, &f1, &d1, &p1);
    const double h = tr.t[i + 1] - tr.t[i];
    lg.sigma_elec += 0.5 * h * (j0 + j1);
    lg.sigma_mech += 0.5 * h * (f0 + f1);
    lg.driver_loss += 0.5 * h * (d0 + d1);
    lg.motor_energy += 0.5 * h * (p0 + p1);
    j0 = j1;
    f0 = f1;
    d0 = d1;
    p0 = p1;
  }

  lg.delta_mech = mechanical_energy(tr.q[i1], tr.qd[i1], theta_plant) -
                  mechanical_energy(tr.q[i0], tr.qd[i0], theta_plant);
  lg.v_start = tr.v[i0];
  lg.v_end = tr.v[i1];
  lg.delta_storage =
      0.5 * cap.capacitance * (tr.v[i1] * tr.v[i1] - tr.v[i0] * tr.v[i0]);
  detail::finish_ledger(lg);
  return lg;
}

// Ledger of a planned trajectory under exact matching at unit efficiency.
// Storage change is then exactly the negated motor-side energy.
inline EnergyLedger audit(const CollocationSolution& sol, const Theta& theta,
                          const std::array<SemiActiveJoint, 3>& joints) {
  if (sol.t.size() < 2) throw std::invalid_argument("audit: empty solution");
  EnergyLedger lg;
  const std::size_t n = sol.t.size();
  const auto losses_at = [&](std::size_t i, double* joule, double* friction,
                             Vec3* pmot) {
    *joule = *friction = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double tau = sol.tau[i][j], qd = sol.qd[i][j];
      const double ka = joints[j].k() * joints[j].a;
      *joule += (tau - ka * qd) * (tau - ka * qd) / ka;
      const double bm = mechanical_damping(joints[j], theta[10 + j]);
      *friction += bm * qd * qd;
      (*pmot)[j] = -regen_power(joints[j], tau, qd);
    }
  };
  double j0, f0, j1, f1;
  Vec3 p0, p1;
  losses_at(0, &j0, &f0, &p0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    losses_at(i + 1, &j1, &f1, &p1);
    const double h = sol.t[i + 1] - sol.t[i];
    lg.sigma_elec += 0.5 * h * (j0 + j1);
    lg.sigma_mech += 0.5 * h * (f0 + f1);
    lg.motor_energy += 0.5 * h * (p0 + p1);
    j0 = j1;
    f0 = f1;
    p0 = p1;
  }
  lg.delta_mech = mechanical_energy(sol.q.back(), sol.qd.back(), theta) -
                  mechanical_energy(sol.q.front(), sol.qd.front(), theta);
  lg.delta_storage = -lg.motor_energy.sum();
  detail::finish_ledger(lg);
  return lg;
}

// Regenerated-over-consumed percentage across a set of leg ledgers (legs with
// negative net motor energy fund the positive ones).
inline double cycle_savings_percent(const std::vector<EnergyLedger>& legs) {
  double regen = 0.0, consumed = 0.0;
  for (const auto& lg : legs) {
    if (lg.total_motor < 0.0) {
      regen -= lg.total_motor;
    } else {
      consumed += lg.total_motor;
    }
  }
  return consumed > 1e-12 ? 100.0 * regen / consumed : 0.0;
}

namespace detail {

inline std::string sig6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace detail

// Fixed-width text table of one or more ledgers, six significant digits.
inline std::string energy_table(const std::vector<EnergyLedger>& ledgers) {
  if (ledgers.empty()) return "(no ledgers)\n";
  std::ostringstream os;
  const int w = 14;
  const auto cell = [&](const std::string& s) {
    os << std::string(s.size() >= static_cast<std::size_t>(w)
                          ? 1
                          : w - s.size(),
                      ' ')
       << s;
  };
  os << std::string(22, ' ');
  for (const auto& lg : ledgers) cell(lg.label.empty() ? "motion" : lg.label);
  os << "\n";
  const auto row = [&](const std::string& name, auto getter) {
    os << name << std::string(22 - name.size(), ' ');
    for (const auto& lg : ledgers) cell(detail::sig6(getter(lg)));
    os << "\n";
  };
  row("E motor joint 1 [J]", [](const EnergyLedger& l) { return l.motor_energy[0]; });
  row("E motor joint 2 [J]", [](const EnergyLedger& l) { return l.motor_energy[1]; });
  row("E motor joint 3 [J]", [](const EnergyLedger& l) { return l.motor_energy[2]; });
  row("E motor total [J]", [](const EnergyLedger& l) { return l.total_motor; });
  row("delta E mech [J]", [](const EnergyLedger& l) { return l.delta_mech; });
  row("friction loss [J]", [](const EnergyLedger& l) { return l.sigma_mech; });
  row("joule loss [J]", [](const EnergyLedger& l) { return l.sigma_elec; });
  row("delta E storage [J]", [](const EnergyLedger& l) { return l.delta_storage; });
  row("driver loss [J]", [](const EnergyLedger& l) { return l.driver_loss; });
  row("residual [J]", [](const EnergyLedger& l) { return l.residual; });
  row("regen/consumed [-]", [](const EnergyLedger& l) { return l.regen_fraction; });
  if (ledgers.size() >= 2) {
    bool any_regen = false, any_consume = false;
    for (const auto& lg : ledgers) {
      (lg.total_motor < 0.0 ? any_regen : any_consume) = true;
    }
    if (any_regen && any_consume) {
      os << "cycle savings: " << detail::sig6(cycle_savings_percent(ledgers))
         << " % of consumed energy covered by regeneration\n";
    }
  }
  return os.str();
}

inline nlohmann::json ledger_json(const EnergyLedger& lg) {
  nlohmann::json j;
  j["label"] = lg.label;
  j["motor_energy"] = {lg.motor_energy[0], lg.motor_energy[1],
                       lg.motor_energy[2]};
  j["total_motor"] = lg.total_motor;
  j["delta_mech"] = lg.delta_mech;
  j["sigma_mech"] = lg.sigma_mech;
  j["sigma_elec"] = lg.sigma_elec;
  j["delta_storage"] = lg.delta_storage;
  j["driver_loss"] = lg.driver_loss;
  j["residual"] = lg.residual;
  j["relative_residual"] = lg.relative_residual();
  j["regen_fraction"] = lg.regen_fraction;
  if (std::isfinite(lg.v_start)) {
    j["v_start"] = lg.v_start;
    j["v_end"] = lg.v_end;
  }
  return j;
}

// Signed flow graph around a balance hub: positive edge values flow away
// from the source node, negative ones return to it. Plottable as-is.
inline nlohmann::json sankey_json(const EnergyLedger& lg) {
  nlohmann::json j;
  j["nodes"] = {"source", "mechanical", "mech_losses", "elec_losses",
                "capacitor"};
  nlohmann::json edges = nlohmann::json::array();
  edges.push_back({{"from", "source"}, {"to", "mechanical"}, {"value", lg.delta_mech}});
  edges.push_back({{"from", "source"}, {"to", "mech_losses"}, {"value", lg.sigma_mech}});
  edges.push_back({{"from", "source"}, {"to", "elec_losses"}, {"value", lg.sigma_elec}});
  edges.push_back({{"from", "source"}, {"to", "capacitor"}, {"value", lg.delta_storage}});
  if (lg.driver_loss != 0.0) {
    j["nodes"].push_back("driver_losses");
    edges.push_back(
        {{"from", "source"}, {"to", "driver_losses"}, {"value", lg.driver_loss}});
  }
  j["edges"] = edges;
  j["residual"] = lg.residual;
  j["label"] = lg.label;
  return j;
}

}  // namespace regen
