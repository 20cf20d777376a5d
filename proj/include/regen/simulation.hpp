#pragma once

// Closed-loop simulation of the arm driven by semi-active joints sharing one
// ultracapacitor. Controller and duty-ratio matching run at the sample rate
// with zero-order hold; between samples the coupled mechanical/electrical
// state (q, qd, v) is integrated with fixed-step RK4.
//
// Power bookkeeping per joint (consumption positive on the motor side):
//   i_m   = (r v - a qd) / R        winding current
//   p_mot = (r v) i_m               electrical power drawn by the machine
//   p_cap = -r i_m v                power pushed into the capacitor
// A converter efficiency eta < 1 taxes p_cap in both directions (multiplies
// when charging, divides when discharging).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "regen/actuator.hpp"
#include "regen/controller.hpp"
#include "regen/model.hpp"
#include "regen/reference.hpp"

namespace regen {

struct SimOptions {
  double dt = 1e-3;      // control/sample period [s]
  double v_min = 0.1;    // depletion threshold [V]
  double eta = 1.0;      // converter efficiency (0, 1]
  Capacitor cap{};
  std::array<SemiActiveJoint, 3> joints = default_joints();
  Theta theta_plant = default_theta();  // what the arm actually is
  RobustController controller{};        // carries its own nominal theta
  std::optional<JointState> init;       // defaults to the reference start
};

enum class SimStatus { ok, depleted };

struct SimTrace {
  std::vector<double> t;
  std::vector<Vec3> q_ref, qd_ref;
  std::vector<Vec3> q, qd;
  std::vector<Vec3> tau;      // commanded torque before duty saturation
  std::vector<Vec3> duty;     // applied duty ratios
  std::vector<std::array<int, 3>> saturated;
  std::vector<Vec3> p_motor;  // motor-side electrical power, consumption +
  std::vector<double> v;      // capacitor voltage
  std::vector<double> i_cap;  // net capacitor current, charging +
  SimStatus status = SimStatus::ok;

  // Summary metrics.
  Vec3 max_tracking_error = Vec3::Zero();
  Vec3 final_tracking_error = Vec3::Zero();
  Vec3 chatter = Vec3::Zero();  // total variation of the torque command
  double duration = 0.0;

  std::size_t size() const { return t.size(); }
};

namespace detail {

struct ElectromechState {
  Vec3 q, qd;
  double v;
};

}  // namespace detail

inline SimTrace simulate(const Reference& ref, const SimOptions& opt) {
  if (!(opt.dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
  if (!(opt.eta > 0.0 && opt.eta <= 1.0)) {
    throw std::invalid_argument("simulate: eta must be in (0, 1]");
  }
  for (int j = 0; j < 3; ++j) {
    if (mechanical_damping(opt.joints[j], opt.theta_plant[10 + j]) < -1e-9) {
      throw std::invalid_argument(
          "simulate: back-EMF damping exceeds identified viscous friction");
    }
  }

  const long steps = std::lround(ref.duration() / opt.dt);
  detail::ElectromechState s;
  {
    const ReferencePoint p0 = ref.at(0.0);
    s.q = opt.init ? opt.init->q : p0.q;
    s.qd = opt.init ? opt.init->qd : p0.qd;
    s.v = opt.cap.v_init;
  }

  SimTrace tr;
  tr.t.reserve(steps + 1);

  // Capacitor-side power for one joint given duty, voltage and joint rate.
  const auto cap_power = [&](int j, double r, double v, double qd) {
    const double p = charging_current(opt.joints[j], r, v, qd) * v;
    return p >= 0.0 ? opt.eta * p : p / opt.eta;
  };

  const auto derivative = [&](const detail::ElectromechState& st,
                              const Vec3& duty) {
    detail::ElectromechState d;
    const double v = std::max(st.v, 1e-3);
    Vec3 u;
    double pcap = 0.0;
    for (int j = 0; j < 3; ++j) {
      u[j] = applied_torque(opt.joints[j], duty[j], v);
      pcap += cap_power(j, duty[j], v, st.qd[j]);
    }
    d.q = st.qd;
    d.qd = forward_dynamics(st.q, st.qd, u, opt.theta_plant);
    d.v = pcap / (opt.cap.capacitance * v);
    return d;
  };

  Vec3 prev_tau = Vec3::Zero();
  for (long k = 0; k <= steps; ++k) {
    const double t = k * opt.dt;
    const ReferencePoint rp = ref.at(t);
    const Vec3 tau_d =
        opt.controller.torque(s.q, s.qd, rp.q, rp.qd, rp.qdd);

    Vec3 duty;
    std::array<int, 3> sat{0, 0, 0};
    for (int j = 0; j < 3; ++j) {
      const DutyCommand cmd = duty_from_torque(opt.joints[j], tau_d[j], s.v);
      duty[j] = cmd.r;
      sat[j] = cmd.saturated ? 1 : 0;
    }

    Vec3 p_mot;
    double icap = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double im = motor_current(opt.joints[j], duty[j], s.v, s.qd[j]);
      p_mot[j] = duty[j] * s.v * im;
      icap += cap_power(j, duty[j], s.v, s.qd[j]) / s.v;
    }

    tr.t.push_back(t);
    tr.q_ref.push_back(rp.q);
    tr.qd_ref.push_back(rp.qd);
    tr.q.push_back(s.q);
    tr.qd.push_back(s.qd);
    tr.tau.push_back(tau_d);
    tr.duty.push_back(duty);
    tr.saturated.push_back(sat);
    tr.p_motor.push_back(p_mot);
    tr.v.push_back(s.v);
    tr.i_cap.push_back(icap);

    const Vec3 err = (s.q - rp.q).cwiseAbs();
    tr.max_tracking_error = tr.max_tracking_error.cwiseMax(err);
    tr.final_tracking_error = s.q - rp.q;
    if (k > 0) tr.chatter += (tau_d - prev_tau).cwiseAbs();
    prev_tau = tau_d;

    if (s.v <= opt.v_min) {
      tr.status = SimStatus::depleted;
      break;
    }
    if (k == steps) break;

    // RK4 with the duty ratios held over the step.
    const double h = opt.dt;
    const auto k1 = derivative(s, duty);
    detail::ElectromechState s2{s.q + 0.5 * h * k1.q, s.qd + 0.5 * h * k1.qd,
                                s.v + 0.5 * h * k1.v};
    const auto k2 = derivative(s2, duty);
    detail::ElectromechState s3{s.q + 0.5 * h * k2.q, s.qd + 0.5 * h * k2.qd,
                                s.v + 0.5 * h * k2.v};
    const auto k3 = derivative(s3, duty);
    detail::ElectromechState s4{s.q + h * k3.q, s.qd + h * k3.qd,
                                s.v + h * k3.v};
    const auto k4 = derivative(s4, duty);
    s.q += (h / 6.0) * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    s.qd += (h / 6.0) * (k1.qd + 2.0 * k2.qd + 2.0 * k3.qd + k4.qd);
    s.v += (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);

    if (!s.q.allFinite() || !s.qd.allFinite() || !std::isfinite(s.v)) {
      throw std::runtime_error("simulate: state diverged (non-finite values)");
    }
  }

  tr.duration = tr.t.empty() ? 0.0 : tr.t.back();
  return tr;
}

}  // namespace regen
