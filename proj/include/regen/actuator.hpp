#pragma once

// Semi-active joint: a DC machine whose winding is switched across a shared
// ultracapacitor through an H-bridge with signed duty ratio r in [-1, 1].
// The only control authority is r; the machine can brake, regenerate, or
// motor, but never exceeds the torque the capacitor voltage allows.
//
// Conventions. The commanded torque tau_d enters the rigid-body model whose
// viscous coefficient already contains the back-EMF damping k*a, so exact
// matching is simply r = tau_d / (k v). Motor current follows the winding
// equation i_m = (r v - a qd) / R, capacitor charging current is -r i_m,
// and regen_power is the electrical power delivered to storage under exact
// matching (positive while regenerating).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "regen/model.hpp"

namespace regen {

struct SemiActiveJoint {
  double a = 0.0;  // machine constant [N*m/A]
  double R = 0.0;  // winding resistance [ohm]

  double k() const { return a / R; }
  // Largest torque magnitude reachable at bus voltage v (|r| <= 1).
  double torque_limit(double v) const { return k() * v; }
  // Joule-loss weight in the regenerated-power expression.
  double rho() const { return R / (a * a); }
};

struct Capacitor {
  double capacitance = 165.0;  // [F]
  double v_init = 27.0;        // [V]
};

struct DutyCommand {
  double r = 0.0;
  bool saturated = false;
};

// Exact virtual matching (a r / R) v = tau_d, clamped to the physical duty
// range. Requires a live bus; a depleted capacitor cannot realize any torque.
inline DutyCommand duty_from_torque(const SemiActiveJoint& j, double tau_d,
                                    double v) {
  if (!(v > 0.0)) {
    throw std::domain_error("duty_from_torque: bus voltage must be positive");
  }
  DutyCommand cmd;
  cmd.r = tau_d / (j.k() * v);
  if (cmd.r > 1.0) {
    cmd.r = 1.0;
    cmd.saturated = true;
  } else if (cmd.r < -1.0) {
    cmd.r = -1.0;
    cmd.saturated = true;
  }
  return cmd;
}

inline double applied_torque(const SemiActiveJoint& j, double r, double v) {
  return j.k() * r * v;
}

inline double motor_current(const SemiActiveJoint& j, double r, double v,
                            double qd) {
  return (r * v - j.a * qd) / j.R;
}

// Current pushed into the capacitor by joint j (positive charges it).
inline double charging_current(const SemiActiveJoint& j, double r, double v,
                               double qd) {
  return -r * motor_current(j, r, v, qd);
}

// Electrical power delivered to storage under exact matching:
//   p = tau qd - (R / a^2) tau^2.
// Concave in tau; positive only when braking gently enough that the Joule
// loss does not eat the recovered work.
inline double regen_power(const SemiActiveJoint& j, double tau, double qd) {
  return tau * qd - j.rho() * tau * tau;
}

// Trapezoidal integral of regen_power along a sampled trajectory; positive
// values mean net energy flowed into storage.
inline double regen_energy(const SemiActiveJoint& j,
                           const std::vector<double>& t,
                           const std::vector<double>& tau,
                           const std::vector<double>& qd) {
  if (t.size() != tau.size() || t.size() != qd.size()) {
    throw std::invalid_argument("regen_energy: mismatched sample arrays");
  }
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double p0 = regen_power(j, tau[i], qd[i]);
    const double p1 = regen_power(j, tau[i + 1], qd[i + 1]);
    e += 0.5 * (t[i + 1] - t[i]) * (p0 + p1);
  }
  return e;
}

// Torque-constant-to-resistance ratios k = a/R identified for the three
// joints, and the fraction phi of each joint's total viscous coefficient
// attributable to back-EMF damping (k*a = phi * theta_visc). phi was fit
// once, per joint, against the per-joint energy ledgers of the optimized
// point-to-point motions and is kept fixed; the mechanical remainder
// (1 - phi) * theta_visc stays in the friction ledger.
inline constexpr std::array<double, 3> kDefaultK = {5.0189, 8.0687, 4.3581};
inline constexpr std::array<double, 3> kDefaultEmfShare = {0.840, 0.938,
                                                           0.910};

inline std::array<SemiActiveJoint, 3> default_joints() {
  const Theta th = default_theta();
  std::array<SemiActiveJoint, 3> joints;
  for (int j = 0; j < 3; ++j) {
    const double ka = kDefaultEmfShare[j] * th[10 + j];
    const double a = ka / kDefaultK[j];
    joints[j] = SemiActiveJoint{a, a / kDefaultK[j]};
  }
  return joints;
}

// Mechanical (non-electrical) viscous coefficient left over once back-EMF
// damping is carved out of the identified total. Negative values mean the
// actuator parameters are inconsistent with the identified friction.
inline double mechanical_damping(const SemiActiveJoint& j, double theta_visc) {
  return theta_visc - j.k() * j.a;
}

}  // namespace regen
