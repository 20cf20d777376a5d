#pragma once

// Three-joint articulated arm dynamics in linear-in-parameters form.
//
// The model is expressed through a 13-entry parameter vector theta and a
// 3x13 regressor, so that inverse dynamics is tau = Y(q, qd, qdd) * theta.
// Everything else (mass matrix, bias, energies, derivatives) is derived
// from the same parameterization.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace regen {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Theta = Eigen::Matrix<double, 13, 1>;
using Regressor = Eigen::Matrix<double, 3, 13>;

struct JointState {
  Vec3 q = Vec3::Zero();
  Vec3 qd = Vec3::Zero();
};

// Identified parameter set for the three proximal joints of the arm
// (inertia lumps in kg*m^2, gravity lumps in N*m, viscous friction in
// N*m*s). Joint 1 sees no gravity; joints 2 and 3 share the elbow lump.
inline Theta default_theta() {
  Theta th;
  th << 2.8861, 1.4425, 0.1990, 0.3815, -0.1326, 4.5860, 0.5945, -0.7938,
      8.6677, 44.2165, 78.5975, 183.2162, 56.7933;
  return th;
}

namespace detail {

// Shared trigonometric terms; everything below is built from two sincos
// evaluations.
struct Trig {
  double s2, c2, s3, c3;
  double s23, c23;    // q2 + q3
  double s223, c223;  // 2*q2 + q3
  double cos2q2;      // 2*q2
  double cos2q23;     // 2*(q2 + q3)

  explicit Trig(const Vec3& q) {
    s2 = std::sin(q[1]);
    c2 = std::cos(q[1]);
    s3 = std::sin(q[2]);
    c3 = std::cos(q[2]);
    s23 = s2 * c3 + c2 * s3;
    c23 = c2 * c3 - s2 * s3;
    s223 = s23 * c2 + c23 * s2;
    c223 = c23 * c2 - s23 * s2;
    cos2q2 = c2 * c2 - s2 * s2;
    cos2q23 = c23 * c23 - s23 * s23;
  }
};

}  // namespace detail

// Regressor evaluated on a reference acceleration a and reference velocity v,
// i.e. the matrix Y_a with
//   Y_a(q, qd, a, v) * theta = D(q) a + C(q, qd) v + diag(th11..th13) v + g(q)
// where C collects the Christoffel symbols of D. With a = qdd and v = qd this
// reduces to the plain inverse-dynamics regressor. Keeping one implementation
// for both uses makes the model and the tracking controller share their
// parameterization exactly.
inline Regressor reference_regressor(const Vec3& q, const Vec3& qd,
                                     const Vec3& a, const Vec3& v) {
  const detail::Trig t(q);
  const double qd1 = qd[0], qd2 = qd[1], qd3 = qd[2];

  Regressor Y = Regressor::Zero();

  // Row 1 (base joint): inertial coupling plus velocity products.
  Y(0, 0) = a[0];
  Y(0, 1) = t.c2 * t.c2 * a[0] - t.c2 * t.s2 * (qd2 * v[0] + qd1 * v[1]);
  Y(0, 2) = t.c23 * t.c23 * a[0] -
            t.c23 * t.s23 * (qd2 * v[0] + qd1 * v[1] + qd3 * v[0] + qd1 * v[2]);
  Y(0, 3) = 2.0 * t.c23 * t.c2 * a[0] - t.s223 * (qd2 * v[0] + qd1 * v[1]) -
            t.s23 * t.c2 * (qd3 * v[0] + qd1 * v[2]);
  Y(0, 4) = t.s23 * (a[1] + a[2]) + t.c23 * (qd2 + qd3) * (v[1] + v[2]);
  Y(0, 7) = t.s2 * a[1] + t.c2 * qd2 * v[1];
  Y(0, 10) = v[0];

  // Row 2 (shoulder): full gravity load and elbow coupling.
  Y(1, 1) = t.c2 * t.s2 * qd1 * v[0];
  Y(1, 2) = t.c23 * t.s23 * qd1 * v[0];
  Y(1, 3) = t.s223 * qd1 * v[0] - t.s3 * (qd3 * v[1] + (qd2 + qd3) * v[2]) +
            t.c3 * (2.0 * a[1] + a[2]);
  Y(1, 4) = t.s23 * a[0];
  Y(1, 5) = a[1];
  Y(1, 6) = a[2];
  Y(1, 7) = t.s2 * a[0];
  Y(1, 8) = -t.c23;
  Y(1, 9) = -t.c2;
  Y(1, 11) = v[1];

  // Row 3 (elbow).
  Y(2, 2) = t.c23 * t.s23 * qd1 * v[0];
  Y(2, 3) = t.s23 * t.c2 * qd1 * v[0] + t.s3 * qd2 * v[1] + t.c3 * a[1];
  Y(2, 4) = t.s23 * a[0];
  Y(2, 6) = a[1] + a[2];
  Y(2, 8) = -t.c23;
  Y(2, 12) = v[2];

  return Y;
}

inline Regressor regressor(const Vec3& q, const Vec3& qd, const Vec3& qdd) {
  return reference_regressor(q, qd, qdd, qd);
}

inline Mat3 mass_matrix(const Vec3& q, const Theta& th) {
  const detail::Trig t(q);
  Mat3 D;
  D(0, 0) = th[0] + th[1] * t.c2 * t.c2 + th[2] * t.c23 * t.c23 +
            2.0 * th[3] * t.c23 * t.c2;
  D(0, 1) = th[4] * t.s23 + th[7] * t.s2;
  D(0, 2) = th[4] * t.s23;
  D(1, 1) = th[5] + 2.0 * th[3] * t.c3;
  D(1, 2) = th[6] + th[3] * t.c3;
  D(2, 2) = th[6];
  D(1, 0) = D(0, 1);
  D(2, 0) = D(0, 2);
  D(2, 1) = D(1, 2);
  return D;
}

inline Vec3 gravity_torque(const Vec3& q, const Theta& th) {
  const detail::Trig t(q);
  return Vec3(0.0, -th[8] * t.c23 - th[9] * t.c2, -th[8] * t.c23);
}

// Gravitational potential, anchored so V(0) = 0. gravity_torque is its
// gradient.
inline double potential_energy(const Vec3& q, const Theta& th) {
  const detail::Trig t(q);
  return -th[8] * t.s23 - th[9] * t.s2;
}

// Coriolis/centrifugal + viscous friction + gravity; the terms that remain
// when the acceleration is zero.
inline Vec3 bias_torque(const Vec3& q, const Vec3& qd, const Theta& th) {
  const detail::Trig t(q);
  const double qd1 = qd[0], qd2 = qd[1], qd3 = qd[2];
  const double P2 = -2.0 * th[1] * t.c2 * t.s2 - 2.0 * th[2] * t.c23 * t.s23 -
                    2.0 * th[3] * t.s223;
  const double P3 = -2.0 * th[2] * t.c23 * t.s23 - 2.0 * th[3] * t.s23 * t.c2;
  Vec3 b;
  b[0] = th[10] * qd1 + qd1 * qd2 * P2 + qd1 * qd3 * P3 +
         th[4] * t.c23 * (qd2 + qd3) * (qd2 + qd3) + th[7] * t.c2 * qd2 * qd2;
  b[1] = th[11] * qd2 - 0.5 * P2 * qd1 * qd1 -
         th[3] * t.s3 * (2.0 * qd2 * qd3 + qd3 * qd3) - th[8] * t.c23 -
         th[9] * t.c2;
  b[2] = th[12] * qd3 - 0.5 * P3 * qd1 * qd1 + th[3] * t.s3 * qd2 * qd2 -
         th[8] * t.c23;
  return b;
}

inline Vec3 inverse_dynamics(const Vec3& q, const Vec3& qd, const Vec3& qdd,
                             const Theta& th) {
  return mass_matrix(q, th) * qdd + bias_torque(q, qd, th);
}

inline Vec3 forward_dynamics(const Vec3& q, const Vec3& qd, const Vec3& tau,
                             const Theta& th) {
  const Mat3 D = mass_matrix(q, th);
  Eigen::LDLT<Mat3> ldlt(D);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::domain_error("mass matrix is not positive definite");
  }
  return ldlt.solve(tau - bias_torque(q, qd, th));
}

inline double kinetic_energy(const Vec3& q, const Vec3& qd, const Theta& th) {
  return 0.5 * qd.dot(mass_matrix(q, th) * qd);
}

inline double mechanical_energy(const Vec3& q, const Vec3& qd,
                                const Theta& th) {
  return kinetic_energy(q, qd, th) + potential_energy(q, th);
}

// One fused evaluation of everything the transcription needs at a node:
// accelerations for a given torque plus the analytic partial derivatives.
// dbias_dq has one column per configuration coordinate (the first is zero,
// the base angle never appears outside its own rate).
struct DynamicsEval {
  Mat3 D;
  Mat3 D_inv;
  Vec3 bias;
  Vec3 f;  // accelerations D^{-1} (tau - bias)
  Mat3 dD_dq2, dD_dq3;
  Mat3 dbias_dq;
  Mat3 dbias_dqd;
};

inline void evaluate_dynamics(const Vec3& q, const Vec3& qd, const Vec3& tau,
                              const Theta& th, bool with_derivatives,
                              DynamicsEval& out) {
  const detail::Trig t(q);
  const double qd1 = qd[0], qd2 = qd[1], qd3 = qd[2];

  const double P2 = -2.0 * th[1] * t.c2 * t.s2 - 2.0 * th[2] * t.c23 * t.s23 -
                    2.0 * th[3] * t.s223;
  const double P3 = -2.0 * th[2] * t.c23 * t.s23 - 2.0 * th[3] * t.s23 * t.c2;
  const double Q2 = th[4] * t.c23 + th[7] * t.c2;
  const double Q3 = th[4] * t.c23;

  Mat3& D = out.D;
  D(0, 0) = th[0] + th[1] * t.c2 * t.c2 + th[2] * t.c23 * t.c23 +
            2.0 * th[3] * t.c23 * t.c2;
  D(0, 1) = th[4] * t.s23 + th[7] * t.s2;
  D(0, 2) = th[4] * t.s23;
  D(1, 1) = th[5] + 2.0 * th[3] * t.c3;
  D(1, 2) = th[6] + th[3] * t.c3;
  D(2, 2) = th[6];
  D(1, 0) = D(0, 1);
  D(2, 0) = D(0, 2);
  D(2, 1) = D(1, 2);

  Vec3& b = out.bias;
  b[0] = th[10] * qd1 + qd1 * qd2 * P2 + qd1 * qd3 * P3 +
         th[4] * t.c23 * (qd2 + qd3) * (qd2 + qd3) + th[7] * t.c2 * qd2 * qd2;
  b[1] = th[11] * qd2 - 0.5 * P2 * qd1 * qd1 -
         th[3] * t.s3 * (2.0 * qd2 * qd3 + qd3 * qd3) - th[8] * t.c23 -
         th[9] * t.c2;
  b[2] = th[12] * qd3 - 0.5 * P3 * qd1 * qd1 + th[3] * t.s3 * qd2 * qd2 -
         th[8] * t.c23;

  out.D_inv = D.inverse();
  out.f = out.D_inv * (tau - b);

  if (!with_derivatives) return;

  out.dD_dq2.setZero();
  out.dD_dq2(0, 0) = P2;
  out.dD_dq2(0, 1) = out.dD_dq2(1, 0) = Q2;
  out.dD_dq2(0, 2) = out.dD_dq2(2, 0) = Q3;

  out.dD_dq3.setZero();
  out.dD_dq3(0, 0) = P3;
  out.dD_dq3(0, 1) = out.dD_dq3(1, 0) = Q3;
  out.dD_dq3(0, 2) = out.dD_dq3(2, 0) = Q3;
  out.dD_dq3(1, 1) = -2.0 * th[3] * t.s3;
  out.dD_dq3(1, 2) = out.dD_dq3(2, 1) = -th[3] * t.s3;

  const double dP2_dq2 = -2.0 * th[1] * t.cos2q2 - 2.0 * th[2] * t.cos2q23 -
                         4.0 * th[3] * t.c223;
  const double dP2_dq3 = -2.0 * th[2] * t.cos2q23 - 2.0 * th[3] * t.c223;
  const double dP3_dq2 = dP2_dq3;
  const double dP3_dq3 =
      -2.0 * th[2] * t.cos2q23 - 2.0 * th[3] * t.c23 * t.c2;

  Mat3& bq = out.dbias_dq;
  bq.setZero();
  const double w23 = (qd2 + qd3) * (qd2 + qd3);
  bq(0, 1) = qd1 * qd2 * dP2_dq2 + qd1 * qd3 * dP3_dq2 -
             th[4] * t.s23 * w23 - th[7] * t.s2 * qd2 * qd2;
  bq(0, 2) = qd1 * qd2 * dP2_dq3 + qd1 * qd3 * dP3_dq3 - th[4] * t.s23 * w23;
  bq(1, 1) = -0.5 * dP2_dq2 * qd1 * qd1 + th[8] * t.s23 + th[9] * t.s2;
  bq(1, 2) = -0.5 * dP2_dq3 * qd1 * qd1 -
             th[3] * t.c3 * (2.0 * qd2 * qd3 + qd3 * qd3) + th[8] * t.s23;
  bq(2, 1) = -0.5 * dP3_dq2 * qd1 * qd1 + th[8] * t.s23;
  bq(2, 2) = -0.5 * dP3_dq3 * qd1 * qd1 + th[3] * t.c3 * qd2 * qd2 +
             th[8] * t.s23;

  Mat3& bv = out.dbias_dqd;
  bv(0, 0) = th[10] + qd2 * P2 + qd3 * P3;
  bv(0, 1) = qd1 * P2 + 2.0 * th[4] * t.c23 * (qd2 + qd3) +
             2.0 * th[7] * t.c2 * qd2;
  bv(0, 2) = qd1 * P3 + 2.0 * th[4] * t.c23 * (qd2 + qd3);
  bv(1, 0) = -P2 * qd1;
  bv(1, 1) = th[11] - 2.0 * th[3] * t.s3 * qd3;
  bv(1, 2) = -2.0 * th[3] * t.s3 * (qd2 + qd3);
  bv(2, 0) = -P3 * qd1;
  bv(2, 1) = 2.0 * th[3] * t.s3 * qd2;
  bv(2, 2) = th[12];
}

}  // namespace regen
