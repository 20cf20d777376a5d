#pragma once

// Passivity-based tracking controller with a bounded robust parameter
// correction. The control law follows the sliding-variable construction:
//
//   nu = qd_ref - Lambda (q - q_ref)        reference velocity
//   a  = qdd_ref - Lambda (qd - qd_ref)     reference acceleration
//   r  = qd - nu                            sliding variable
//   tau = Y_a(q, qd, a, nu) (theta0 + dtheta) - K r
//
// with dtheta the continuous unit-vector correction of magnitude at most rho
// (linear inside the epsilon boundary layer). The same regressor that defines
// the model appears here evaluated on (a, nu) instead of (qdd, qd).

#include <Eigen/Dense>

#include "regen/model.hpp"

namespace regen {

struct ControllerGains {
  Vec3 lambda{10.0, 10.0, 10.0};  // sliding-surface bandwidth [1/s]
  Vec3 k{40.0, 80.0, 40.0};       // feedback on the sliding variable
  // Correction bound, ten percent of the nominal parameter norm.
  double rho = 0.1 * default_theta().norm();
  double epsilon = 5.0;  // boundary-layer width
};

class RobustController {
 public:
  RobustController() : theta0_(default_theta()) {}
  RobustController(const Theta& theta0, const ControllerGains& gains)
      : theta0_(theta0), gains_(gains) {}

  const Theta& theta0() const { return theta0_; }
  const ControllerGains& gains() const { return gains_; }

  Vec3 torque(const Vec3& q, const Vec3& qd, const Vec3& q_ref,
              const Vec3& qd_ref, const Vec3& qdd_ref) const {
    const Vec3 qerr = q - q_ref;
    const Vec3 nu = qd_ref - gains_.lambda.cwiseProduct(qerr);
    const Vec3 a = qdd_ref - gains_.lambda.cwiseProduct(qd - qd_ref);
    const Vec3 r = qd - nu;

    const Regressor Y = reference_regressor(q, qd, a, nu);
    const Eigen::Matrix<double, 13, 1> w = Y.transpose() * r;
    const double wn = w.norm();
    Theta dtheta;
    if (wn > gains_.epsilon) {
      dtheta = (-gains_.rho / wn) * w;
    } else {
      dtheta = (-gains_.rho / gains_.epsilon) * w;
    }
    return Y * (theta0_ + dtheta) - gains_.k.cwiseProduct(r);
  }

  // Exposed for tests: the correction term alone.
  Theta parameter_correction(const Vec3& q, const Vec3& qd, const Vec3& q_ref,
                             const Vec3& qd_ref, const Vec3& qdd_ref) const {
    const Vec3 qerr = q - q_ref;
    const Vec3 nu = qd_ref - gains_.lambda.cwiseProduct(qerr);
    const Vec3 a = qdd_ref - gains_.lambda.cwiseProduct(qd - qd_ref);
    const Vec3 r = qd - nu;
    const Regressor Y = reference_regressor(q, qd, a, nu);
    const Eigen::Matrix<double, 13, 1> w = Y.transpose() * r;
    const double wn = w.norm();
    if (wn > gains_.epsilon) return (-gains_.rho / wn) * w;
    return (-gains_.rho / gains_.epsilon) * w;
  }

 private:
  Theta theta0_;
  ControllerGains gains_;
};

}  // namespace regen
