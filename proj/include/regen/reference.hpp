#pragma once

// Joint-space motion references with consistent (q, qd, qdd) evaluation.
// The tracking controller consumes these; the optimizer's solution grids are
// wrapped into Hermite interpolants so simulation can sample between nodes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "regen/model.hpp"

namespace regen {

struct ReferencePoint {
  Vec3 q = Vec3::Zero();
  Vec3 qd = Vec3::Zero();
  Vec3 qdd = Vec3::Zero();
};

class Reference {
 public:
  virtual ~Reference() = default;
  virtual ReferencePoint at(double t) const = 0;
  virtual double duration() const = 0;
};

class HoldReference : public Reference {
 public:
  HoldReference(const Vec3& q, double duration) : q_(q), T_(duration) {}
  ReferencePoint at(double) const override { return {q_, Vec3::Zero(), Vec3::Zero()}; }
  double duration() const override { return T_; }

 private:
  Vec3 q_;
  double T_;
};

// Rest-to-rest cubic: zero velocity at both ends, monotone in each joint.
class CubicRestToRest : public Reference {
 public:
  CubicRestToRest(const Vec3& q0, const Vec3& q1, double duration)
      : q0_(q0), dq_(q1 - q0), T_(duration) {
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  }

  ReferencePoint at(double t) const override {
    const double s = std::clamp(t / T_, 0.0, 1.0);
    ReferencePoint p;
    p.q = q0_ + dq_ * (s * s * (3.0 - 2.0 * s));
    p.qd = dq_ * (6.0 * s * (1.0 - s) / T_);
    p.qdd = dq_ * ((6.0 - 12.0 * s) / (T_ * T_));
    return p;
  }
  double duration() const override { return T_; }

 private:
  Vec3 q0_, dq_;
  double T_;
};

// Piecewise cubic Hermite interpolant through (t_i, q_i) with prescribed
// joint velocities at the knots; C1 overall, acceleration piecewise linear.
class HermiteReference : public Reference {
 public:
  HermiteReference(std::vector<double> t, std::vector<Vec3> q,
                   std::vector<Vec3> qd)
      : t_(std::move(t)), q_(std::move(q)), qd_(std::move(qd)) {
    if (t_.size() < 2 || t_.size() != q_.size() || t_.size() != qd_.size()) {
      throw std::invalid_argument("HermiteReference: bad knot arrays");
    }
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
      if (!(t_[i + 1] > t_[i])) {
        throw std::invalid_argument("HermiteReference: knots must increase");
      }
    }
  }

  ReferencePoint at(double t) const override {
    const double tc = std::clamp(t, t_.front(), t_.back());
    auto hi = std::upper_bound(t_.begin(), t_.end(), tc);
    std::size_t i = std::min<std::size_t>(
        t_.size() - 2, hi == t_.begin() ? 0 : (hi - t_.begin()) - 1);
    const double h = t_[i + 1] - t_[i];
    const double u = (tc - t_[i]) / h;
    const double u2 = u * u, u3 = u2 * u;

    ReferencePoint p;
    p.q = (2 * u3 - 3 * u2 + 1) * q_[i] + (u3 - 2 * u2 + u) * h * qd_[i] +
          (-2 * u3 + 3 * u2) * q_[i + 1] + (u3 - u2) * h * qd_[i + 1];
    p.qd = ((6 * u2 - 6 * u) / h) * q_[i] + (3 * u2 - 4 * u + 1) * qd_[i] +
           ((-6 * u2 + 6 * u) / h) * q_[i + 1] + (3 * u2 - 2 * u) * qd_[i + 1];
    p.qdd = ((12 * u - 6) / (h * h)) * q_[i] + ((6 * u - 4) / h) * qd_[i] +
            ((-12 * u + 6) / (h * h)) * q_[i + 1] + ((6 * u - 2) / h) * qd_[i + 1];
    return p;
  }
  double duration() const override { return t_.back() - t_.front(); }

  const std::vector<double>& knots() const { return t_; }

 private:
  std::vector<double> t_;
  std::vector<Vec3> q_, qd_;
};

// Base trajectory plus a Gaussian bump on every joint:
//   q_j(t) = base_j(t) + sign * eps_j * exp(-(t - mu)^2 / (2 sigma^2)),
// with eps_j a fixed fraction of the base's peak |q_j|. Velocity and
// acceleration carry the analytic bump derivatives, so the perturbed motion
// is exactly as smooth as the base.
class GaussianNeighborReference : public Reference {
 public:
  GaussianNeighborReference(std::shared_ptr<const Reference> base, double sign,
                            double eps_fraction = 0.2, double mu = 1.0,
                            double sigma = 1.0 / 3.0)
      : base_(std::move(base)), sign_(sign), mu_(mu), sigma_(sigma) {
    if (!base_) throw std::invalid_argument("neighbor: null base reference");
    const int samples = 1024;
    Vec3 peak = Vec3::Zero();
    for (int i = 0; i <= samples; ++i) {
      const double t = base_->duration() * i / samples;
      peak = peak.cwiseMax(base_->at(t).q.cwiseAbs());
    }
    eps_ = eps_fraction * peak;
  }

  ReferencePoint at(double t) const override {
    ReferencePoint p = base_->at(t);
    const double z = (t - mu_) / (sigma_ * sigma_);
    const double b = std::exp(-0.5 * (t - mu_) * (t - mu_) / (sigma_ * sigma_));
    p.q += sign_ * b * eps_;
    p.qd += sign_ * (-z * b) * eps_;
    p.qdd += sign_ * ((z * z - 1.0 / (sigma_ * sigma_)) * b) * eps_;
    return p;
  }
  double duration() const override { return base_->duration(); }

  const Vec3& amplitudes() const { return eps_; }

 private:
  std::shared_ptr<const Reference> base_;
  double sign_, mu_, sigma_;
  Vec3 eps_;
};

// Back-to-back legs played in sequence (e.g. out-and-return cycles).
class ConcatReference : public Reference {
 public:
  explicit ConcatReference(std::vector<std::shared_ptr<const Reference>> legs)
      : legs_(std::move(legs)) {
    if (legs_.empty()) throw std::invalid_argument("concat: no legs");
    offsets_.resize(legs_.size() + 1, 0.0);
    for (std::size_t i = 0; i < legs_.size(); ++i) {
      offsets_[i + 1] = offsets_[i] + legs_[i]->duration();
    }
  }

  ReferencePoint at(double t) const override {
    const double tc = std::clamp(t, 0.0, offsets_.back());
    std::size_t i = 0;
    while (i + 1 < legs_.size() && tc >= offsets_[i + 1]) ++i;
    return legs_[i]->at(tc - offsets_[i]);
  }
  double duration() const override { return offsets_.back(); }

 private:
  std::vector<std::shared_ptr<const Reference>> legs_;
  std::vector<double> offsets_;
};

}  // namespace regen
