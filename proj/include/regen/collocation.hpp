#pragma once

// Direct transcription of the minimum-consumption (maximum-regeneration)
// point-to-point motion problem.
//
// Decision vector: per grid node i = 0..N, the 9-tuple (q_i, qd_i, tau_i),
// stacked in node order, so x has 9(N+1) entries. Constraints: 6 defect rows
// per interval plus 12 boundary rows, 6N+12 in total. The objective is the
// electrical energy returned to storage,
//   J = integral over t of sum_j [ tau_j qd_j - (R_j / a_j^2) tau_j^2 ],
// integrated with trapezoid weights on the same grid (maximized; the NLP
// minimizes -J). Torque bounds come from the duty-ratio limits at an assumed
// constant bus voltage.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <future>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "regen/actuator.hpp"
#include "regen/model.hpp"
#include "regen/reference.hpp"
#include "regen/solver.hpp"

namespace regen {

struct CollocationProblem {
  Vec3 q_start{0.0, -M_PI / 2.0, 0.0};
  Vec3 qd_start = Vec3::Zero();
  Vec3 q_end{M_PI / 3.0, 0.0, M_PI / 4.0};
  Vec3 qd_end = Vec3::Zero();
  double horizon = 2.0;  // [s]
  int intervals = 100;   // N; grid has N+1 nodes
  Theta theta = default_theta();
  std::array<SemiActiveJoint, 3> joints = default_joints();
  double v_bus = 27.0;  // assumed bus voltage for the torque box [V]

  enum class Defects { backward_euler, trapezoidal };
  enum class Quadrature { trapezoid, rectangle };
  Defects defects = Defects::backward_euler;
  Quadrature quadrature = Quadrature::trapezoid;

  int num_vars() const { return 9 * (intervals + 1); }
  int num_constraints() const { return 6 * intervals + 12; }
  double step() const { return horizon / intervals; }
  Vec3 tau_limit() const {
    return Vec3(joints[0].torque_limit(v_bus), joints[1].torque_limit(v_bus),
                joints[2].torque_limit(v_bus));
  }
};

struct StartOutcome {
  int index = 0;
  bool feasible = false;
  bool converged = false;
  double objective = 0.0;  // J, regeneration-positive
  double feasibility = 0.0;
  double stationarity = 0.0;
  long inner_iterations = 0;
};

struct CollocationSolution {
  std::vector<double> t;
  std::vector<Vec3> q, qd, tau;
  double objective = 0.0;       // J [J], positive = net energy into storage
  double control_effort = 0.0;  // integral of ||tau||^2, tie-break metric
  double max_defect = 0.0;
  NlpReport report;
  std::vector<StartOutcome> starts;
  int selected_start = -1;

  std::shared_ptr<HermiteReference> as_reference() const {
    return std::make_shared<HermiteReference>(t, q, qd);
  }
};

class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, CollocationSolution best_found)
      : std::runtime_error(what), best(std::move(best_found)) {}
  CollocationSolution best;
};

// Callable transcription bound to one problem instance. Each solve owns its
// workspace, so independent instances may run concurrently.
class Transcription {
 public:
  explicit Transcription(const CollocationProblem& p) : p_(p) {
    if (p_.intervals < 1) throw std::invalid_argument("intervals must be >= 1");
    if (!(p_.horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    evals_.resize(p_.intervals + 1);
    weights_.resize(p_.intervals + 1);
    const double h = p_.step();
    if (p_.quadrature == CollocationProblem::Quadrature::trapezoid) {
      for (int i = 0; i <= p_.intervals; ++i) weights_[i] = h;
      weights_.front() = weights_.back() = 0.5 * h;
    } else {
      for (int i = 0; i <= p_.intervals; ++i) weights_[i] = i == 0 ? 0.0 : h;
    }
    for (int j = 0; j < 3; ++j) rho_[j] = p_.joints[j].rho();
  }

  const CollocationProblem& problem() const { return p_; }

  NlpProblem nlp() {
    NlpProblem nlp;
    nlp.n = p_.num_vars();
    nlp.m = p_.num_constraints();
    nlp.objective = [this](const VectorXd& x, VectorXd* g) {
      return objective(x, g);
    };
    nlp.constraints = [this](const VectorXd& x, VectorXd& c) {
      constraints(x, c);
    };
    nlp.jacobian = [this](const VectorXd& x, SparseMat& J) { jacobian(x, J); };
    nlp.objective_hessian = [this](const VectorXd&, SparseMat& H) {
      objective_hessian(H);
    };
    nlp.lower = VectorXd::Constant(nlp.n, -kInf);
    nlp.upper = VectorXd::Constant(nlp.n, kInf);
    const Vec3 tl = p_.tau_limit();
    for (int i = 0; i <= p_.intervals; ++i) {
      for (int j = 0; j < 3; ++j) {
        nlp.lower[9 * i + 6 + j] = -tl[j];
        nlp.upper[9 * i + 6 + j] = tl[j];
      }
    }
    return nlp;
  }

  // Negated regenerated energy (the NLP is a minimization).
  double objective(const VectorXd& x, VectorXd* grad) const {
    if (grad) grad->setZero(x.size());
    double J = 0.0;
    for (int i = 0; i <= p_.intervals; ++i) {
      const double w = weights_[i];
      for (int j = 0; j < 3; ++j) {
        const double qd = x[9 * i + 3 + j];
        const double tau = x[9 * i + 6 + j];
        J += w * (tau * qd - rho_[j] * tau * tau);
        if (grad) {
          (*grad)[9 * i + 3 + j] = -w * tau;
          (*grad)[9 * i + 6 + j] = -w * (qd - 2.0 * rho_[j] * tau);
        }
      }
    }
    return -J;
  }

  double regenerated_energy(const VectorXd& x) const {
    return -objective(x, nullptr);
  }

  void constraints(const VectorXd& x, VectorXd& c) const {
    const int N = p_.intervals;
    const double h = p_.step();
    c.resize(p_.num_constraints());
    const bool trap = p_.defects == CollocationProblem::Defects::trapezoidal;
    const int first = trap ? 0 : 1;
    for (int i = first; i <= N; ++i) node_values(x, i, evals_[i]);

    for (int i = 0; i < N; ++i) {
      const auto q0 = x.segment<3>(9 * i), qd0 = x.segment<3>(9 * i + 3);
      const auto q1 = x.segment<3>(9 * (i + 1)),
                 qd1 = x.segment<3>(9 * (i + 1) + 3);
      if (trap) {
        c.segment<3>(6 * i) = q1 - q0 - 0.5 * h * (qd0 + qd1);
        c.segment<3>(6 * i + 3) =
            qd1 - qd0 - 0.5 * h * (evals_[i].f + evals_[i + 1].f);
      } else {
        c.segment<3>(6 * i) = q1 - q0 - h * qd1;
        c.segment<3>(6 * i + 3) = qd1 - qd0 - h * evals_[i + 1].f;
      }
    }
    const int b = 6 * N;
    c.segment<3>(b) = x.segment<3>(0) - p_.q_start;
    c.segment<3>(b + 3) = x.segment<3>(3) - p_.qd_start;
    c.segment<3>(b + 6) = x.segment<3>(9 * N) - p_.q_end;
    c.segment<3>(b + 9) = x.segment<3>(9 * N + 3) - p_.qd_end;
  }

  void jacobian(const VectorXd& x, SparseMat& J) const {
    const int N = p_.intervals;
    const double h = p_.step();
    const bool trap = p_.defects == CollocationProblem::Defects::trapezoidal;
    const int first = trap ? 0 : 1;
    for (int i = first; i <= N; ++i) node_partials(x, i, evals_[i]);

    trips_.clear();
    for (int i = 0; i < N; ++i) {
      const int rq = 6 * i, rv = 6 * i + 3;
      add_diag(rq, 9 * (i + 1), 1.0);
      add_diag(rq, 9 * i, -1.0);
      add_diag(rv, 9 * (i + 1) + 3, 1.0);
      add_diag(rv, 9 * i + 3, -1.0);
      if (trap) {
        add_diag(rq, 9 * i + 3, -0.5 * h);
        add_diag(rq, 9 * (i + 1) + 3, -0.5 * h);
        add_dynamics_block(rv, i, 0.5 * h);
        add_dynamics_block(rv, i + 1, 0.5 * h);
      } else {
        add_diag(rq, 9 * (i + 1) + 3, -h);
        add_dynamics_block(rv, i + 1, h);
      }
    }
    const int b = 6 * N;
    add_diag(b, 0, 1.0);
    add_diag(b + 3, 3, 1.0);
    add_diag(b + 6, 9 * N, 1.0);
    add_diag(b + 9, 9 * N + 3, 1.0);

    J.resize(p_.num_constraints(), p_.num_vars());
    J.setFromTriplets(trips_.begin(), trips_.end());
  }

  // Hessian of the (negated-energy) objective: constant, one 2x2 coupling
  // block per node and joint between qd_j and tau_j.
  void objective_hessian(SparseMat& H) const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(9 * (p_.intervals + 1));
    for (int i = 0; i <= p_.intervals; ++i) {
      const double w = weights_[i];
      for (int j = 0; j < 3; ++j) {
        const int iv = 9 * i + 3 + j, iu = 9 * i + 6 + j;
        t.emplace_back(iv, iu, -w);
        t.emplace_back(iu, iv, -w);
        t.emplace_back(iu, iu, 2.0 * w * rho_[j]);
      }
    }
    H.resize(p_.num_vars(), p_.num_vars());
    H.setFromTriplets(t.begin(), t.end());
  }

  // Nominal start: rest-to-rest cubic states with inverse-dynamics torques.
  VectorXd deterministic_start() const {
    const CubicRestToRest ref(p_.q_start, p_.q_end, p_.horizon);
    return from_reference(ref, nullptr);
  }

  // Perturbed start: smooth interpolant through jittered interior via points,
  // torques from inverse dynamics plus bounded noise.
  VectorXd random_start(std::mt19937& rng) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const CubicRestToRest cubic(p_.q_start, p_.q_end, p_.horizon);
    const double T = p_.horizon;
    std::vector<double> tk = {0.0, T / 3.0, 2.0 * T / 3.0, T};
    std::vector<Vec3> qk(4), qdk(4, Vec3::Zero());
    qk[0] = p_.q_start;
    qk[3] = p_.q_end;
    for (int v = 1; v <= 2; ++v) {
      Vec3 jitter;
      for (int j = 0; j < 3; ++j) {
        const double span =
            std::max(std::abs(p_.q_end[j] - p_.q_start[j]), 0.3);
        jitter[j] = 0.3 * span * u(rng);
      }
      qk[v] = cubic.at(tk[v]).q + jitter;
    }
    qdk[0] = p_.qd_start;
    qdk[3] = p_.qd_end;
    for (int v = 1; v <= 2; ++v) {
      qdk[v] = (qk[v + 1] - qk[v - 1]) / (tk[v + 1] - tk[v - 1]);
    }
    const HermiteReference ref(tk, qk, qdk);
    return from_reference(ref, &rng);
  }

  void unpack(const VectorXd& x, CollocationSolution& sol) const {
    const int N = p_.intervals;
    sol.t.resize(N + 1);
    sol.q.resize(N + 1);
    sol.qd.resize(N + 1);
    sol.tau.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
      sol.t[i] = p_.horizon * i / N;
      sol.q[i] = x.segment<3>(9 * i);
      sol.qd[i] = x.segment<3>(9 * i + 3);
      sol.tau[i] = x.segment<3>(9 * i + 6);
    }
    sol.objective = regenerated_energy(x);
    sol.control_effort = 0.0;
    for (int i = 0; i <= N; ++i) {
      sol.control_effort += weights_[i] * sol.tau[i].squaredNorm();
    }
    VectorXd c;
    constraints(x, c);
    sol.max_defect = c.lpNorm<Eigen::Infinity>();
  }

  VectorXd pack(const CollocationSolution& sol) const {
    const int N = p_.intervals;
    if (static_cast<int>(sol.q.size()) != N + 1) {
      throw std::invalid_argument("pack: grid size mismatch");
    }
    VectorXd x(p_.num_vars());
    for (int i = 0; i <= N; ++i) {
      x.segment<3>(9 * i) = sol.q[i];
      x.segment<3>(9 * i + 3) = sol.qd[i];
      x.segment<3>(9 * i + 6) = sol.tau[i];
    }
    return x;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  void node_values(const VectorXd& x, int i, DynamicsEval& ev) const {
    evaluate_dynamics(x.segment<3>(9 * i), x.segment<3>(9 * i + 3),
                      x.segment<3>(9 * i + 6), p_.theta, false, ev);
  }
  void node_partials(const VectorXd& x, int i, DynamicsEval& ev) const {
    evaluate_dynamics(x.segment<3>(9 * i), x.segment<3>(9 * i + 3),
                      x.segment<3>(9 * i + 6), p_.theta, true, ev);
  }

  void add_diag(int row, int col, double v) const {
    for (int j = 0; j < 3; ++j) trips_.emplace_back(row + j, col + j, v);
  }

  void add_block(int row, int col, const Mat3& M) const {
    for (int r = 0; r < 3; ++r) {
      for (int cidx = 0; cidx < 3; ++cidx) {
        trips_.emplace_back(row + r, col + cidx, M(r, cidx));
      }
    }
  }

  // Entries of d(-w*f_k)/d(node k) for the defect block that integrates the
  // dynamics of node k with weight w. The identity parts of the defect rows
  // are added separately by the caller.
  void add_dynamics_block(int row, int k, double w) const {
    const DynamicsEval& ev = evals_[k];
    add_block(row, 9 * k + 6, -w * ev.D_inv);
    add_block(row, 9 * k + 3, w * (ev.D_inv * ev.dbias_dqd));
    const Vec3 g2 = ev.D_inv * (ev.dD_dq2 * ev.f + ev.dbias_dq.col(1));
    const Vec3 g3 = ev.D_inv * (ev.dD_dq3 * ev.f + ev.dbias_dq.col(2));
    for (int r = 0; r < 3; ++r) {
      trips_.emplace_back(row + r, 9 * k + 1, w * g2[r]);
      trips_.emplace_back(row + r, 9 * k + 2, w * g3[r]);
    }
  }

  VectorXd from_reference(const Reference& ref, std::mt19937* rng) const {
    const int N = p_.intervals;
    const Vec3 tl = p_.tau_limit();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd x(p_.num_vars());
    for (int i = 0; i <= N; ++i) {
      const ReferencePoint pt = ref.at(p_.horizon * i / N);
      const Vec3 tau_id = inverse_dynamics(pt.q, pt.qd, pt.qdd, p_.theta);
      x.segment<3>(9 * i) = pt.q;
      x.segment<3>(9 * i + 3) = pt.qd;
      for (int j = 0; j < 3; ++j) {
        double tau = tau_id[j];
        if (rng) tau += 0.05 * tl[j] * u(*rng);
        x[9 * i + 6 + j] = std::clamp(tau, -tl[j], tl[j]);
      }
    }
    return x;
  }

  CollocationProblem p_;
  std::vector<double> weights_;
  std::array<double, 3> rho_;
  mutable std::vector<DynamicsEval> evals_;
  mutable std::vector<Eigen::Triplet<double>> trips_;
};

struct SolveOptions {
  int random_starts = 8;  // in addition to the deterministic start
  unsigned seed = 1u;
  bool parallel = true;
  double feasible_tol = 1e-6;  // max defect for a start to count as usable
  NlpOptions nlp{.tol = 1e-5,
                 .feas_tol = 1e-6,
                 .max_outer = 40,
                 .max_inner = 200,
                 .mu_init = 100.0};
};

// Single descent from a given initial point.
inline CollocationSolution solve_from(const CollocationProblem& p,
                                      const VectorXd& x0,
                                      const NlpOptions& nlp_opts) {
  Transcription tr(p);
  NlpProblem nlp = tr.nlp();
  NlpReport rep;
  const VectorXd x = nlp_minimize(nlp, x0, nlp_opts, rep);
  CollocationSolution sol;
  tr.unpack(x, sol);
  sol.report = rep;
  return sol;
}

// Multi-start solve: one deterministic start plus `random_starts` perturbed
// ones, solved independently (concurrently when allowed) and reduced
// deterministically. Throws OptimizationError when no start reaches the
// defect tolerance.
inline CollocationSolution solve(const CollocationProblem& p,
                                 const SolveOptions& opts = {}) {
  const int total = opts.random_starts + 1;
  std::vector<VectorXd> x0(total);
  {
    Transcription tr(p);
    x0[0] = tr.deterministic_start();
    for (int s = 1; s < total; ++s) {
      std::mt19937 rng(opts.seed + 0x9e3779b9u * static_cast<unsigned>(s));
      x0[s] = tr.random_start(rng);
    }
  }

  std::vector<CollocationSolution> sols(total);
  const auto run = [&](int s) { sols[s] = solve_from(p, x0[s], opts.nlp); };

  unsigned hw = std::thread::hardware_concurrency();
  if (opts.parallel && hw > 1) {
    std::vector<std::future<void>> futs;
    futs.reserve(total);
    for (int s = 0; s < total; ++s) {
      futs.push_back(std::async(std::launch::async, run, s));
    }
    for (auto& f : futs) f.get();
  } else {
    for (int s = 0; s < total; ++s) run(s);
  }

  int best = -1;
  for (int s = 0; s < total; ++s) {
    sols[s].starts.push_back({s, sols[s].max_defect <= opts.feasible_tol,
                              sols[s].report.converged, sols[s].objective,
                              sols[s].max_defect, sols[s].report.stationarity,
                              sols[s].report.inner_iterations});
    if (!sols[s].starts[0].feasible) continue;
    if (best < 0) {
      best = s;
      continue;
    }
    const double ja = sols[s].objective, jb = sols[best].objective;
    const double tie = 1e-6 * std::max({1.0, std::abs(ja), std::abs(jb)});
    if (ja > jb + tie) {
      best = s;
    } else if (std::abs(ja - jb) <= tie &&
               sols[s].control_effort < sols[best].control_effort) {
      best = s;
    }
  }

  std::vector<StartOutcome> outcomes;
  outcomes.reserve(total);
  for (int s = 0; s < total; ++s) outcomes.push_back(sols[s].starts[0]);

  if (best < 0) {
    int least_bad = 0;
    for (int s = 1; s < total; ++s) {
      if (sols[s].max_defect < sols[least_bad].max_defect) least_bad = s;
    }
    CollocationSolution b = sols[least_bad];
    b.starts = outcomes;
    b.selected_start = -1;
    throw OptimizationError(
        "no start satisfied the defect tolerance (best max defect " +
            std::to_string(b.max_defect) + ")",
        std::move(b));
  }

  CollocationSolution result = sols[best];
  result.starts = outcomes;
  result.selected_start = best;
  return result;
}

// Doubles (or otherwise multiplies) the grid density and re-solves from the
// interpolated coarse solution.
inline CollocationSolution mesh_refine(const CollocationProblem& p,
                                       const CollocationSolution& coarse,
                                       int factor = 2,
                                       const NlpOptions& nlp_opts = SolveOptions{}.nlp) {
  if (factor < 2) throw std::invalid_argument("mesh_refine: factor must be >= 2");
  CollocationProblem fine = p;
  fine.intervals = p.intervals * factor;

  const HermiteReference ref(coarse.t, coarse.q, coarse.qd);
  const int N = fine.intervals;
  CollocationSolution init;
  init.t.resize(N + 1);
  init.q.resize(N + 1);
  init.qd.resize(N + 1);
  init.tau.resize(N + 1);
  const Vec3 tl = fine.tau_limit();
  for (int i = 0; i <= N; ++i) {
    const double t = fine.horizon * i / N;
    const ReferencePoint pt = ref.at(t);
    init.t[i] = t;
    init.q[i] = pt.q;
    init.qd[i] = pt.qd;
    // Linear interpolation of the coarse torque grid.
    const double s = t / p.horizon * p.intervals;
    const int k = std::min(p.intervals - 1, static_cast<int>(s));
    const double w = s - k;
    Vec3 tau = (1.0 - w) * coarse.tau[k] + w * coarse.tau[k + 1];
    init.tau[i] = tau.cwiseMax(-tl).cwiseMin(tl);
  }

  Transcription tr(fine);
  return solve_from(fine, tr.pack(init), nlp_opts);
}

struct GradientCheckResult {
  double max_rel_error = 0.0;        // worst entry over objective + Jacobian
  double objective_error = 0.0;      // objective gradient vs central FD
  double jacobian_error = 0.0;       // constraint Jacobian vs central FD
  std::vector<double> per_point;     // max rel error at each sampled point
};

// Compares analytic objective gradients and constraint Jacobians against
// central finite differences at `points` randomized decision vectors near the
// nominal start. Relative error uses max(1, |analytic|, |numeric|) scaling.
inline GradientCheckResult gradient_check(const CollocationProblem& p,
                                          int points = 10, unsigned seed = 7u) {
  Transcription tr(p);
  const int n = p.num_vars(), m = p.num_constraints();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VectorXd base = tr.deterministic_start();
  const Vec3 tl = p.tau_limit();

  GradientCheckResult res;
  VectorXd grad(n), cp(m), cm(m), gfd(n);
  SparseMat J;
  Eigen::MatrixXd Jfd(m, n), Jan(m, n);

  for (int pt = 0; pt < points; ++pt) {
    VectorXd x = base;
    for (int i = 0; i <= p.intervals; ++i) {
      for (int j = 0; j < 3; ++j) {
        x[9 * i + j] += 0.2 * u(rng);
        x[9 * i + 3 + j] += 0.4 * u(rng);
        double& tau = x[9 * i + 6 + j];
        tau = std::clamp(tau + 0.15 * tl[j] * u(rng), -tl[j], tl[j]);
      }
    }

    tr.objective(x, &grad);
    for (int i = 0; i < n; ++i) {
      const double h = 1e-5 * (1.0 + std::abs(x[i]));
      VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      gfd[i] = (tr.objective(xp, nullptr) - tr.objective(xm, nullptr)) /
               (2.0 * h);
      tr.constraints(xp, cp);
      tr.constraints(xm, cm);
      Jfd.col(i) = (cp - cm) / (2.0 * h);
    }
    tr.jacobian(x, J);
    Jan = Eigen::MatrixXd(J);

    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = std::abs(grad[i] - gfd[i]) /
                       std::max({1.0, std::abs(grad[i]), std::abs(gfd[i])});
      res.objective_error = std::max(res.objective_error, e);
      worst = std::max(worst, e);
    }
    for (int r = 0; r < m; ++r) {
      for (int i = 0; i < n; ++i) {
        const double e =
            std::abs(Jan(r, i) - Jfd(r, i)) /
            std::max({1.0, std::abs(Jan(r, i)), std::abs(Jfd(r, i))});
        res.jacobian_error = std::max(res.jacobian_error, e);
        worst = std::max(worst, e);
      }
    }
    res.per_point.push_back(worst);
    res.max_rel_error = std::max(res.max_rel_error, worst);
  }
  return res;
}

}  // namespace regen
