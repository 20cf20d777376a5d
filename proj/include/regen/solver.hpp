#pragma once

// Equality-constrained NLP solver for box-bounded problems:
//
//   min f(x)  s.t.  c(x) = 0,  l <= x <= u.
//
// Outer loop: augmented Lagrangian with first-order multiplier updates and
// penalty growth on insufficient feasibility progress. Inner loop: damped
// projected Newton on the augmented Lagrangian. The Newton model uses the
// Gauss-Newton Hessian f_xx + mu J^T J, built from the problem's sparse
// constraint Jacobian and (optional) sparse objective Hessian, factored with
// a sparse LDL^T. Variables pressed against an active bound are frozen out
// of the linear system; steps are globalized by Armijo backtracking along
// the projected arc.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace regen {

using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

struct NlpProblem {
  int n = 0;
  int m = 0;
  // Returns f(x); fills *grad (size n) when grad is non-null.
  std::function<double(const VectorXd& x, VectorXd* grad)> objective;
  // Fills c(x) (size m). May be empty when m == 0.
  std::function<void(const VectorXd& x, VectorXd& c)> constraints;
  // Fills the m-by-n constraint Jacobian. May be empty when m == 0.
  std::function<void(const VectorXd& x, SparseMat& J)> jacobian;
  // Optional n-by-n objective Hessian (both triangles). When absent the
  // Newton model falls back to the damping term alone.
  std::function<void(const VectorXd& x, SparseMat& H)> objective_hessian;
  VectorXd lower;  // size n; -inf entries allowed
  VectorXd upper;  // size n; +inf entries allowed
};

struct NlpOptions {
  double tol = 1e-6;       // projected-gradient norm at the solution
  double feas_tol = 1e-6;  // max-norm of c at the solution
  int max_outer = 40;
  int max_inner = 200;  // Newton iterations per outer round
  double mu_init = 10.0;
  double mu_growth = 10.0;
  double mu_max = 1e10;
  double damping_init = 1e-4;  // Levenberg shift added to the Newton system
  double damping_max = 1e12;
  double max_step = 1e3;  // cap on the first trial step, inf-norm
  bool verbose = false;
};

struct NlpReport {
  bool converged = false;
  int outer_iterations = 0;
  long inner_iterations = 0;
  long evaluations = 0;
  double objective = 0.0;
  double stationarity = std::numeric_limits<double>::infinity();
  double feasibility = 0.0;
  double mu = 0.0;
  std::string message;
};

inline void box_project(VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  x = x.cwiseMax(lo).cwiseMin(hi);
}

// Minimizes the problem starting from x0 (projected into the box). Returns
// the best iterate found; `report` tells whether it satisfies the tolerances.
inline VectorXd nlp_minimize(const NlpProblem& p, const VectorXd& x0,
                             const NlpOptions& opt, NlpReport& report) {
  if (p.n <= 0 || static_cast<int>(x0.size()) != p.n) {
    throw std::invalid_argument("nlp_minimize: bad problem dimensions");
  }
  if (!p.objective) {
    throw std::invalid_argument("nlp_minimize: objective is required");
  }
  if (p.m > 0 && (!p.constraints || !p.jacobian)) {
    throw std::invalid_argument(
        "nlp_minimize: constraint values and Jacobian are required when m > 0");
  }
  const VectorXd lo = p.lower.size() == p.n
                          ? p.lower
                          : VectorXd::Constant(
                                p.n, -std::numeric_limits<double>::infinity());
  const VectorXd hi = p.upper.size() == p.n
                          ? p.upper
                          : VectorXd::Constant(
                                p.n, std::numeric_limits<double>::infinity());

  if (!x0.allFinite()) {
    throw std::invalid_argument("nlp_minimize: non-finite initial point");
  }
  VectorXd x = x0;
  box_project(x, lo, hi);

  VectorXd lambda = VectorXd::Zero(p.m);
  double mu = p.m > 0 ? opt.mu_init : 0.0;

  report = NlpReport{};

  // State shared by the loops; all of it describes the current iterate x.
  double fval = 0.0;        // f(x)
  VectorXd gf(p.n);         // objective gradient
  VectorXd c(p.m), ct(p.m); // constraint values (current, trial)
  SparseMat J(p.m, p.n);
  SparseMat Hf(p.n, p.n);
  double phi = 0.0;   // augmented Lagrangian value
  VectorXd g(p.n);    // augmented Lagrangian gradient
  VectorXd d(p.n), xt(p.n), rhs(p.n);
  std::vector<char> free_var(p.n, 1);
  std::vector<Eigen::Triplet<double>> trips;

  // Value-only evaluation of the augmented Lagrangian at a trial point.
  const auto value_at = [&](const VectorXd& xe, VectorXd& ce, double* fout) {
    ++report.evaluations;
    const double f = p.objective(xe, nullptr);
    if (fout) *fout = f;
    if (p.m == 0) return f;
    p.constraints(xe, ce);
    return f + lambda.dot(ce) + 0.5 * mu * ce.squaredNorm();
  };

  // Full evaluation at x: objective, gradient, constraints, Jacobian.
  const auto refresh_full = [&] {
    ++report.evaluations;
    fval = p.objective(x, &gf);
    if (p.m > 0) {
      p.constraints(x, c);
      p.jacobian(x, J);
    }
    if (p.objective_hessian) p.objective_hessian(x, Hf);
  };

  // Recombines phi and g from cached quantities after lambda or mu change.
  const auto recombine = [&] {
    if (p.m > 0) {
      phi = fval + lambda.dot(c) + 0.5 * mu * c.squaredNorm();
      g = gf + J.transpose() * (lambda + mu * c);
    } else {
      phi = fval;
      g = gf;
    }
  };

  refresh_full();
  recombine();
  if (!std::isfinite(phi)) {
    throw std::invalid_argument("nlp_minimize: non-finite value at x0");
  }

  const double act_eps = 1e-10;
  const auto pg_norm = [&] {
    double nrm = 0.0;
    for (int i = 0; i < p.n; ++i) {
      const double step = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
      nrm = std::max(nrm, std::abs(step));
    }
    return nrm;
  };

  double eta = std::max(opt.feas_tol,
                        std::min(0.1, 1.0 / std::sqrt(std::max(mu, 1.0))));
  double omega = std::max(opt.tol, std::min(0.1, 1.0 / std::max(mu, 1.0)));
  if (p.m == 0) omega = opt.tol;

  int outer = 0;
  bool done = false;
  std::string stop_reason = "max outer iterations";
  while (outer < opt.max_outer && !done) {
    ++outer;

    // ---- inner damped projected Newton round ----
    double nu = opt.damping_init;
    double pgn = pg_norm();
    for (int it = 0; it < opt.max_inner && pgn > omega; ++it) {
      ++report.inner_iterations;

      for (int i = 0; i < p.n; ++i) {
        const double span = act_eps * (1.0 + std::abs(x[i]));
        const bool at_lo = x[i] - lo[i] <= span && g[i] > 0.0;
        const bool at_hi = hi[i] - x[i] <= span && g[i] < 0.0;
        free_var[i] = at_lo || at_hi ? 0 : 1;
      }

      // Newton model on the free subspace; frozen variables get unit rows.
      SparseMat A(p.n, p.n);
      if (p.m > 0) {
        A = SparseMat(J.transpose()) * J * mu;
        if (p.objective_hessian) A += Hf;
      } else if (p.objective_hessian) {
        A = Hf;
      }
      trips.clear();
      for (int k = 0; k < A.outerSize(); ++k) {
        for (SparseMat::InnerIterator itA(A, k); itA; ++itA) {
          if (free_var[itA.row()] && free_var[itA.col()]) {
            trips.emplace_back(itA.row(), itA.col(), itA.value());
          }
        }
      }
      for (int i = 0; i < p.n; ++i) {
        trips.emplace_back(i, i, free_var[i] ? nu : 1.0);
      }
      SparseMat H(p.n, p.n);
      H.setFromTriplets(trips.begin(), trips.end());

      for (int i = 0; i < p.n; ++i) rhs[i] = free_var[i] ? -g[i] : 0.0;

      Eigen::SimplicialLDLT<SparseMat> ldlt(H);
      bool usable = ldlt.info() == Eigen::Success;
      if (usable) {
        d = ldlt.solve(rhs);
        usable = d.allFinite() &&
                 g.dot(d) < -1e-14 * std::max(1.0, d.norm() * g.norm());
      }
      if (!usable) {
        if (nu >= opt.damping_max) break;
        nu *= 10.0;
        continue;
      }

      double alpha = 1.0;
      const double dinf = d.lpNorm<Eigen::Infinity>();
      if (dinf > opt.max_step) alpha = opt.max_step / dinf;

      bool accepted = false;
      double phit = 0.0, ft = 0.0;
      for (int ls = 0; ls < 50; ++ls) {
        xt = x + alpha * d;
        box_project(xt, lo, hi);
        const double pred = g.dot(xt - x);
        if (pred < 0.0) {
          phit = value_at(xt, ct, &ft);
          if (std::isfinite(phit) && phit <= phi + 1e-4 * pred) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (nu >= opt.damping_max) break;
        nu *= 10.0;
        continue;
      }

      x.swap(xt);
      fval = ft;
      c.swap(ct);
      ++report.evaluations;
      p.objective(x, &gf);
      if (p.m > 0) p.jacobian(x, J);
      if (p.objective_hessian) p.objective_hessian(x, Hf);
      recombine();
      nu = std::max(nu / 3.0, 1e-12);
      pgn = pg_norm();
    }

    report.stationarity = pgn;
    if (opt.verbose) {
      std::printf("outer %2d  mu %.1e  phi %+.6e  pg %.3e  feas %.3e\n", outer,
                  mu, phi, pgn,
                  p.m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0);
    }
    if (p.m == 0) {
      done = pgn <= opt.tol;
      stop_reason = done ? "converged" : "inner iteration limit";
      break;
    }

    const double feas = c.lpNorm<Eigen::Infinity>();
    report.feasibility = feas;

    if (feas <= std::max(opt.feas_tol, eta)) {
      if (feas <= opt.feas_tol && pgn <= opt.tol) {
        done = true;
        stop_reason = "converged";
        break;
      }
      // Good progress: tighten and update multipliers (keeps mu moderate).
      lambda += mu * c;
      eta = std::max(opt.feas_tol, eta * 0.2);
      omega = std::max(opt.tol, omega * 0.2);
    } else {
      if (mu >= opt.mu_max) {
        stop_reason = "penalty limit reached";
        break;
      }
      mu = std::min(mu * opt.mu_growth, opt.mu_max);
      eta = std::max(opt.feas_tol,
                     std::min(0.1, 1.0 / std::sqrt(std::max(mu, 1.0))));
      omega = std::max(opt.tol, omega);
    }
    // Multipliers or penalty changed; cached f, c, J stay valid at x.
    recombine();
  }

  report.converged = done;
  report.outer_iterations = outer;
  report.objective = fval;
  report.mu = mu;
  if (p.m > 0 && c.size() > 0) {
    report.feasibility = c.lpNorm<Eigen::Infinity>();
  }
  report.message = stop_reason;
  return x;
}

inline VectorXd nlp_minimize(const NlpProblem& p, const VectorXd& x0,
                             const NlpOptions& opt = {}) {
  NlpReport rep;
  return nlp_minimize(p, x0, opt, rep);
}

}  // namespace regen
