#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "epinet/spectral.hpp"

namespace epinet {

inline double quarantine_cost(const Vector& q, const Vector& z) {
  detail::require_size(q.size(), z.size(), "quarantine rates");
  if ((q.array() >= 1.0).any()) throw PreconditionError("quarantine cost has a pole at q = 1");
  return (z.array() / (1.0 - q.array())).sum();
}

inline double quarantine_cost(const PolicyVector& q, const EconomicCosts& z) {
  return quarantine_cost(q.stacked(), z.stacked());
}

inline Vector grad_cost(const Vector& q, const Vector& z) {
  detail::require_size(q.size(), z.size(), "quarantine rates");
  if ((q.array() >= 1.0).any()) throw PreconditionError("cost gradient has a pole at q = 1");
  return (z.array() / (1.0 - q.array()).square()).matrix();
}

struct FeasibilityReport {
  double alpha = 0.0;
  double alpha_bound_rate = 0.0;
  double alpha_bound_spectral = 0.0;
  double m = 0.0;  ///< max |(B0)_ii|
  double x = 0.0;  ///< min_j eps beta_s s_j a_jj
  bool box_condition_holds = false;
  bool strongly_connected = false;
  bool irreducible = false;    ///< digraph of the infection matrix
  bool s_positive = false;
  bool feasible = false;
  std::vector<std::string> reasons;
};

/// Checks the decay target against both upper bounds and reports the
/// quantities behind the a priori box-containment condition. `feasible` does
/// not depend on that condition; box containment is verified on the solution.
inline FeasibilityReport feasibility_check(const Vector& s0, const Matrix& flow,
                                           const EpidemicParams& p, double alpha) {
  FeasibilityReport r;
  r.alpha = alpha;
  const Eigen::Index n = s0.size();
  detail::require_size(flow.rows(), n, "flow");
  detail::require_size(flow.cols(), n, "flow");
  const Vector self = p.beta_a * s0.cwiseProduct(flow.diagonal());
  r.alpha_bound_rate = std::min(p.r_s + 1.0, p.epsilon + p.r_a + 1.0 - self.maxCoeff());
  const Matrix C0 = assemble_quarantine_matrix(s0, flow, p, Vector::Ones(2 * n));
  r.alpha_bound_spectral = -spectral_abscissa(C0);
  Matrix B0 = C0;
  B0.diagonal().array() += alpha;
  r.m = B0.diagonal().cwiseAbs().maxCoeff();
  r.x = (p.epsilon * p.beta_s * s0.cwiseProduct(flow.diagonal())).minCoeff();
  r.box_condition_holds = 1.0 + r.x / (r.m * r.m) >= r.m;
  r.strongly_connected = check_strong_connectivity(flow);
  r.irreducible = check_strong_connectivity(C0);
  r.s_positive = (s0.array() > 0.0).all();

  if (!(alpha >= 0.0)) r.reasons.push_back("alpha must be nonnegative");
  if (!(alpha < r.alpha_bound_rate)) {
    r.reasons.push_back("alpha " + std::to_string(alpha) + " >= rate bound " +
                        std::to_string(r.alpha_bound_rate));
  }
  if (!(alpha < r.alpha_bound_spectral)) {
    r.reasons.push_back("alpha " + std::to_string(alpha) + " >= spectral bound " +
                        std::to_string(r.alpha_bound_spectral));
  }
  if (!r.strongly_connected) r.reasons.push_back("infection flow is not strongly connected");
  if (!r.irreducible) r.reasons.push_back("infection matrix is reducible");
  if (!r.s_positive) r.reasons.push_back("susceptible fractions must be positive");
  r.feasible = r.reasons.empty();
  return r;
}

/// B0 = M(q = 1) + alpha I.
inline Matrix build_B0(const Vector& s0, const Matrix& flow, const EpidemicParams& p, double alpha) {
  const Eigen::Index n = s0.size();
  Matrix B0 = assemble_quarantine_matrix(s0, flow, p, Vector::Ones(2 * n));
  B0.diagonal().array() += alpha;
  const double lam = spectral_abscissa(B0);
  if (!(lam < 0.0)) {
    const auto rep = feasibility_check(s0, flow, p, alpha);
    throw SolverError("B0 is not Hurwitz (lambda_max = " + std::to_string(lam) +
                      "); alpha must stay below " +
                      std::to_string(std::min(rep.alpha_bound_rate, rep.alpha_bound_spectral)));
  }
  return B0;
}

/// -B^-1 for a Hurwitz Metzler B, elementwise nonnegative.
inline Matrix neg_inverse(const Matrix& B) {
  const Eigen::Index m = B.rows();
  const Eigen::PartialPivLU<Matrix> lu(B);
  const Matrix rhs = -Matrix::Identity(m, m);
  Matrix X = lu.solve(rhs);
  X += lu.solve(rhs - B * X);
  if (!X.allFinite()) throw SolverError("B0 is numerically singular");
  if (X.minCoeff() < -1e-12) {
    throw SolverError("-B0^-1 has a negative entry " + std::to_string(X.minCoeff()));
  }
  return X.cwiseMax(0.0);
}

struct BalanceResult {
  Vector d_star;
  double imbalance = 0.0;
  int iterations = 0;
};

namespace detail {

// max_i |r_i - c_i| / (r_i + c_i) over the off-diagonal part of D^-1 W D.
inline double imbalance(const Matrix& W, const Vector& d) {
  const Matrix Wb = d.cwiseInverse().asDiagonal() * W * d.asDiagonal();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    const double r = Wb.row(i).sum() - Wb(i, i);
    const double c = Wb.col(i).sum() - Wb(i, i);
    worst = std::max(worst, std::abs(r - c) / (r + c));
  }
  return worst;
}

}  // namespace detail

/// Osborne iteration for a positive d making D^-1 W D weight balanced (equal
/// off-diagonal row and column sums). Gauge d_1 = 1.
inline BalanceResult balance(const Matrix& W, double tol = 1e-9, int max_sweeps = 1000000) {
  if (W.rows() != W.cols()) throw DimensionError("balancing needs a square matrix");
  const Eigen::Index m = W.rows();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != j && !(W(i, j) >= 0.0)) throw PreconditionError("balancing needs nonnegative off-diagonals");
    }
  }
  BalanceResult res;
  res.d_star = Vector::Ones(m);
  if (m == 1) return res;
  if (!check_strong_connectivity(W)) throw PreconditionError("balancing needs an irreducible matrix");

  Vector& d = res.d_star;
  res.imbalance = detail::imbalance(W, d);
  while (res.imbalance > tol) {
    if (res.iterations >= max_sweeps) {
      throw SolverError("balancing did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      double out = 0.0, in = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j == i) continue;
        out += W(i, j) * d(j);
        in += W(j, i) / d(j);
      }
      d(i) = std::sqrt(out / in);
    }
    d /= d(0);
    ++res.iterations;
    res.imbalance = detail::imbalance(W, d);
  }
  return res;
}

struct QuarantineSolution {
  PolicyVector q;
  Vector v_star;
  double lambda = 0.0;
  double cost = 0.0;
  FeasibilityReport feasibility;
  BalanceResult balancing;
};

/// Minimum-cost quarantine rates meeting lambda_max(M(q)) <= -alpha, via the
/// balancing of diag(z)(-B0^-1).
inline QuarantineSolution optimal_quarantine(const Vector& s0, const Matrix& flow,
                                             const EpidemicParams& p, double alpha,
                                             const EconomicCosts& costs) {
  const Eigen::Index n = s0.size();
  const Vector z = costs.stacked();
  detail::require_size(z.size(), 2 * n, "economic costs");
  if ((z.array() <= 0.0).any()) throw PreconditionError("economic costs must be positive");

  QuarantineSolution sol;
  sol.feasibility = feasibility_check(s0, flow, p, alpha);
  if (!sol.feasibility.feasible) {
    std::string why;
    for (const auto& r : sol.feasibility.reasons) why += (why.empty() ? "" : "; ") + r;
    throw PreconditionError("quarantine problem infeasible: " + why);
  }
  const Matrix K = neg_inverse(build_B0(s0, flow, p, alpha));
  sol.balancing = balance(z.asDiagonal() * K);
  const Vector& d = sol.balancing.d_star;
  sol.v_star = (K * d).cwiseQuotient(d);

  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (sol.v_star(i) < 1.0 - 1e-12) {
      throw SolverError("optimal quarantine rate " + std::to_string(i) +
                        " would be negative (v* = " + std::to_string(sol.v_star(i)) +
                        "); the box condition fails for this instance");
    }
  }
  const Vector q = (1.0 - sol.v_star.array().inverse()).max(0.0).matrix();
  sol.q = PolicyVector::from_stacked(q);
  sol.lambda = spectral_abscissa(assemble_quarantine_matrix(s0, flow, p, sol.q));
  if (std::abs(sol.lambda + alpha) > 1e-6) {
    throw SolverError("decay constraint not active at the balancing solution: lambda_max = " +
                      std::to_string(sol.lambda));
  }
  sol.cost = quarantine_cost(q, z);
  return sol;
}

/// g_1 = lambda_max(M(q)) + alpha, g_{1+i} = -q_i, g_{2n+1+i} = q_i - 1.
struct Constraints {
  Vector g;
  Vector grad_g1;
};

inline Constraints quarantine_constraints(const Vector& q, const Vector& s0, const Matrix& flow,
                                          const EpidemicParams& p, double alpha) {
  const Eigen::Index m = q.size();
  const EigenTriple e = dominant_eigenpair(assemble_quarantine_matrix(s0, flow, p, q));
  Constraints c;
  c.g.resize(2 * m + 1);
  c.g(0) = e.lambda + alpha;
  c.g.segment(1, m) = -q;
  c.g.segment(1 + m, m) = q.array() - 1.0;
  c.grad_g1 = grad_lambda_quarantine(e);
  return c;
}

inline double aug_lagrangian(const Vector& q, const Vector& lambda, double rho, const Vector& s0,
                             const Matrix& flow, const EpidemicParams& p, double alpha,
                             const Vector& z) {
  if (!(rho > 0.0)) throw PreconditionError("rho must be positive");
  detail::require_size(lambda.size(), 2 * q.size() + 1, "dual vector");
  if ((lambda.array() < 0.0).any()) throw PreconditionError("dual variables must be nonnegative");
  const Vector g = quarantine_constraints(q, s0, flow, p, alpha).g;
  const Eigen::ArrayXd hinge = (rho * g + lambda).array().max(0.0);
  return quarantine_cost(q, z) + (hinge.square() - lambda.array().square()).sum() / (2.0 * rho);
}

struct PdgdOptions {
  double rho = 1.0;
  double step = 1e-3;
  long max_steps = 10000000;
  double tol = 1e-9;
  double delta = 1e-6;
  long log_every = 1000;
};

struct PdgdResult {
  PolicyVector q;
  Vector lambda;
  SolveTrace trace;
  std::vector<double> log_times;
  std::vector<double> distance_to_limit;
  bool converged = false;
};

/// Forward-Euler integration of the augmented primal-dual gradient flow.
inline PdgdResult solve_pdgd(const Vector& q0, const Vector& lambda0, const Vector& s0,
                             const Matrix& flow, const EpidemicParams& p, double alpha,
                             const Vector& z, const PdgdOptions& opt = {}) {
  const Eigen::Index m = q0.size();
  detail::require_size(m, 2 * s0.size(), "q0");
  detail::require_size(z.size(), m, "economic costs");
  detail::require_size(lambda0.size(), 2 * m + 1, "dual vector");
  if (!(opt.rho > 0.0) || !(opt.step > 0.0)) throw PreconditionError("rho and step must be positive");
  if ((lambda0.array() < 0.0).any()) throw PreconditionError("dual variables must be nonnegative");
  const double upper = 1.0 - opt.delta;
  if ((q0.array() < 0.0).any() || (q0.array() > upper).any()) {
    throw PreconditionError("q0 must lie in [0, 1 - delta]");
  }

  Vector q = q0, lam = lambda0;
  PdgdResult res;
  std::vector<Vector> snapshots;
  double min_rate = std::numeric_limits<double>::infinity();
  res.trace.termination = "max_steps";

  auto record = [&](long k, double rate) {
    Vector y(q.size() + lam.size());
    y << q, lam;
    snapshots.push_back(std::move(y));
    res.log_times.push_back(static_cast<double>(k) * opt.step);
    res.trace.objective.push_back(quarantine_cost(q, z));
    res.trace.grad_norm.push_back(rate);
    res.trace.step.push_back(opt.step);
  };

  long k = 0;
  for (; k < opt.max_steps; ++k) {
    const Constraints c = quarantine_constraints(q, s0, flow, p, alpha);
    const Vector hinge = (opt.rho * c.g + lam).cwiseMax(0.0);
    Vector qdot = -grad_cost(q, z) - hinge(0) * c.grad_g1;
    qdot += hinge.segment(1, m) - hinge.segment(1 + m, m);
    const Vector ldot = (hinge - lam) / opt.rho;
    const double qn = qdot.norm();
    if (!(qn <= 1e6)) {
      throw SolverError("primal-dual dynamics diverged at step " + std::to_string(k));
    }
    const double rate = std::sqrt(qn * qn + ldot.squaredNorm());
    if (k % opt.log_every == 0) {
      record(k, rate);
      min_rate = std::min(min_rate, rate);
      if (rate > 1e3 * min_rate && rate > 1e-3) {
        throw SolverError("primal-dual dynamics oscillate at step " + std::to_string(k) +
                          "; reduce the step size");
      }
    }
    if (rate <= opt.tol) {
      res.converged = true;
      res.trace.termination = "converged";
      break;
    }
    q = (q + opt.step * qdot).cwiseMax(0.0).cwiseMin(upper);
    lam = (lam + opt.step * ldot).cwiseMax(0.0);
  }
  res.trace.iterations = static_cast<int>(std::min<long>(k, std::numeric_limits<int>::max()));
  if (k % opt.log_every != 0) record(k, std::numeric_limits<double>::quiet_NaN());

  if (res.converged && (q.array() >= upper).any()) {
    throw SolverError("upper safety clamp is active at the primal-dual limit");
  }
  Vector end(q.size() + lam.size());
  end << q, lam;
  for (const auto& y : snapshots) res.distance_to_limit.push_back((y - end).norm());
  res.q = PolicyVector::from_stacked(q);
  res.lambda = lam;
  return res;
}

struct KktCheck {
  Vector duals;                 ///< recovered multipliers, one per constraint
  std::vector<Eigen::Index> active;
  double residual = 0.0;        ///< ||grad f + sum mu_i grad g_i||
};

/// Recovers multipliers of the constraints active at q (|g_i| <= tol) by
/// least squares and reports the stationarity residual.
inline KktCheck kkt_stationarity(const Vector& q, const Vector& s0, const Matrix& flow,
                                 const EpidemicParams& p, double alpha, const Vector& z,
                                 double tol = 1e-6) {
  const Eigen::Index m = q.size();
  const Constraints c = quarantine_constraints(q, s0, flow, p, alpha);
  KktCheck out;
  for (Eigen::Index i = 0; i < c.g.size(); ++i) {
    if (std::abs(c.g(i)) <= tol) out.active.push_back(i);
  }
  auto grad_of = [&](Eigen::Index i) {
    if (i == 0) return Vector(c.grad_g1);
    Vector e = Vector::Zero(m);
    e(i <= m ? i - 1 : i - 1 - m) = i <= m ? -1.0 : 1.0;
    return e;
  };
  Matrix G(m, static_cast<Eigen::Index>(out.active.size()));
  for (Eigen::Index a = 0; a < G.cols(); ++a) G.col(a) = grad_of(out.active[static_cast<size_t>(a)]);
  const Vector gf = grad_cost(q, z);
  out.duals = Vector::Zero(c.g.size());
  Vector mu = Vector::Zero(G.cols());
  if (G.cols() > 0) mu = G.colPivHouseholderQr().solve(-gf);
  for (Eigen::Index a = 0; a < G.cols(); ++a) out.duals(out.active[static_cast<size_t>(a)]) = mu(a);
  out.residual = (gf + G * mu).norm();
  return out;
}

}  // namespace epinet
