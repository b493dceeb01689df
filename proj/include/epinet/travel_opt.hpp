#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epinet/spectral.hpp"

namespace epinet {

struct TravelSolveOptions {
  double budget = 0.0;
  double beta_bt = 0.5;
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double step_tol = 1e-8;
  /// 1 marks an entry as optimizable, 0 freezes it at its initial value.
  std::optional<Vector> mask;
  /// Starting point; must be feasible for the budget. Defaults to tau0.
  std::optional<Vector> initial;
  bool keep_iterates = false;

  void validate() const {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw PreconditionError("budget must be nonnegative");
    if (!(beta_bt > 0.0 && beta_bt < 1.0)) throw PreconditionError("beta_bt must lie in (0, 1)");
    if (max_iters < 0) throw PreconditionError("max_iters must be nonnegative");
  }
};

struct TravelSolution {
  Vector tau_star;
  double f_star = 0.0;
  SolveTrace trace;
  std::vector<std::string> warnings;
  std::vector<Vector> iterates;  ///< filled when keep_iterates is set
};

/// Euclidean projection of y onto {tau >= 0, ||tau - tau0||_1 <= b}.
///
/// For a multiplier mu the minimizer is max(0, tau0 + soft(y - tau0, mu)),
/// and the l1 distance it spends is nonincreasing in mu, so mu is bracketed
/// and bisected.
inline Vector project_travel(const Vector& y, const Vector& tau0, double b) {
  detail::require_size(y.size(), tau0.size(), "projection point");
  if ((tau0.array() < 0.0).any()) throw PreconditionError("tau0 must be nonnegative");
  if (!(b >= 0.0)) throw PreconditionError("budget must be nonnegative");
  if (b == 0.0) return tau0;

  const Vector clamped = y.cwiseMax(0.0);
  if ((clamped - tau0).lpNorm<1>() <= b) return clamped;

  const Vector dy = y - tau0;
  auto at = [&](double mu) {
    const Vector soft = dy.array().sign() * (dy.array().abs() - mu).max(0.0);
    return Vector((tau0 + soft).cwiseMax(0.0));
  };
  auto gap = [&](const Vector& t) { return (t - tau0).lpNorm<1>() - b; };

  double lo = 0.0, hi = dy.cwiseAbs().maxCoeff();
  Vector best = at(hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    Vector t = at(mid);
    const double g = gap(t);
    if (g > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      best = std::move(t);
      if (g >= -1e-10) break;
    }
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  return best;
}

namespace detail {

// f(tau) with +inf outside the domain (negative rates or a disconnected A).
inline double travel_objective(const Vector& tau_vec, const NetworkSpec& net, const Vector& s0,
                               const EpidemicParams& p) {
  if ((tau_vec.array() < 0.0).any() || !tau_vec.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::Index n = s0.size();
  const Matrix tau = unvec(tau_vec, n);
  const Matrix A = build_infection_flow(tau, net.populations);
  if (!check_strong_connectivity(A)) return std::numeric_limits<double>::infinity();
  return spectral_abscissa(assemble_flow_matrix(s0, A, p));
}

}  // namespace detail

inline double travel_objective(const Vector& tau_vec, const NetworkSpec& net, const Vector& s0,
                               const EpidemicParams& p) {
  return detail::travel_objective(tau_vec, net, s0, p);
}

/// ||tau - P(tau - grad f(tau))||, zero exactly at constrained stationary points.
inline double projected_gradient_residual(const Vector& tau_vec, const NetworkSpec& net,
                                          const Vector& s0, const EpidemicParams& p, double b,
                                          const std::optional<Vector>& mask = std::nullopt) {
  Vector g = grad_lambda_travel(net, s0, p, tau_vec);
  if (mask) g = g.cwiseProduct(*mask);
  return (tau_vec - project_travel(tau_vec - g, vec(net.tau), b)).norm();
}

/// Projected gradient descent with backtracking on the dominant eigenvalue of
/// the travel matrix, within an l1 budget around the current travel rates.
inline TravelSolution optimize_travel(const NetworkSpec& net, const Vector& s0,
                                      const EpidemicParams& p, const TravelSolveOptions& opts) {
  opts.validate();
  const Eigen::Index n = s0.size();
  detail::require_size(net.size(), n, "network");
  const Vector tau0 = vec(net.tau);
  if (opts.mask) detail::require_size(opts.mask->size(), n * n, "mask");

  TravelSolution sol;
  Vector tau = opts.initial ? *opts.initial : tau0;
  detail::require_size(tau.size(), n * n, "initial travel rates");
  if ((tau.array() < 0.0).any() || (tau - tau0).lpNorm<1>() > opts.budget + 1e-9) {
    throw PreconditionError("initial travel rates are infeasible for the budget");
  }
  double f = detail::travel_objective(tau, net, s0, p);
  if (!std::isfinite(f)) throw PreconditionError("infection flow is not strongly connected at the start");
  sol.trace.objective.push_back(f);
  if (opts.keep_iterates) sol.iterates.push_back(tau);

  auto fail = [&](int k, const std::string& msg) {
    const Vector probe = project_travel(tau, tau0, opts.budget);
    const bool connected = check_strong_connectivity(build_infection_flow(unvec(probe, n), net.populations));
    throw SolverError((connected ? "backtracking exhausted" : "connectivity lost") +
                      std::string(" at iterate ") + std::to_string(k) + ": " + msg);
  };

  sol.trace.termination = "max_iters";
  if (opts.budget == 0.0 && !opts.initial) sol.trace.termination = "zero budget";
  for (int k = 0; k < opts.max_iters && sol.trace.termination != "zero budget"; ++k) {
    Vector g = grad_lambda_travel(net, s0, p, tau);
    if (opts.mask) g = g.cwiseProduct(*opts.mask);
    const double gn = g.norm();
    sol.trace.grad_norm.push_back(gn);
    if (gn <= opts.grad_tol) {
      sol.trace.termination = "grad_tol";
      break;
    }

    // Sufficient decrease on the plain gradient step; when that step leaves
    // the domain of f the test moves to its projection.
    auto sufficient = [&](double gam) {
      const Vector y = tau - gam * g;
      const double fy = detail::travel_objective(y, net, s0, p);
      if (std::isfinite(fy)) return fy <= f - 0.5 * gam * gn * gn;
      const Vector py = project_travel(y, tau0, opts.budget);
      return detail::travel_objective(py, net, s0, p) <= f - (py - tau).squaredNorm() / (2.0 * gam);
    };
    double gamma = 1.0;
    while (!sufficient(gamma)) {
      gamma *= opts.beta_bt;
      if (gamma < 1e-14) fail(k, "no sufficient decrease");
    }
    Vector next;
    double f_next = 0.0;
    for (;;) {
      next = project_travel(tau - gamma * g, tau0, opts.budget);
      f_next = detail::travel_objective(next, net, s0, p);
      if (f_next <= f) break;
      gamma *= 0.5;
      if (gamma < 1e-14) fail(k, "projected step never decreased the objective");
    }
    const double step = (next - tau).norm();
    tau = std::move(next);
    f = f_next;
    sol.trace.objective.push_back(f);
    sol.trace.step.push_back(gamma);
    sol.trace.iterations = k + 1;
    if (opts.keep_iterates) sol.iterates.push_back(tau);
    if (step <= opts.step_tol) {
      sol.trace.termination = "step_tol";
      break;
    }
  }

  sol.tau_star = tau;
  sol.f_star = f;
  const Matrix T = unvec(tau, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (T.row(i).sum() > 1.0) {
      sol.warnings.push_back("optimized travel rates of node " + std::to_string(i) +
                             " sum to " + std::to_string(T.row(i).sum()) + " > 1");
    }
  }
  return sol;
}

struct SweepPoint {
  double budget = 0.0;
  double f_star = 0.0;
  TravelSolution solution;
};

/// Solves one problem per budget, each warm-started from the previous
/// optimum, which is feasible for every larger budget.
inline std::vector<SweepPoint> budget_sweep(const NetworkSpec& net, const Vector& s0,
                                            const EpidemicParams& p,
                                            const std::vector<double>& budgets,
                                            TravelSolveOptions base = {}) {
  for (size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] < budgets[i - 1]) throw PreconditionError("budgets must be sorted ascending");
  }
  std::vector<SweepPoint> out;
  std::optional<Vector> warm;
  for (double b : budgets) {
    TravelSolveOptions o = base;
    o.budget = b;
    o.initial = warm;
    auto sol = optimize_travel(net, s0, p, o);
    warm = sol.tau_star;
    out.push_back({b, sol.f_star, std::move(sol)});
  }
  return out;
}

}  // namespace epinet
