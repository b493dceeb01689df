#pragma once

#include <cmath>
#include <string>

#include "epinet/network.hpp"

namespace epinet {

inline ValidationReport validate_params(const EpidemicParams& p, const NetworkSpec& net) {
  ValidationReport r;
  auto nonneg = [&](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      r.violations.push_back(std::string(name) + " nonnegativity violated");
    }
  };
  nonneg(p.beta_a, "beta_a");
  nonneg(p.beta_s, "beta_s");
  nonneg(p.epsilon, "epsilon");
  nonneg(p.r_a, "r_a");
  nonneg(p.r_s, "r_s");
  nonneg(p.r_q, "r_q");
  nonneg(p.alpha, "alpha");
  if (p.beta_a > p.beta_s) r.violations.push_back("beta_a <= beta_s violated");

  const Eigen::Index n = net.populations.size();
  if (n == 0) {
    r.violations.push_back("network has no nodes");
    return r;
  }
  if ((net.populations.array() <= 0.0).any()) {
    r.violations.push_back("population positivity violated");
  }
  if (net.tau.rows() != n || net.tau.cols() != n) {
    r.violations.push_back("tau shape mismatch");
    return r;
  }
  if ((net.tau.array() < 0.0).any()) r.violations.push_back("tau nonnegativity violated");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row = net.tau.row(i).sum();
    if (row > 1.0 + 1e-12) {
      r.violations.push_back("tau row-sum bound violated at row " + std::to_string(i) +
                             " (sum " + std::to_string(row) + ")");
    }
  }
  if (net.flow.rows() != n || net.flow.cols() != n) {
    r.violations.push_back("flow shape mismatch");
    return r;
  }
  if ((net.flow.array() < 0.0).any()) r.violations.push_back("flow nonnegativity violated");
  if (r.ok()) {
    const Matrix A = build_infection_flow(net.tau, net.populations);
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - net.flow).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      r.violations.push_back("flow inconsistent with tau and populations");
    }
  }
  return r;
}

/// M = [[beta_a S A - (eps + r_a) I, beta_s S A], [eps I, -r_s I]], S = diag(s0).
inline Matrix assemble_flow_matrix(const Vector& s0, const Matrix& A, const EpidemicParams& p) {
  const Eigen::Index n = s0.size();
  if (A.rows() != n || A.cols() != n) {
    throw DimensionError("flow matrix must be n x n with n = size of s0");
  }
  const Matrix SA = s0.asDiagonal() * A;
  Matrix M = Matrix::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = p.beta_a * SA;
  M.topLeftCorner(n, n).diagonal().array() -= p.epsilon + p.r_a;
  M.topRightCorner(n, n) = p.beta_s * SA;
  M.bottomLeftCorner(n, n).diagonal().setConstant(p.epsilon);
  M.bottomRightCorner(n, n).diagonal().setConstant(-p.r_s);
  return M;
}

/// Linearized infection matrix as a function of the flattened travel rates.
inline Matrix assemble_travel_matrix(const Vector& s0, const Vector& tau_vec,
                                     const Vector& populations, const EpidemicParams& p) {
  const Eigen::Index n = s0.size();
  detail::require_size(populations.size(), n, "populations");
  return assemble_flow_matrix(s0, build_infection_flow(unvec(tau_vec, n), populations), p);
}

/// M(q) = M(0) - diag(q_a, q_s).
inline Matrix assemble_quarantine_matrix(const Vector& s0, const Matrix& flow,
                                         const EpidemicParams& p, const PolicyVector& q) {
  const Eigen::Index n = s0.size();
  detail::require_size(q.q_a.size(), n, "q_a");
  detail::require_size(q.q_s.size(), n, "q_s");
  Matrix M = assemble_flow_matrix(s0, flow, p);
  M.diagonal() -= q.stacked();
  return M;
}

inline Matrix assemble_quarantine_matrix(const Vector& s0, const Matrix& flow,
                                         const EpidemicParams& p, const Vector& q_stacked) {
  return assemble_quarantine_matrix(s0, flow, p, PolicyVector::from_stacked(q_stacked));
}

}  // namespace epinet
