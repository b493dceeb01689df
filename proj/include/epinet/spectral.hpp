#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "epinet/model.hpp"

namespace epinet {

/// Dominant eigenvalue with its right (u) and left (v) Perron vectors, both
/// positive with unit Euclidean norm.
struct EigenTriple {
  double lambda = 0.0;
  Vector u, v;
  double residual = 0.0;
  int iterations = 0;
};

struct EigenOptions {
  double tol = 1e-12;
  int max_iters = 100000;
  int max_squarings = 64;
};

namespace detail {

inline void require_metzler(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("eigenpair needs a square matrix");
  if (M.rows() == 0) throw DimensionError("eigenpair of an empty matrix");
  if (!M.allFinite()) throw PreconditionError("matrix has non-finite entries");
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (i != j && M(i, j) < 0.0) {
        throw PreconditionError("matrix is not Metzler: negative entry at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

inline double inf_norm(const Matrix& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace detail

/// Rightmost eigenpair of an irreducible Metzler matrix.
///
/// Works on the nonnegative primitive shift P = M + sigma I. A few rounds of
/// normalized repeated squaring drive P^(2^k) to its rank-one Perron limit,
/// whose row and column sums give u and v even when the spectral gap is tiny;
/// plain power steps on P then polish the pair until both residuals fall below
/// tol * max(1, ||M||).
inline EigenTriple dominant_eigenpair(const Matrix& M, const EigenOptions& opt = {}) {
  detail::require_metzler(M);
  const Eigen::Index n = M.rows();
  if (n == 1) {
    return {M(0, 0), Vector::Ones(1), Vector::Ones(1), 0.0, 0};
  }
  if (!check_strong_connectivity(M)) {
    throw PreconditionError("matrix is reducible; the dominant eigenpair is not guaranteed positive");
  }

  const double sigma = M.diagonal().cwiseAbs().maxCoeff() + 1.0;
  Matrix P = M;
  P.diagonal().array() += sigma;

  Matrix Q = P / P.maxCoeff();
  for (int k = 0; k < opt.max_squarings; ++k) {
    Matrix next = Q * Q;
    next /= next.maxCoeff();
    const double change = (next - Q).cwiseAbs().maxCoeff();
    Q.swap(next);
    if (change <= 1e-15) break;
  }
  Vector u = Q.rowwise().sum();
  Vector v = Q.colwise().sum().transpose();
  u.normalize();
  v.normalize();

  const double bound = opt.tol * std::max(1.0, detail::inf_norm(M));
  for (int it = 0; it <= opt.max_iters; ++it) {
    const Vector Mu = M * u;
    const Vector Mv = M.transpose() * v;
    const double lambda = v.dot(Mu) / v.dot(u);
    const double res = std::max((Mu - lambda * u).norm(), (Mv - lambda * v).norm());
    if (res <= bound) {
      return {lambda, u, v, res, it};
    }
    u = (Mu + sigma * u).normalized();
    v = (Mv + sigma * v).normalized();
  }
  throw SolverError("power iteration did not converge within " +
                    std::to_string(opt.max_iters) + " iterations");
}

/// Largest real part of the spectrum of a (possibly reducible) Metzler matrix:
/// the maximum over strongly connected components of each block's Perron root.
inline double spectral_abscissa(const Matrix& M) {
  detail::require_metzler(M);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& comp : strong_components(M)) {
    const auto m = static_cast<Eigen::Index>(comp.size());
    if (m == 1) {
      best = std::max(best, M(comp[0], comp[0]));
      continue;
    }
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = M(comp[a], comp[b]);
    }
    best = std::max(best, dominant_eigenpair(sub).lambda);
  }
  return best;
}

/// Gradient of the dominant eigenvalue of the travel matrix with respect to
/// the flattened (column-major) travel rates.
inline Vector grad_lambda_travel(const NetworkSpec& net, const Vector& s0,
                                 const EpidemicParams& p, const Vector& tau_vec) {
  const Eigen::Index n = s0.size();
  detail::require_size(net.populations.size(), n, "populations");
  const Matrix tau = unvec(tau_vec, n);
  if (p.beta_a == 0.0 && p.beta_s == 0.0) return Vector::Zero(n * n);

  const Vector& N = net.populations;
  const Matrix A = build_infection_flow(tau, N);
  const EigenTriple e = dominant_eigenpair(assemble_flow_matrix(s0, A, p));
  const double vu = e.v.dot(e.u);

  // dlambda/da_pq = y_p w_q / (v.u)
  const Vector y = e.v.head(n).cwiseProduct(s0);
  const Vector w = p.beta_a * e.u.head(n) + p.beta_s * e.u.tail(n);
  const Vector S = tau.transpose() * N;
  const Vector alpha = tau.transpose() * y;
  const Vector b = tau.transpose() * N.cwiseProduct(w);

  Vector g(n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = 0.0;
      if (S(j) > 0.0) {
        d = (y(i) * b(j) + w(i) * N(i) * alpha(j)) / S(j) -
            N(i) * alpha(j) * b(j) / (S(j) * S(j));
      }
      g(i + j * n) = d / vu;
    }
  }
  return g;
}

inline Vector grad_lambda_quarantine(const EigenTriple& e) {
  return -e.v.cwiseProduct(e.u) / e.v.dot(e.u);
}

/// dlambda/dq_i = -(v_i u_i) / (v.u) for the quarantine matrix M(q).
inline Vector grad_lambda_quarantine(const Matrix& M) {
  return grad_lambda_quarantine(dominant_eigenpair(M));
}

/// Spectral radius of the next-generation matrix -F V^-1, where F holds the
/// transmission blocks of M(q) and V = M(q) - F the transitions.
inline double reproduction_number(const Vector& s0, const Matrix& flow,
                                  const EpidemicParams& p, const PolicyVector& q) {
  const Eigen::Index n = s0.size();
  const Matrix M = assemble_quarantine_matrix(s0, flow, p, q);
  const Vector d1 = M.topLeftCorner(n, n).diagonal() -
                    p.beta_a * s0.cwiseProduct(flow.diagonal());
  const Vector d2 = M.bottomRightCorner(n, n).diagonal();
  if ((d1.array() >= 0.0).any() || (d2.array() >= 0.0).any()) {
    throw PreconditionError("transition matrix V is singular or not Hurwitz");
  }
  // V = [[diag d1, 0], [eps I, diag d2]] inverts block by block.
  Matrix Vinv = Matrix::Zero(2 * n, 2 * n);
  Vinv.topLeftCorner(n, n).diagonal() = d1.cwiseInverse();
  Vinv.bottomRightCorner(n, n).diagonal() = d2.cwiseInverse();
  Vinv.bottomLeftCorner(n, n).diagonal() =
      -p.epsilon * d1.cwiseInverse().cwiseProduct(d2.cwiseInverse());

  Matrix F = Matrix::Zero(2 * n, 2 * n);
  const Matrix SA = s0.asDiagonal() * flow;
  F.topLeftCorner(n, n) = p.beta_a * SA;
  F.topRightCorner(n, n) = p.beta_s * SA;
  const Matrix K = -F * Vinv;
  return spectral_abscissa(K.cwiseMax(0.0));
}

/// Positive d with P d <= 0 when P is Hurwitz, otherwise nothing.
inline std::optional<Vector> stability_certificate(const Matrix& P) {
  const EigenTriple e = dominant_eigenpair(P);
  if (e.lambda < 0.0) return e.u;
  return std::nullopt;
}

}  // namespace epinet
