#pragma once

#include <vector>

#include "epinet/types.hpp"

namespace epinet {

/// Column-major view of a flattened travel-rate vector: entry (i, j) sits at
/// index i + j * n.
inline Matrix unvec(const Vector& tau_vec, Eigen::Index n) {
  detail::require_size(tau_vec.size(), n * n, "travel-rate vector");
  return Eigen::Map<const Matrix>(tau_vec.data(), n, n);
}

inline Vector vec(const Matrix& tau) {
  return Eigen::Map<const Vector>(tau.data(), tau.size());
}

/// a_ij = sum_l tau_il tau_jl N_j / S_l with S_l = sum_k N_k tau_kl.
/// Columns l that nobody visits (S_l = 0) contribute nothing.
inline Matrix build_infection_flow(const Matrix& tau, const Vector& populations) {
  const Eigen::Index n = populations.size();
  if (tau.rows() != n || tau.cols() != n) {
    throw DimensionError("travel-rate matrix must be n x n with n = number of populations");
  }
  if ((populations.array() <= 0.0).any()) {
    throw PreconditionError("populations must be positive");
  }
  if ((tau.array() < 0.0).any() || !tau.allFinite()) {
    throw PreconditionError("travel rates must be finite and nonnegative");
  }
  const Vector S = tau.transpose() * populations;
  Vector inv_s = Vector::Zero(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    if (S(l) > 0.0) inv_s(l) = 1.0 / S(l);
  }
  return (tau * inv_s.asDiagonal() * tau.transpose()) * populations.asDiagonal();
}

namespace detail {

inline std::vector<char> reachable(const Matrix& A, bool transpose) {
  const Eigen::Index n = A.rows();
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<Eigen::Index> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const Eigen::Index i = stack.back();
    stack.pop_back();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = transpose ? A(j, i) : A(i, j);
      if (w > 0.0 && !seen[static_cast<size_t>(j)]) {
        seen[static_cast<size_t>(j)] = 1;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Whether the digraph with edges {(i, j) : a_ij > 0} is strongly connected.
/// Diagonal entries are irrelevant.
inline bool check_strong_connectivity(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionError("connectivity needs a square matrix");
  if (A.rows() == 0) return false;
  for (bool t : {false, true}) {
    for (char c : detail::reachable(A, t)) {
      if (!c) return false;
    }
  }
  return true;
}

/// Strongly connected components (Kosaraju). Each entry lists node indices.
inline std::vector<std::vector<Eigen::Index>> strong_components(const Matrix& A) {
  const Eigen::Index n = A.rows();
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<size_t>(n));
  for (Eigen::Index root = 0; root < n; ++root) {
    if (seen[static_cast<size_t>(root)]) continue;
    // iterative DFS recording finish order
    std::vector<std::pair<Eigen::Index, Eigen::Index>> stack{{root, 0}};
    seen[static_cast<size_t>(root)] = 1;
    while (!stack.empty()) {
      auto& [i, next] = stack.back();
      if (next < n) {
        const Eigen::Index j = next++;
        if (i != j && A(i, j) > 0.0 && !seen[static_cast<size_t>(j)]) {
          seen[static_cast<size_t>(j)] = 1;
          stack.emplace_back(j, 0);
        }
      } else {
        order.push_back(i);
        stack.pop_back();
      }
    }
  }
  std::vector<std::vector<Eigen::Index>> comps;
  std::vector<char> assigned(static_cast<size_t>(n), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (assigned[static_cast<size_t>(*it)]) continue;
    std::vector<Eigen::Index> comp;
    std::vector<Eigen::Index> stack{*it};
    assigned[static_cast<size_t>(*it)] = 1;
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      comp.push_back(i);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i && A(j, i) > 0.0 && !assigned[static_cast<size_t>(j)]) {
          assigned[static_cast<size_t>(j)] = 1;
          stack.push_back(j);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

/// Network with its flow matrix derived from tau and populations.
inline NetworkSpec make_network(const Vector& populations, const Matrix& tau) {
  NetworkSpec net;
  net.populations = populations;
  net.tau = tau;
  net.flow = build_infection_flow(tau, populations);
  return net;
}

}  // namespace epinet
