#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "epinet/error.hpp"

namespace epinet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Rates are per day. `alpha` is the required exponential decay rate of
/// infections used by the quarantine design.
struct EpidemicParams {
  double beta_a = 0.0;   ///< transmission rate, asymptomatic
  double beta_s = 0.0;   ///< transmission rate, symptomatic
  double epsilon = 0.0;  ///< symptom onset rate
  double r_a = 0.0;      ///< recovery rate, asymptomatic
  double r_s = 0.0;      ///< recovery rate, symptomatic
  double r_q = 0.0;      ///< recovery rate, quarantined
  double alpha = 0.0;    ///< decay target

  /// Transmission pair with beta_a = eta * beta_s.
  [[nodiscard]] EpidemicParams with_transmission(double beta_s_new,
                                                 double eta) const {
    EpidemicParams p = *this;
    p.beta_s = beta_s_new;
    p.beta_a = eta * beta_s_new;
    return p;
  }
};

/// Rates used for the Massachusetts study: a common recovery rate of 0.2,
/// symptom onset 0.32 and beta_a = 0.6754 beta_s.
inline constexpr double kAsymptomaticInfectivity = 0.6754;

inline EpidemicParams reference_params(double beta_s) {
  EpidemicParams p;
  p.epsilon = 0.32;
  p.r_a = p.r_s = p.r_q = 0.2;
  return p.with_transmission(beta_s, kAsymptomaticInfectivity);
}

/// Nodes of the mobility network. `tau` holds travel rates (fraction of the
/// day spent by residents of i at j) and `flow` the derived infection-flow
/// matrix A.
struct NetworkSpec {
  Vector populations;
  Matrix tau;
  Matrix flow;

  [[nodiscard]] Eigen::Index size() const { return populations.size(); }
};

/// Per-node compartment fractions at time t. The base model keeps k at zero.
struct CompartmentState {
  Vector s, x_a, x_s, k, h;
  double t = 0.0;

  [[nodiscard]] Eigen::Index size() const { return s.size(); }

  [[nodiscard]] Vector node_sums() const { return s + x_a + x_s + k + h; }

  static CompartmentState disease_free(Eigen::Index n) {
    CompartmentState st;
    st.s = Vector::Ones(n);
    st.x_a = st.x_s = st.k = st.h = Vector::Zero(n);
    return st;
  }
};

/// Per-node quarantine rates. Stacked order is (q_a, q_s).
struct PolicyVector {
  Vector q_a, q_s;

  [[nodiscard]] Eigen::Index size() const { return q_a.size(); }

  [[nodiscard]] Vector stacked() const {
    Vector q(q_a.size() + q_s.size());
    q << q_a, q_s;
    return q;
  }

  static PolicyVector from_stacked(const Vector& q) {
    if (q.size() % 2 != 0) {
      throw DimensionError("quarantine vector must have even length");
    }
    const Eigen::Index n = q.size() / 2;
    return {q.head(n), q.tail(n)};
  }

  static PolicyVector zeros(Eigen::Index n) {
    return {Vector::Zero(n), Vector::Zero(n)};
  }
};

/// Dimensionless relative costs of quarantining, per node and class.
struct EconomicCosts {
  Vector z_a, z_s;

  [[nodiscard]] Vector stacked() const {
    Vector z(z_a.size() + z_s.size());
    z << z_a, z_s;
    return z;
  }

  /// z_a = z_s = g / max(g).
  static EconomicCosts from_gdp(const Vector& gdp) {
    const Vector z = gdp / gdp.maxCoeff();
    return {z, z};
  }
};

struct ValidationReport {
  std::vector<std::string> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }

  [[nodiscard]] std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

/// Per-iterate record of an optimizer run.
struct SolveTrace {
  std::vector<double> objective;
  std::vector<double> step;
  std::vector<double> grad_norm;
  int iterations = 0;
  std::string termination;
};

}  // namespace epinet
