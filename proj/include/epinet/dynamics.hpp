#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "epinet/mobility.hpp"

namespace epinet {

struct InitialConditionSpec {
  double reporting_rate = 0.14;
  double recovered_ratio = 8878.0 / 215215.0;
  double symptomatic_fraction = 0.14;

  void validate() const {
    for (double v : {reporting_rate, recovered_ratio, symptomatic_fraction}) {
      if (!(v > 0.0 && v <= 1.0)) throw PreconditionError("initial-condition fractions must lie in (0, 1]");
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<CompartmentState> states;
};

/// Cases are scaled up by the reporting rate; deaths are taken as reported.
inline CompartmentState initial_state(const CaseTable& cases, const Vector& populations,
                                      const InitialConditionSpec& spec = {}) {
  spec.validate();
  const Eigen::Index n = populations.size();
  detail::require_size(cases.cum_cases.size(), n, "cum_cases");
  detail::require_size(cases.deaths.size(), n, "deaths");
  CompartmentState st = CompartmentState::disease_free(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double N = populations(i);
    const double chat = cases.cum_cases(i) / spec.reporting_rate / N;
    if (chat > 1.0 + 1e-12) {
      throw PreconditionError("node " + std::to_string(i) +
                              ": adjusted cumulative cases exceed the population");
    }
    const double h = spec.recovered_ratio * chat + cases.deaths(i) / N;
    const double active = chat - h;
    if (active < 0.0) {
      throw DataError("node " + std::to_string(i) +
                      ": deaths and recoveries exceed adjusted cumulative cases");
    }
    st.s(i) = std::max(0.0, 1.0 - chat);
    st.h(i) = h;
    st.x_s(i) = spec.symptomatic_fraction * active;
    st.x_a(i) = active - st.x_s(i);
  }
  return st;
}

namespace detail {

struct SiqrRhs {
  const Matrix& A;
  const EpidemicParams& p;
  Vector qa, qs;
  Eigen::Index n;

  // y = (s, x_a, x_s, k, h) stacked
  void operator()(const Vector& y, Vector& dy) const {
    const auto s = y.segment(0, n);
    const auto xa = y.segment(n, n);
    const auto xs = y.segment(2 * n, n);
    const auto k = y.segment(3 * n, n);
    const Vector force = A * (p.beta_a * xa + p.beta_s * xs);
    const Vector inf = s.cwiseProduct(force);
    dy.segment(0, n) = -inf;
    dy.segment(n, n) = inf - ((p.epsilon + p.r_a) * xa.array() + qa.array() * xa.array()).matrix();
    dy.segment(2 * n, n) = p.epsilon * xa - (p.r_s * xs.array() + qs.array() * xs.array()).matrix();
    dy.segment(3 * n, n) = (qa.array() * xa.array() + qs.array() * xs.array()).matrix() - p.r_q * k;
    dy.segment(4 * n, n) = p.r_a * xa + p.r_s * xs + p.r_q * k;
  }
};

inline Vector pack(const CompartmentState& st) {
  const Eigen::Index n = st.size();
  Vector y(5 * n);
  y << st.s, st.x_a, st.x_s, st.k, st.h;
  return y;
}

inline CompartmentState unpack(const Vector& y, Eigen::Index n, double t) {
  CompartmentState st;
  st.s = y.segment(0, n);
  st.x_a = y.segment(n, n);
  st.x_s = y.segment(2 * n, n);
  st.k = y.segment(3 * n, n);
  st.h = y.segment(4 * n, n);
  st.t = t;
  return st;
}

inline void check_state(const CompartmentState& st) {
  const Eigen::Index n = st.size();
  for (const Vector* c : {&st.x_a, &st.x_s, &st.k, &st.h}) detail::require_size(c->size(), n, "state");
  const Vector y = pack(st);
  if (!y.allFinite() || (y.array() < 0.0).any() || (y.array() > 1.0).any()) {
    throw PreconditionError("initial state components must lie in [0, 1]");
  }
  if ((st.node_sums().array() - 1.0).abs().maxCoeff() > 1e-9) {
    throw PreconditionError("initial state compartments must sum to 1 per node");
  }
}

// Fixed-step RK4 on a grid t_k = k dt, recording every `stride` steps.
inline Trajectory integrate(const CompartmentState& state0, const Matrix& A,
                            const EpidemicParams& p, const PolicyVector& q, double horizon,
                            double dt, double record_interval) {
  check_state(state0);
  const Eigen::Index n = state0.size();
  if (A.rows() != n || A.cols() != n) throw DimensionError("flow matrix does not match the state");
  detail::require_size(q.q_a.size(), n, "q_a");
  detail::require_size(q.q_s.size(), n, "q_s");
  if ((q.q_a.array() < 0.0).any() || (q.q_a.array() > 1.0).any() ||
      (q.q_s.array() < 0.0).any() || (q.q_s.array() > 1.0).any()) {
    throw PreconditionError("quarantine rates must lie in [0, 1]");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("dt must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw PreconditionError("horizon must be nonnegative");
  if (!(record_interval > 0.0)) throw PreconditionError("record interval must be positive");

  const long stride = std::max(1L, std::lround(record_interval / dt));
  long steps = static_cast<long>(std::ceil(horizon / dt - 1e-9));
  steps = ((steps + stride - 1) / stride) * stride;

  const SiqrRhs f{A, p, q.q_a, q.q_s, n};
  Vector y = pack(state0);
  Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());

  Trajectory traj;
  traj.times.reserve(static_cast<size_t>(steps / stride + 1));
  traj.states.reserve(static_cast<size_t>(steps / stride + 1));
  traj.times.push_back(0.0);
  traj.states.push_back(unpack(y, n, 0.0));

  for (long step = 1; step <= steps; ++step) {
    f(y, k1);
    tmp = y + 0.5 * dt * k1;
    f(tmp, k2);
    tmp = y + 0.5 * dt * k2;
    f(tmp, k3);
    tmp = y + dt * k3;
    f(tmp, k4);
    y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const double t = static_cast<double>(step) * dt;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double& c = y(i);
      if (c < 0.0 && c >= -1e-12) c = 0.0;
      if (!(c >= -1e-9 && c <= 1.0 + 1e-9)) {
        throw SimulationError("state left the unit box at t = " + std::to_string(t) +
                              " (component " + std::to_string(i) + " = " + std::to_string(c) +
                              "); try a smaller dt");
      }
    }
    if (step % stride == 0) {
      traj.times.push_back(t);
      traj.states.push_back(unpack(y, n, t));
    }
  }
  return traj;
}

}  // namespace detail

/// Base model: the SIQR system with every quarantine rate at zero, so k stays 0.
inline Trajectory simulate_base(const CompartmentState& state0, const NetworkSpec& net,
                                const EpidemicParams& p, double horizon, double dt = 0.05,
                                double record_interval = 1.0) {
  return detail::integrate(state0, net.flow, p, PolicyVector::zeros(state0.size()), horizon, dt,
                           record_interval);
}

inline Trajectory simulate_siqr(const CompartmentState& state0, const NetworkSpec& net,
                                const EpidemicParams& p, const PolicyVector& q, double horizon,
                                double dt = 0.05, double record_interval = 1.0) {
  return detail::integrate(state0, net.flow, p, q, horizon, dt, record_interval);
}

struct Aggregates {
  std::vector<double> times, active, cumulative, quarantined, recovered;
};

/// Population-weighted totals over nodes at each recorded time.
inline Aggregates summarize(const Trajectory& traj, const Vector& populations) {
  Aggregates a;
  for (size_t k = 0; k < traj.states.size(); ++k) {
    const auto& st = traj.states[k];
    detail::require_size(st.size(), populations.size(), "state");
    const double act = populations.dot(st.x_a + st.x_s);
    const double quar = populations.dot(st.k);
    const double rec = populations.dot(st.h);
    a.times.push_back(traj.times[k]);
    a.active.push_back(act);
    a.quarantined.push_back(quar);
    a.recovered.push_back(rec);
    a.cumulative.push_back(act + quar + rec);
  }
  return a;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace detail

/// Columns `t,node,s,x_a,x_s,k,h`. Node labels default to indices.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                                 const std::vector<std::string>& nodes = {}) {
  auto out = detail::open_out(path);
  out << "t,node,s,x_a,x_s,k,h\n";
  for (const auto& st : traj.states) {
    for (Eigen::Index i = 0; i < st.size(); ++i) {
      const auto label = nodes.empty() ? std::to_string(i) : nodes[static_cast<size_t>(i)];
      out << detail::fmt(st.t) << ',' << label << ',' << detail::fmt(st.s(i)) << ','
          << detail::fmt(st.x_a(i)) << ',' << detail::fmt(st.x_s(i)) << ','
          << detail::fmt(st.k(i)) << ',' << detail::fmt(st.h(i)) << '\n';
    }
  }
}

inline void write_aggregate_csv(const std::filesystem::path& path, const Aggregates& a) {
  auto out = detail::open_out(path);
  out << "t,active,cumulative,quarantined,recovered\n";
  for (size_t k = 0; k < a.times.size(); ++k) {
    out << detail::fmt(a.times[k]) << ',' << detail::fmt(a.active[k]) << ','
        << detail::fmt(a.cumulative[k]) << ',' << detail::fmt(a.quarantined[k]) << ','
        << detail::fmt(a.recovered[k]) << '\n';
  }
}

}  // namespace epinet
