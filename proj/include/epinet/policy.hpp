#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "epinet/quarantine_opt.hpp"

namespace epinet {

enum class PolicyKind { Optimal, Uniform, Random, BoundedDecline };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Optimal: return "optimal";
    case PolicyKind::Uniform: return "uniform";
    case PolicyKind::Random: return "random";
    case PolicyKind::BoundedDecline: return "bounded-decline";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "optimal") return PolicyKind::Optimal;
  if (s == "uniform") return PolicyKind::Uniform;
  if (s == "random") return PolicyKind::Random;
  if (s == "bounded-decline") return PolicyKind::BoundedDecline;
  throw ConfigError("unknown policy kind '" + s +
                    "' (expected optimal, uniform, random or bounded-decline)");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::Optimal;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  /// Fixed per-node decay bound; when empty the bound is chosen to match cost.
  std::optional<double> bound;

  [[nodiscard]] std::string label() const {
    if (kind == PolicyKind::Random) return "random-" + std::to_string(seed);
    return to_string(kind);
  }
};

/// Everything a policy may depend on. `optimal` caches a balancing solve.
struct PolicyContext {
  Vector s0;
  Matrix flow;
  EpidemicParams params;
  double alpha = 0.0;
  EconomicCosts costs;
  std::optional<QuarantineSolution> optimal;
  double delta = 1e-6;
};

inline constexpr const char* kRandomGenerator = "std::mt19937_64 seeded by std::seed_seq{seed, stream}";

/// Uniform(0, 1) draws with 53 random bits each.
inline Vector uniform_draws(Eigen::Index count, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 gen(seq);
  Vector u(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    u(i) = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }
  return u;
}

namespace detail {

// Bisects a monotone one-parameter family q(c) onto a target cost.
template <class Family>
Vector match_cost(Family&& family, double lo, double hi, double reference, const Vector& z,
                  bool increasing) {
  const double c_lo = quarantine_cost(family(lo), z);
  const double c_hi = quarantine_cost(family(hi), z);
  const double cmin = std::min(c_lo, c_hi), cmax = std::max(c_lo, c_hi);
  if (reference < cmin - 1e-9 * std::max(1.0, cmin)) {
    throw PreconditionError("reference cost " + std::to_string(reference) +
                            " is below the cost without quarantine " + std::to_string(cmin));
  }
  if (reference > cmax + 1e-9 * std::max(1.0, cmax)) {
    throw SolverError("reference cost " + std::to_string(reference) +
                      " is unreachable; the maximum attainable cost is " + std::to_string(cmax));
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double c = quarantine_cost(family(mid), z);
    if (std::abs(c - reference) <= 1e-12 * std::max(1.0, reference)) return family(mid);
    if (mid == lo || mid == hi) break;
    ((c < reference) == increasing ? lo : hi) = mid;
  }
  return family(0.5 * (lo + hi));
}

}  // namespace detail

/// Per-node decay rate of the decoupled 2 x 2 block when q_a = q_s = 0.
inline Vector local_growth_rates(const Vector& s0, const Matrix& flow, const EpidemicParams& p) {
  const Eigen::Index n = s0.size();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double self = s0(i) * flow(i, i);
    const double a = p.beta_a * self - (p.epsilon + p.r_a);
    const double b = p.beta_s * self;
    const double c = p.epsilon;
    const double d = -p.r_s;
    out(i) = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  }
  return out;
}

inline PolicyVector make_policy(const PolicySpec& spec, double reference_cost, PolicyContext& ctx) {
  const Eigen::Index n = ctx.s0.size();
  const Vector z = ctx.costs.stacked();
  const double upper = 1.0 - ctx.delta;

  switch (spec.kind) {
    case PolicyKind::Optimal: {
      if (!ctx.optimal) {
        ctx.optimal = optimal_quarantine(ctx.s0, ctx.flow, ctx.params, ctx.alpha, ctx.costs);
      }
      return ctx.optimal->q;
    }
    case PolicyKind::Uniform: {
      auto family = [&](double c) { return Vector(Vector::Constant(2 * n, c)); };
      return PolicyVector::from_stacked(detail::match_cost(family, 0.0, upper, reference_cost, z, true));
    }
    case PolicyKind::Random: {
      const Vector u = uniform_draws(2 * n, spec.seed, spec.stream);
      if (!(u.maxCoeff() > 0.0)) throw SolverError("random draws are all zero");
      auto family = [&](double c) { return Vector(c * u); };
      return PolicyVector::from_stacked(
          detail::match_cost(family, 0.0, upper / u.maxCoeff(), reference_cost, z, true));
    }
    case PolicyKind::BoundedDecline: {
      // With q_a = q_s the block shifts rigidly, so each node's rate is
      // local_growth - bound clipped to the box.
      const Vector g = local_growth_rates(ctx.s0, ctx.flow, ctx.params);
      auto family = [&](double bound) {
        const Vector qi = (g.array() - bound).max(0.0).min(upper).matrix();
        Vector q(2 * n);
        q << qi, qi;
        return q;
      };
      if (spec.bound) return PolicyVector::from_stacked(family(*spec.bound));
      return PolicyVector::from_stacked(
          detail::match_cost(family, g.minCoeff() - upper, g.maxCoeff(), reference_cost, z, false));
    }
  }
  throw ConfigError("unsupported policy kind");
}

struct HalvingTime {
  std::optional<double> days;
  double slope = 0.0;
  std::string diagnostic;
};

/// ln 2 / |slope| of a least-squares fit of log(active) over the final third
/// of the record.
inline HalvingTime report_halving_time(const std::vector<double>& times,
                                       const std::vector<double>& active) {
  HalvingTime out;
  if (times.size() != active.size() || times.size() < 3) {
    out.diagnostic = "too few samples";
    return out;
  }
  const double t_end = times.back();
  const double t_start = times.front() + 2.0 * (t_end - times.front()) / 3.0;
  double st = 0, sy = 0, stt = 0, sty = 0;
  int count = 0;
  for (size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_start) continue;
    if (!(active[k] > 0.0)) {
      out.diagnostic = "active infections reach zero";
      return out;
    }
    const double y = std::log(active[k]);
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
    ++count;
  }
  if (count < 2) {
    out.diagnostic = "too few samples in the final third";
    return out;
  }
  out.slope = (count * sty - st * sy) / (count * stt - st * st);
  if (!(out.slope < 0.0)) {
    out.diagnostic = "active infections are not decaying (slope " + std::to_string(out.slope) + ")";
    return out;
  }
  out.days = std::log(2.0) / -out.slope;
  return out;
}

}  // namespace epinet
