// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <unistd.h>

#include "oracles.hpp"

using namespace epinet;
using namespace epinet::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Outcome with_budget(Outcome o, double secs, double limit) {
  o.detail += "; " + fmt("%.2f s", secs) + " (limit " + fmt("%.0f s", limit) + ")";
  o.pass = o.pass && secs < limit;
  return o;
}

constexpr double kAlpha = 0.0231;

// 1. eigenvalue gradients against central differences
Outcome gradients() {
  constexpr int kInstances = 50;
  constexpr double kH = 1e-6, kTol = 1e-5, kLimit = 10.0;
  Timer t;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst_travel = 0.0, worst_quar = 0.0;
  for (int k = 0; k < kInstances; ++k) {
    const Eigen::Index n = 2 + k % 4;
    const auto in = random_instance(rng, n);
    const Vector tau = vec(in.tau);
    const Vector gt = grad_lambda_travel(in.net, in.s0, in.p, tau);
    const Vector ft = central_difference([&](const Vector& x) { return eig_travel(in, x); }, tau, kH);
    worst_travel = std::max(worst_travel, rel_error(gt, ft));

    Vector q(2 * n);
    for (auto& x : q) x = 0.8 * U(rng);
    const Vector gq = grad_lambda_quarantine(assemble_quarantine_matrix(in.s0, in.net.flow, in.p, q));
    const Vector fq = central_difference([&](const Vector& x) { return eig_quarantine(in, x); }, q, kH);
    worst_quar = std::max(worst_quar, rel_error(gq, fq));
  }
  Outcome o;
  o.pass = worst_travel <= kTol && worst_quar <= kTol;
  o.detail = "max rel err travel " + fmt("%.2e", worst_travel) + ", quarantine " + fmt("%.2e", worst_quar) +
             " (tol " + fmt("%.0e", kTol) + ", " + std::to_string(kInstances) + " instances, n <= 5)";
  return with_budget(o, t.seconds(), kLimit);
}

// 2. l1-ball projection against the exhaustive active-set oracle
Outcome projection() {
  constexpr int kInstances = 200;
  constexpr double kTol = 1e-8, kLimit = 5.0;
  Timer t;
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < kInstances; ++k) {
    Vector t0(6), y(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      t0(i) = U(rng);
      y(i) = -1.0 + 3.0 * U(rng);
    }
    const double b = 2.0 * U(rng);
    worst = std::max(worst, (project_travel(y, t0, b) - qp_projection_oracle(y, t0, b)).norm());
  }
  Outcome o;
  o.pass = worst <= kTol;
  o.detail = "max distance " + fmt("%.2e", worst) + " (tol " + fmt("%.0e", kTol) + ", " +
             std::to_string(kInstances) + " instances)";
  return with_budget(o, t.seconds(), kLimit);
}

// 3. conservation and box containment under SIQR on the fixture
Outcome conservation() {
  constexpr double kTol = 1e-9, kLimit = 5.0, kHorizon = 360.0, kDt = 0.05;
  const auto& ps = ma14();
  const auto q = optimal_quarantine(ps.state0.s, ps.net.flow, ps.params, kAlpha, ps.data.costs).q;
  double drift = 0.0, lo = 0.0, hi = 0.0;
  size_t records = 0;
  double secs = 0.0;
  for (const auto& policy : {PolicyVector::zeros(ps.net.size()), q}) {
    Timer t;
    const auto traj = simulate_siqr(ps.state0, ps.net, ps.params, policy, kHorizon, kDt, kDt);
    secs = std::max(secs, t.seconds());
    for (const auto& st : traj.states) {
      drift = std::max(drift, (st.node_sums().array() - 1.0).abs().maxCoeff());
      for (const Vector* c : {&st.s, &st.x_a, &st.x_s, &st.k, &st.h}) {
        lo = std::min(lo, c->minCoeff());
        hi = std::max(hi, c->maxCoeff());
      }
    }
    records += traj.states.size();
  }
  Outcome o;
  o.pass = drift <= kTol && lo >= -kTol && hi <= 1.0 + kTol;
  o.detail = "max |sum - 1| " + fmt("%.2e", drift) + ", range [" + fmt("%.2e", lo) + ", " + fmt("%.12f", hi) +
             "] over " + std::to_string(records) + " states (q = 0 and q*)";
  return with_budget(o, secs, kLimit);
}

// 4. balancing fixed point
Outcome balancing() {
  constexpr double kTol = 1e-9, kRatioTol = 1e-10;
  const auto& ps = ma14();
  const Matrix K = neg_inverse(build_B0(ps.state0.s, ps.net.flow, ps.params, kAlpha));
  const Matrix W = ps.data.costs.stacked().asDiagonal() * K;
  const auto r = balance(W, kTol);
  const Matrix Wb = r.d_star.cwiseInverse().asDiagonal() * W * r.d_star.asDiagonal();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < Wb.rows(); ++i) {
    const double row = Wb.row(i).sum(), col = Wb.col(i).sum();
    worst = std::max(worst, std::abs(row - col) / (row + col - 2.0 * Wb(i, i)));
  }
  Matrix T(2, 2);
  T << 0, 2, 8, 0;
  const auto r2 = balance(T, kTol);
  const double ratio = r2.d_star(1) / r2.d_star(0);
  Outcome o;
  o.pass = worst <= kTol && std::abs(ratio - 2.0) <= kRatioTol;
  o.detail = "fixture imbalance " + fmt("%.2e", worst) + " after " + std::to_string(r.iterations) +
             " sweeps (tol " + fmt("%.0e", kTol) + "); 2x2 d2/d1 - 2 = " + fmt("%.1e", ratio - 2.0);
  return o;
}

// 5. optimal quarantine on the fixture
Outcome optimal_validity() {
  constexpr double kLambdaTol = 1e-6, kHalvingTarget = 30.0, kHalvingTol = 3.0, kLimit = 10.0;
  Timer t;
  const auto& ps = ma14();
  const auto sol = optimal_quarantine(ps.state0.s, ps.net.flow, ps.params, kAlpha, ps.data.costs);
  const Vector q = sol.q.stacked();
  const double lam = dense_abscissa(assemble_quarantine_matrix(ps.state0.s, ps.net.flow, ps.params, q));
  const auto traj = simulate_siqr(ps.state0, ps.net, ps.params, sol.q, 360.0, 0.05, 1.0);
  const auto agg = summarize(traj, ps.net.populations);
  const auto h = report_halving_time(agg.times, agg.active);
  Outcome o;
  o.pass = q.minCoeff() >= 0.0 && q.maxCoeff() <= 1.0 && std::abs(lam + kAlpha) <= kLambdaTol && h.days &&
           std::abs(*h.days - kHalvingTarget) <= kHalvingTol;
  o.detail = "q* in [" + fmt("%.4f", q.minCoeff()) + ", " + fmt("%.4f", q.maxCoeff()) + "], lambda_max + alpha = " +
             fmt("%.2e", lam + kAlpha) + ", halving " + (h.days ? fmt("%.2f d", *h.days) : h.diagnostic) +
             " (target 30 +- 3)";
  return with_budget(o, t.seconds(), kLimit);
}

const std::vector<P2Instance>& p2_instances() {
  static const std::vector<P2Instance> set = [] {
    std::mt19937_64 rng(1006);
    std::vector<P2Instance> v;
    for (int k = 0; k < 10; ++k) v.push_back(random_p2_instance(rng));
    return v;
  }();
  return set;
}

// 6. balancing optimum against the grid-refinement oracle
Outcome p2_oracle() {
  constexpr double kGap = 1e-3;
  double worst = 0.0, secs = 0.0;
  for (const auto& P : p2_instances()) {
    Timer t;
    const double oracle = p2_grid_oracle(P);
    secs += t.seconds();
    worst = std::max(worst, std::abs(P.sol.cost - oracle) / oracle);
  }
  Outcome o;
  o.pass = worst <= kGap;
  o.detail = "max relative cost gap " + fmt("%.2e", worst) + " (tol " + fmt("%.0e", kGap) +
             ", 10 instances, grid to 1e-4); oracle " + fmt("%.1f s", secs);
  return o;
}

// 7. primal-dual dynamics against balancing
Outcome cross_method() {
  constexpr double kTol = 1e-3, kLimit = 60.0;
  Timer t;
  double worst = 0.0, worst_slope = -std::numeric_limits<double>::infinity();
  int converged = 0;
  for (const auto& P : p2_instances()) {
    const auto r = solve_pdgd(Vector::Constant(4, 0.5), Vector::Zero(9), P.in.s0, P.in.net.flow, P.in.p,
                              P.alpha, P.costs.stacked());
    converged += r.converged;
    worst = std::max(worst, (r.q.stacked() - P.sol.q.stacked()).cwiseAbs().maxCoeff());
    double tm = 0, ym = 0, sxy = 0, sxx = 0;
    int cnt = 0;
    const auto& d = r.distance_to_limit;
    for (size_t i = d.size() / 2; i < d.size(); ++i) {
      if (d[i] <= 0.0) continue;
      tm += r.log_times[i];
      ym += std::log(d[i]);
      ++cnt;
    }
    tm /= cnt;
    ym /= cnt;
    for (size_t i = d.size() / 2; i < d.size(); ++i) {
      if (d[i] <= 0.0) continue;
      sxy += (r.log_times[i] - tm) * (std::log(d[i]) - ym);
      sxx += (r.log_times[i] - tm) * (r.log_times[i] - tm);
    }
    worst_slope = std::max(worst_slope, cnt >= 2 ? sxy / sxx : std::numeric_limits<double>::infinity());
  }
  Outcome o;
  o.pass = converged == 10 && worst <= kTol && worst_slope < 0.0;
  o.detail = std::to_string(converged) + "/10 converged, max |q_pdgd - q*| " + fmt("%.2e", worst) + " (tol " +
             fmt("%.0e", kTol) + "), largest log-distance slope " + fmt("%.3g", worst_slope);
  return with_budget(o, t.seconds(), kLimit);
}

// 8. reproduction number threshold against the eigenvalue sign
Outcome r0_equivalence() {
  constexpr int kInstances = 100;
  constexpr double kTie = 1e-8;
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int checked = 0, agree = 0, unstable = 0;
  for (int k = 0; k < kInstances; ++k) {
    const Eigen::Index n = 1 + k % 5;
    const auto in = random_instance(rng, n, 0.3 + 2.0 * U(rng));
    Vector q(2 * n);
    for (auto& x : q) x = 0.5 * U(rng);
    const auto policy = PolicyVector::from_stacked(q);
    const double lam = spectral_abscissa(assemble_quarantine_matrix(in.s0, in.net.flow, in.p, policy));
    if (std::abs(lam) < kTie) continue;
    const double r0 = reproduction_number(in.s0, in.net.flow, in.p, policy);
    ++checked;
    unstable += lam > 0.0;
    agree += (r0 > 1.0) == (lam > 0.0);
  }
  Outcome o;
  o.pass = checked > 0 && agree == checked;
  o.detail = std::to_string(agree) + "/" + std::to_string(checked) + " sign agreements (" + std::to_string(unstable) +
             " with lambda_max > 0)";
  return o;
}

// 9. travel budget sweep on the calibrated fixture
Outcome sweep() {
  constexpr double kLimit = 120.0;
  Timer t;
  const auto& ps = ma14();
  const auto pts = budget_sweep(ps.net, ps.state0.s, ps.params, {0, 5, 10, 20, 25});
  bool monotone = true;
  std::string values;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && pts[i].f_star > pts[i - 1].f_star) monotone = false;
    values += (i ? ", " : "") + fmt("%.6f", pts[i].f_star);
  }
  Outcome o;
  o.pass = monotone && pts.back().f_star < 0.0;
  o.detail = "f* = [" + values + "] " + (monotone ? "nonincreasing" : "NOT nonincreasing");
  return with_budget(o, t.seconds(), kLimit);
}

// 10. optimal policy dominates cost-matched uniform and random policies
Outcome dominance() {
  auto cfg = load_scenario(fixture("scenario.json"));
  cfg.travel_budgets.clear();
  cfg.output_dir = std::filesystem::temp_directory_path() / ("epinet_acceptance_" + std::to_string(getpid()));
  const auto res = run_scenario(cfg);
  std::filesystem::remove_all(cfg.output_dir);
  const PolicyOutcome* opt = nullptr;
  for (const auto& p : res.policies) {
    if (p.spec.kind == PolicyKind::Optimal) opt = &p;
  }
  Outcome o;
  if (!opt) {
    o.detail = "fixture has no optimal policy";
    return o;
  }
  o.pass = true;
  int compared = 0;
  for (const auto& p : res.policies) {
    if (p.spec.kind != PolicyKind::Uniform && p.spec.kind != PolicyKind::Random) continue;
    ++compared;
    int bad_active = 0, bad_cum = 0;
    double first = -1.0, last = -1.0;
    for (size_t k = 0; k < p.aggregates.times.size(); ++k) {
      const bool a = opt->aggregates.active[k] > p.aggregates.active[k];
      const bool c = opt->aggregates.cumulative[k] > p.aggregates.cumulative[k];
      bad_active += a;
      bad_cum += c;
      if (a || c) {
        if (first < 0.0) first = p.aggregates.times[k];
        last = p.aggregates.times[k];
      }
    }
    o.pass = o.pass && bad_active + bad_cum == 0;
    o.detail += (o.detail.empty() ? "" : "; ") + p.name + ": " + std::to_string(bad_active) + " active and " +
                std::to_string(bad_cum) + " cumulative violations";
    if (first >= 0.0) o.detail += " on days " + fmt("%.0f", first) + "-" + fmt("%.0f", last);
    o.detail += ", final cumulative " + fmt("%.0f", opt->aggregates.cumulative.back()) + " vs " +
                fmt("%.0f", p.aggregates.cumulative.back());
  }
  o.pass = o.pass && compared >= 2;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"projection oracle equivalence", projection},
      {"conservation and positivity", conservation},
      {"balancing fixed point", balancing},
      {"optimal quarantine validity", optimal_validity},
      {"two-node oracle equivalence", p2_oracle},
      {"cross-method agreement", cross_method},
      {"reproduction number equivalence", r0_equivalence},
      {"travel budget behavior", sweep},
      {"policy dominance at equal cost", dominance},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.detail = std::string("threw: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
