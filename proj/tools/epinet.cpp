#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "epinet/epinet.hpp"

namespace {

using epinet::json;

void write_json(const std::string& path, const json& j) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw epinet::Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

int cmd_run(const std::string& scenario, const std::optional<std::string>& out_dir, unsigned threads,
            bool verbose, std::uint64_t seed) {
  auto cfg = epinet::load_scenario(scenario, seed);
  if (out_dir) cfg.output_dir = *out_dir;
  epinet::RunOptions opts;
  opts.threads = threads;
  opts.verbose = verbose;
  opts.log = [](const std::string& m) { std::cerr << m << '\n'; };
  const auto res = epinet::run_scenario(cfg, opts);
  for (const auto& pol : res.policies) {
    std::cout << pol.name << ": cost " << pol.cost << ", lambda_max " << pol.lambda_max << ", R0 "
              << pol.r0;
    if (pol.halving.days) std::cout << ", halving " << *pol.halving.days << " d";
    std::cout << '\n';
  }
  for (const auto& pt : res.sweep) {
    std::cout << "travel budget " << pt.budget << ": f* " << pt.f_star << '\n';
  }
  std::cout << "wrote " << (cfg.output_dir / "summary.json").string() << '\n';
  return 0;
}

int cmd_validate(const std::string& scenario, std::uint64_t seed) {
  const auto cfg = epinet::load_scenario(scenario, seed);
  const auto ps = epinet::prepare_scenario(cfg);
  std::cout << "ok: " << ps.data.size() << " nodes, " << cfg.policies.size() << " policies\n";
  return 0;
}

int cmd_travel(const std::string& scenario, double budget, const std::string& out,
               std::uint64_t seed) {
  const auto cfg = epinet::load_scenario(scenario, seed);
  const auto ps = epinet::prepare_scenario(cfg);
  epinet::TravelSolveOptions o;
  o.budget = budget;
  const auto sol = epinet::staged("travel-opt", [&] {
    return epinet::optimize_travel(ps.net, ps.state0.s, ps.params, o);
  });
  json j;
  j["schema_version"] = epinet::kSchemaVersion;
  j["nodes"] = ps.data.nodes;
  j["budget"] = budget;
  j["vectorization"] = "column-major: entry (i, j) at index i + j * n";
  j["tau0"] = epinet::detail::to_json(epinet::vec(ps.net.tau));
  j["tau_star"] = epinet::detail::to_json(sol.tau_star);
  j["f0"] = sol.trace.objective.front();
  j["f_star"] = sol.f_star;
  j["iterations"] = sol.trace.iterations;
  j["trace"] = epinet::detail::to_json(sol.trace);
  j["warnings"] = sol.warnings;
  write_json(out, j);
  for (const auto& w : sol.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "f* = " << sol.f_star << " after " << sol.trace.iterations << " iterations\n";
  return 0;
}

int cmd_quarantine(const std::string& scenario, std::optional<double> alpha, const std::string& method,
                   const std::string& out, const epinet::PdgdOptions& pdgd, std::uint64_t seed) {
  const auto cfg = epinet::load_scenario(scenario, seed);
  auto ps = epinet::prepare_scenario(cfg);
  const double a = alpha.value_or(cfg.alpha);
  ps.params.alpha = a;
  const auto& s0 = ps.state0.s;
  const auto& A = ps.net.flow;
  const auto report = epinet::feasibility_check(s0, A, ps.params, a);

  json j;
  j["schema_version"] = epinet::kSchemaVersion;
  j["nodes"] = ps.data.nodes;
  j["alpha"] = a;
  j["method"] = method;
  j["feasibility"] = epinet::detail::to_json(report);
  epinet::PolicyVector q;
  if (method == "balance") {
    const auto sol = epinet::staged("quarantine-opt", [&] {
      return epinet::optimal_quarantine(s0, A, ps.params, a, ps.data.costs);
    });
    q = sol.q;
    j["trace"] = {{"balancing_sweeps", sol.balancing.iterations},
                  {"imbalance", sol.balancing.imbalance}};
  } else {
    if (!report.feasible) throw epinet::PreconditionError("quarantine problem infeasible");
    const Eigen::Index m = 2 * s0.size();
    const auto res = epinet::staged("quarantine-opt", [&] {
      return epinet::solve_pdgd(epinet::Vector::Constant(m, 0.5), epinet::Vector::Zero(2 * m + 1), s0,
                                A, ps.params, a, ps.data.costs.stacked(), pdgd);
    });
    if (!res.converged) throw epinet::SolverError("primal-dual dynamics did not converge");
    q = res.q;
    j["dual"] = epinet::detail::to_json(res.lambda);
    j["trace"] = epinet::detail::to_json(res.trace);
    j["trace"]["log_times"] = res.log_times;
    j["trace"]["distance_to_limit"] = res.distance_to_limit;
  }
  const double lam = epinet::spectral_abscissa(epinet::assemble_quarantine_matrix(s0, A, ps.params, q));
  const double cost = epinet::quarantine_cost(q, ps.data.costs);
  j["q_a"] = epinet::detail::to_json(q.q_a);
  j["q_s"] = epinet::detail::to_json(q.q_s);
  j["lambda_max"] = lam;
  j["cost"] = cost;
  write_json(out, j);
  std::cout << "lambda_max = " << lam << ", cost = " << cost << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked epidemic simulation and intervention design"};
  app.require_subcommand(1);
  bool verbose = false;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  app.add_flag("-v,--verbose", verbose, "Log pipeline progress to stderr");
  app.add_option("--threads", threads, "Worker threads for policy simulations")->check(CLI::Range(1u, 256u));
  app.add_option("--seed", seed, "Default seed for random policies without one");

  std::string scenario;
  std::optional<std::string> out_dir;
  auto* run = app.add_subcommand("run", "Run a full scenario");
  run->add_option("scenario", scenario, "Scenario JSON")->required();
  run->add_option("--output-dir", out_dir, "Override the scenario's output directory");

  auto* validate = app.add_subcommand("validate", "Check a scenario and its data");
  validate->add_option("scenario", scenario, "Scenario JSON")->required();

  double budget = 0.0;
  std::string out;
  auto* travel = app.add_subcommand("travel-opt", "Optimize travel rates for one budget");
  travel->add_option("--scenario", scenario, "Scenario JSON")->required();
  travel->add_option("--budget", budget, "l1 budget on travel-rate change")->required()->check(CLI::NonNegativeNumber);
  travel->add_option("--out", out, "Solution JSON")->required();

  std::optional<double> alpha;
  std::string method = "balance";
  epinet::PdgdOptions pdgd;
  auto* quar = app.add_subcommand("quarantine-opt", "Design quarantine rates");
  quar->add_option("--scenario", scenario, "Scenario JSON")->required();
  quar->add_option("--alpha", alpha, "Decay target (defaults to the scenario's)");
  quar->add_option("--method", method, "balance or pdgd")->check(CLI::IsMember({"balance", "pdgd"}));
  quar->add_option("--out", out, "Solution JSON")->required();
  quar->add_option("--rho", pdgd.rho, "Penalty parameter (pdgd)");
  quar->add_option("--step", pdgd.step, "Euler step (pdgd)");
  quar->add_option("--max-steps", pdgd.max_steps, "Step limit (pdgd)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(scenario, out_dir, threads, verbose, seed);
    if (*validate) return cmd_validate(scenario, seed);
    if (*travel) return cmd_travel(scenario, budget, out, seed);
    if (*quar) return cmd_quarantine(scenario, alpha, method, out, pdgd, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return epinet::exit_status(e);
  }
  return 0;
}
