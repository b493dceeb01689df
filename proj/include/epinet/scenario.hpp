#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "epinet/dynamics.hpp"
#include "epinet/policy.hpp"
#include "epinet/travel_opt.hpp"

namespace epinet {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct CalibrationSpec {
  double eta = kAsymptomaticInfectivity;
  double target_growth = 0.0;
};

struct ScenarioConfig {
  std::filesystem::path source;  ///< scenario file, for resolving relative data paths
  DataPaths data;
  std::optional<Vector> t_out_nodes;
  double t_out = 1.0 / 3.0;
  EpidemicParams params = reference_params(0.0);
  bool beta_given = false;
  std::optional<CalibrationSpec> calibration;
  InitialConditionSpec initial;
  double alpha = std::log(2.0) / 30.0;
  std::vector<double> travel_budgets;
  std::vector<PolicySpec> policies;
  double horizon = 360.0;
  double dt = 0.05;
  double record_interval = 1.0;
  std::filesystem::path output_dir = "out";
};

namespace detail {

template <class T>
T field(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown field '" + k + "' in " + where);
  }
}

inline PolicySpec parse_policy(const json& j, std::uint64_t default_seed) {
  PolicySpec spec;
  spec.seed = default_seed;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    // "random(7)" shorthand
    if (s.rfind("random(", 0) == 0 && s.back() == ')') {
      try {
        spec.seed = std::stoull(s.substr(7, s.size() - 8));
      } catch (const std::exception&) {
        throw ConfigError("malformed random policy '" + s + "'");
      }
      s = "random";
    }
    spec.kind = parse_policy_kind(s);
    return spec;
  }
  if (!j.is_object()) throw ConfigError("policy entries must be strings or objects");
  check_keys(j, {"kind", "seed", "bound"}, "policy");
  if (!j.contains("kind")) throw ConfigError("policy object needs a 'kind'");
  spec.kind = parse_policy_kind(field<std::string>(j, "kind", ""));
  spec.seed = field<std::uint64_t>(j, "seed", default_seed);
  if (j.contains("bound")) spec.bound = field<double>(j, "bound", 0.0);
  return spec;
}

}  // namespace detail

/// Parses scenario JSON. Data paths are resolved against `base_dir`.
inline ScenarioConfig parse_scenario(const json& j, const std::filesystem::path& base_dir,
                                     std::uint64_t default_seed = 0) {
  using detail::field;
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  detail::check_keys(j, {"schema_version", "data", "t_out", "params", "calibration",
                         "initial_conditions", "alpha", "travel_budgets", "policies", "horizon",
                         "dt", "record_interval", "output_dir"},
                     "scenario");
  ScenarioConfig c;
  const int version = field<int>(j, "schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version));
  }

  if (!j.contains("data") || !j.at("data").is_object()) throw ConfigError("missing 'data' section");
  const json& d = j.at("data");
  detail::check_keys(d, {"flows", "population", "gdp", "cases"}, "data");
  auto path = [&](const char* key) {
    if (!d.contains(key)) throw ConfigError(std::string("missing data path '") + key + "'");
    std::filesystem::path p = field<std::string>(d, key, "");
    return p.is_absolute() ? p : base_dir / p;
  };
  c.data = {path("flows"), path("population"), path("gdp"), path("cases")};

  if (j.contains("t_out")) {
    if (j.at("t_out").is_array()) {
      const auto v = field<std::vector<double>>(j, "t_out", {});
      c.t_out_nodes = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      c.t_out = field<double>(j, "t_out", c.t_out);
    }
  }

  if (j.contains("params")) {
    const json& p = j.at("params");
    detail::check_keys(p, {"beta_a", "beta_s", "epsilon", "r_a", "r_s", "r_q"}, "params");
    c.params.epsilon = field(p, "epsilon", c.params.epsilon);
    c.params.r_a = field(p, "r_a", c.params.r_a);
    c.params.r_s = field(p, "r_s", c.params.r_s);
    c.params.r_q = field(p, "r_q", c.params.r_q);
    if (p.contains("beta_s")) {
      c.beta_given = true;
      c.params.beta_s = field(p, "beta_s", 0.0);
      c.params.beta_a = field(p, "beta_a", kAsymptomaticInfectivity * c.params.beta_s);
    } else if (p.contains("beta_a")) {
      throw ConfigError("params.beta_a needs params.beta_s");
    }
  }
  if (j.contains("calibration")) {
    const json& cal = j.at("calibration");
    detail::check_keys(cal, {"eta", "target_growth"}, "calibration");
    if (!cal.contains("target_growth")) throw ConfigError("calibration needs 'target_growth'");
    c.calibration = CalibrationSpec{field(cal, "eta", kAsymptomaticInfectivity),
                                    field(cal, "target_growth", 0.0)};
  }
  if (j.contains("initial_conditions")) {
    const json& ic = j.at("initial_conditions");
    detail::check_keys(ic, {"reporting_rate", "recovered_ratio", "symptomatic_fraction"},
                       "initial_conditions");
    c.initial.reporting_rate = field(ic, "reporting_rate", c.initial.reporting_rate);
    c.initial.recovered_ratio = field(ic, "recovered_ratio", c.initial.recovered_ratio);
    c.initial.symptomatic_fraction = field(ic, "symptomatic_fraction", c.initial.symptomatic_fraction);
  }
  c.alpha = field(j, "alpha", c.alpha);
  c.travel_budgets = field<std::vector<double>>(j, "travel_budgets", {});
  if (j.contains("policies")) {
    if (!j.at("policies").is_array()) throw ConfigError("'policies' must be a list");
    for (const auto& p : j.at("policies")) c.policies.push_back(detail::parse_policy(p, default_seed));
  }
  for (size_t i = 0; i < c.policies.size(); ++i) c.policies[i].stream = i;
  c.horizon = field(j, "horizon", c.horizon);
  c.dt = field(j, "dt", c.dt);
  c.record_interval = field(j, "record_interval", c.record_interval);
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir.string());
  return c;
}

/// Checks every invariant that does not need the data loaded.
inline void validate_scenario(const ScenarioConfig& c) {
  if (c.policies.empty()) throw ConfigError("policy list is empty");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw ConfigError("horizon must be positive");
  if (!(c.dt > 0.0) || c.dt > c.horizon) throw ConfigError("dt must lie in (0, horizon]");
  if (!(c.record_interval >= c.dt)) throw ConfigError("record_interval must be at least dt");
  if (!(c.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  if (!(c.t_out > 0.0 && c.t_out <= 1.0)) throw ConfigError("t_out must lie in (0, 1]");
  if (c.t_out_nodes && ((c.t_out_nodes->array() <= 0.0).any() || (c.t_out_nodes->array() > 1.0).any())) {
    throw ConfigError("t_out entries must lie in (0, 1]");
  }
  for (double b : c.travel_budgets) {
    if (!(b >= 0.0)) throw ConfigError("travel budgets must be nonnegative");
  }
  if (!c.calibration && !c.beta_given) {
    throw ConfigError("either params.beta_s or a calibration section is required");
  }
  for (double v : {c.params.epsilon, c.params.r_a, c.params.r_s, c.params.r_q, c.params.beta_a,
                   c.params.beta_s}) {
    if (!(v >= 0.0)) throw ConfigError("epidemic rates must be nonnegative");
  }
  try {
    c.initial.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  for (const auto* p : {&c.data.flows, &c.data.population, &c.data.gdp, &c.data.cases}) {
    if (!std::filesystem::exists(*p)) throw ConfigError("data file not found: " + p->string());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& file, std::uint64_t default_seed = 0) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open scenario " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  auto c = parse_scenario(j, file.parent_path(), default_seed);
  c.source = file;
  validate_scenario(c);
  return c;
}

/// Runs `fn` and re-raises any library error with the stage name prefixed,
/// keeping its type so callers can map it to an exit status.
template <class Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return fn();
  } catch (const SimulationError& e) {
    throw SimulationError(tag + e.what());
  } catch (const SolverError& e) {
    throw SolverError(tag + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(tag + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(tag + e.what());
  } catch (const Error& e) {
    throw Error(tag + e.what());
  }
}

/// Shared front half of every pipeline: data, network, initial state, rates.
struct PreparedScenario {
  MobilityData data;
  NetworkSpec net;
  CompartmentState state0;
  EpidemicParams params;
  std::optional<Calibration> calibration;
};

inline PreparedScenario prepare_scenario(const ScenarioConfig& c) {
  PreparedScenario ps;
  ps.data = staged("load", [&] { return load_tables(c.data); });
  const Eigen::Index n = ps.data.size();
  ps.net = staged("network", [&] {
    Vector t_out = Vector::Constant(n, c.t_out);
    if (c.t_out_nodes) {
      if (c.t_out_nodes->size() != n) throw ConfigError("t_out list length differs from the node count");
      t_out = *c.t_out_nodes;
    }
    return make_network(ps.data.populations, build_travel_rates(ps.data.flows, ps.data.nodes, t_out));
  });
  ps.state0 = staged("initial", [&] { return initial_state(ps.data.cases, ps.data.populations, c.initial); });
  ps.params = c.params;
  ps.params.alpha = c.alpha;
  if (c.calibration) {
    ps.calibration = staged("calibrate", [&] {
      return calibrate_beta(ps.net.flow, ps.state0.s, c.calibration->eta,
                            c.calibration->target_growth, ps.params);
    });
    ps.params.beta_a = ps.calibration->beta_a;
    ps.params.beta_s = ps.calibration->beta_s;
  }
  staged("validate", [&] {
    const auto report = validate_params(ps.params, ps.net);
    if (!report.ok()) throw PreconditionError("invalid parameters: " + report.summary());
  });
  return ps;
}

struct RunOptions {
  unsigned threads = 1;
  bool verbose = false;
  std::function<void(const std::string&)> log;
};

struct PolicyOutcome {
  std::string name;
  PolicySpec spec;
  PolicyVector q;
  double cost = 0.0;
  double lambda_max = 0.0;
  double r0 = 0.0;
  HalvingTime halving;
  Aggregates aggregates;
};

struct ScenarioResult {
  PreparedScenario prepared;
  FeasibilityReport feasibility;
  std::vector<SweepPoint> sweep;
  std::vector<PolicyOutcome> policies;
  Aggregates baseline;
  double reference_cost = 0.0;
  json summary;
};

namespace detail {

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const FeasibilityReport& r) {
  return {{"alpha", r.alpha},
          {"alpha_bound_rate", r.alpha_bound_rate},
          {"alpha_bound_spectral", r.alpha_bound_spectral},
          {"box_condition", {{"holds", r.box_condition_holds}, {"m", r.m}, {"x", r.x}}},
          {"strongly_connected", r.strongly_connected},
          {"irreducible", r.irreducible},
          {"s_positive", r.s_positive},
          {"feasible", r.feasible},
          {"reasons", r.reasons}};
}

inline json to_json(const SolveTrace& t) {
  return {{"objective", t.objective},
          {"step", t.step},
          {"grad_norm", t.grad_norm},
          {"iterations", t.iterations},
          {"termination", t.termination}};
}

inline json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Runs jobs on up to `threads` workers; results keep their index.
template <class R>
std::vector<R> parallel_map(size_t count, unsigned threads, const std::function<R(size_t)>& job) {
  std::vector<R> out(count);
  if (threads <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) out[i] = job(i);
    return out;
  }
  std::vector<std::future<void>> workers;
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  for (unsigned w = 0; w < std::min<size_t>(threads, count); ++w) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (size_t i = next++; i < count; i = next++) {
        try {
          out[i] = job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }));
  }
  for (auto& w : workers) w.get();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace detail

/// Full pipeline. Writes trajectory and aggregate CSVs per policy plus
/// summary.json into config.output_dir.
inline ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& opts = {}) {
  auto log = [&](const std::string& msg) {
    if (opts.verbose && opts.log) opts.log(msg);
  };
  validate_scenario(config);
  ScenarioResult res;
  res.prepared = prepare_scenario(config);
  const auto& ps = res.prepared;
  const auto& net = ps.net;
  const Vector& s0 = ps.state0.s;
  const Eigen::Index n = net.size();
  log("loaded " + std::to_string(n) + " nodes; beta_s = " + std::to_string(ps.params.beta_s));

  res.feasibility = staged("feasibility", [&] { return feasibility_check(s0, net.flow, ps.params, config.alpha); });

  if (!config.travel_budgets.empty()) {
    auto budgets = config.travel_budgets;
    std::sort(budgets.begin(), budgets.end());
    res.sweep = staged("travel-opt", [&] { return budget_sweep(net, s0, ps.params, budgets); });
    for (const auto& pt : res.sweep) {
      log("budget " + std::to_string(pt.budget) + ": f* = " + std::to_string(pt.f_star));
    }
  }

  PolicyContext ctx{s0, net.flow, ps.params, config.alpha, ps.data.costs, std::nullopt, 1e-6};
  staged("quarantine-opt", [&] { ctx.optimal = optimal_quarantine(s0, net.flow, ps.params, config.alpha, ps.data.costs); });
  res.reference_cost = ctx.optimal->cost;
  log("optimal quarantine cost " + std::to_string(res.reference_cost));

  std::set<std::string> used;
  for (const auto& spec : config.policies) {
    PolicyOutcome out;
    out.spec = spec;
    out.name = spec.label();
    for (int k = 2; used.count(out.name); ++k) out.name = spec.label() + "-" + std::to_string(k);
    used.insert(out.name);
    out.q = staged("policies", [&] { return make_policy(spec, res.reference_cost, ctx); });
    out.cost = quarantine_cost(out.q, ps.data.costs);
    staged("policies", [&] {
      out.lambda_max = spectral_abscissa(assemble_quarantine_matrix(s0, net.flow, ps.params, out.q));
      out.r0 = reproduction_number(s0, net.flow, ps.params, out.q);
    });
    res.policies.push_back(std::move(out));
  }

  // Simulations are independent; output files are written afterwards in order.
  const size_t jobs = res.policies.size() + 1;
  auto trajectories = staged("simulate", [&] {
    return detail::parallel_map<Trajectory>(jobs, std::max(1u, opts.threads), [&](size_t i) {
      const PolicyVector q = i == 0 ? PolicyVector::zeros(n) : res.policies[i - 1].q;
      return simulate_siqr(ps.state0, net, ps.params, q, config.horizon, config.dt, config.record_interval);
    });
  });

  staged("export", [&] {
    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    res.baseline = summarize(trajectories[0], net.populations);
    write_trajectory_csv(dir / "baseline_trajectory.csv", trajectories[0], ps.data.nodes);
    write_aggregate_csv(dir / "baseline_aggregate.csv", res.baseline);
    for (size_t i = 0; i < res.policies.size(); ++i) {
      auto& pol = res.policies[i];
      pol.aggregates = summarize(trajectories[i + 1], net.populations);
      pol.halving = report_halving_time(pol.aggregates.times, pol.aggregates.active);
      write_trajectory_csv(dir / (pol.name + "_trajectory.csv"), trajectories[i + 1], ps.data.nodes);
      write_aggregate_csv(dir / (pol.name + "_aggregate.csv"), pol.aggregates);
    }

    json s;
    s["schema_version"] = kSchemaVersion;
    s["nodes"] = ps.data.nodes;
    s["params"] = {{"beta_a", ps.params.beta_a}, {"beta_s", ps.params.beta_s},
                   {"epsilon", ps.params.epsilon}, {"r_a", ps.params.r_a},
                   {"r_s", ps.params.r_s}, {"r_q", ps.params.r_q}, {"alpha", config.alpha}};
    if (ps.calibration) {
      s["calibration"] = {{"eta", config.calibration->eta},
                          {"target_growth", config.calibration->target_growth},
                          {"lambda_max", ps.calibration->lambda},
                          {"iterations", ps.calibration->iterations}};
    }
    s["feasibility"] = detail::to_json(res.feasibility);
    s["travel"] = json::array();
    for (const auto& pt : res.sweep) {
      s["travel"].push_back({{"budget", pt.budget},
                             {"f_star", pt.f_star},
                             {"iterations", pt.solution.trace.iterations},
                             {"termination", pt.solution.trace.termination},
                             {"warnings", pt.solution.warnings}});
    }
    s["reference_cost"] = res.reference_cost;
    s["random_generator"] = kRandomGenerator;
    s["baseline"] = {{"final_active", res.baseline.active.back()},
                     {"final_cumulative", res.baseline.cumulative.back()}};
    s["policies"] = json::array();
    for (const auto& pol : res.policies) {
      json pj = {{"name", pol.name},
                 {"kind", to_string(pol.spec.kind)},
                 {"q_a", detail::to_json(pol.q.q_a)},
                 {"q_s", detail::to_json(pol.q.q_s)},
                 {"cost", pol.cost},
                 {"lambda_max", pol.lambda_max},
                 {"R0", pol.r0},
                 {"halving_time_days", detail::nullable(pol.halving.days)},
                 {"final_active", pol.aggregates.active.back()},
                 {"final_cumulative", pol.aggregates.cumulative.back()},
                 {"peak_active", *std::max_element(pol.aggregates.active.begin(), pol.aggregates.active.end())}};
      if (!pol.halving.diagnostic.empty()) pj["halving_diagnostic"] = pol.halving.diagnostic;
      if (pol.spec.kind == PolicyKind::Random) {
        pj["seed"] = pol.spec.seed;
        pj["stream"] = pol.spec.stream;
      }
      s["policies"].push_back(std::move(pj));
    }
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw Error("cannot write summary.json");
    out << s.dump(2) << '\n';
    res.summary = std::move(s);
  });
  return res;
}

/// 2 for configuration or data problems, 3 for solver failures, 1 otherwise.
inline int exit_status(const std::exception& e) {
  if (dynamic_cast<const SolverError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const DimensionError*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace epinet
