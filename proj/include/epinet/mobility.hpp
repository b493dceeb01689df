#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "epinet/spectral.hpp"

namespace epinet {

struct FlowRecord {
  std::string origin;
  std::string destination;
  double trips = 0.0;
};

struct FlowTable {
  std::vector<FlowRecord> records;
};

/// Cumulative counts at the reference date, indexed like the roster.
struct CaseTable {
  Vector cum_cases;
  Vector deaths;
  std::vector<std::string> dates;
};

struct DataPaths {
  std::filesystem::path flows, population, gdp, cases;
};

/// Everything read from the four input tables. `nodes` follows the row order
/// of population.csv and fixes the node indexing used everywhere else.
struct MobilityData {
  std::vector<std::string> nodes;
  FlowTable flows;
  Vector populations;
  Vector gdp;
  EconomicCosts costs;
  CaseTable cases;

  [[nodiscard]] Eigen::Index size() const { return populations.size(); }
};

namespace csv {

inline std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cell += c;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(trim(cell));
  return out;
}

struct Table {
  std::string file;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based source line of each row

  [[nodiscard]] std::string where(size_t r) const {
    return file + ":" + std::to_string(lines[r]);
  }
};

inline Table read(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  t.file = path.filename().string();
  std::string line;
  int lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (!seen_header) {
      if (cells != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw DataError(t.file + ":" + std::to_string(lineno) + ": expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (cells.size() != header.size()) {
      throw DataError(t.file + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (!seen_header) throw DataError(t.file + ": missing header");
  return t;
}

inline double number(const Table& t, size_t r, size_t c, const char* what) {
  const std::string& s = t.rows[r][c];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(t.where(r) + ": malformed " + what + " '" + s + "'");
  }
  if (v < 0.0) throw DataError(t.where(r) + ": negative " + what + " " + s);
  return v;
}

}  // namespace csv

namespace detail {

inline std::map<std::string, size_t> per_node(const csv::Table& t, const std::vector<std::string>& roster) {
  const std::set<std::string> known(roster.begin(), roster.end());
  std::map<std::string, size_t> idx;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& node = t.rows[r][0];
    if (!known.count(node)) {
      throw DataError("roster mismatch: node '" + node + "' in " + t.file +
                      " is absent from population.csv");
    }
    if (!idx.emplace(node, r).second) {
      throw DataError(t.where(r) + ": duplicate node '" + node + "'");
    }
  }
  for (const auto& node : roster) {
    if (!idx.count(node)) {
      throw DataError("roster mismatch: node '" + node + "' missing from " + t.file);
    }
  }
  return idx;
}

}  // namespace detail

/// Reads and cross-checks flows.csv, population.csv, gdp.csv and cases.csv.
inline MobilityData load_tables(const DataPaths& paths) {
  MobilityData d;
  const auto pop = csv::read(paths.population, {"node", "population"});
  if (pop.rows.empty()) throw DataError("population.csv lists no nodes");
  std::set<std::string> seen;
  d.populations.resize(static_cast<Eigen::Index>(pop.rows.size()));
  for (size_t r = 0; r < pop.rows.size(); ++r) {
    const auto& node = pop.rows[r][0];
    if (node.empty()) throw DataError(pop.where(r) + ": empty node id");
    if (!seen.insert(node).second) throw DataError(pop.where(r) + ": duplicate node '" + node + "'");
    const double N = csv::number(pop, r, 1, "population");
    if (N <= 0.0) throw DataError(pop.where(r) + ": population must be positive");
    d.nodes.push_back(node);
    d.populations(static_cast<Eigen::Index>(r)) = N;
  }
  const auto n = static_cast<Eigen::Index>(d.nodes.size());

  const auto gdp = csv::read(paths.gdp, {"node", "gdp"});
  const auto gidx = detail::per_node(gdp, d.nodes);
  d.gdp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const size_t r = gidx.at(d.nodes[static_cast<size_t>(i)]);
    d.gdp(i) = csv::number(gdp, r, 1, "gdp");
    if (d.gdp(i) <= 0.0) throw DataError(gdp.where(r) + ": gdp must be positive");
  }
  d.costs = EconomicCosts::from_gdp(d.gdp);

  const auto cases = csv::read(paths.cases, {"node", "cum_cases", "deaths", "date"});
  const auto cidx = detail::per_node(cases, d.nodes);
  d.cases.cum_cases.resize(n);
  d.cases.deaths.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const size_t r = cidx.at(d.nodes[static_cast<size_t>(i)]);
    d.cases.cum_cases(i) = csv::number(cases, r, 1, "cum_cases");
    d.cases.deaths(i) = csv::number(cases, r, 2, "deaths");
    if (d.cases.deaths(i) > d.cases.cum_cases(i)) {
      throw DataError(cases.where(r) + ": deaths exceed cumulative cases");
    }
    d.cases.dates.push_back(cases.rows[r][3]);
  }

  const auto flows = csv::read(paths.flows, {"origin", "destination", "trips"});
  std::map<std::pair<std::string, std::string>, double> agg;
  const std::set<std::string> known(d.nodes.begin(), d.nodes.end());
  for (size_t r = 0; r < flows.rows.size(); ++r) {
    const auto& o = flows.rows[r][0];
    const auto& dst = flows.rows[r][1];
    for (const auto* id : {&o, &dst}) {
      if (!known.count(*id)) {
        throw DataError("roster mismatch: node '" + *id + "' in flows.csv (line " +
                        std::to_string(flows.lines[r]) + ") is absent from population.csv");
      }
    }
    agg[{o, dst}] += csv::number(flows, r, 2, "trips");
  }
  std::set<std::string> has_out;
  for (const auto& [key, trips] : agg) {
    d.flows.records.push_back({key.first, key.second, trips});
    has_out.insert(key.first);
  }
  for (const auto& node : d.nodes) {
    if (!has_out.count(node)) {
      throw DataError("every node needs outgoing flow; '" + node + "' has no records in flows.csv");
    }
  }
  return d;
}

/// Dense n x n trip matrix in roster order; duplicate pairs are summed.
inline Matrix trip_matrix(const FlowTable& flows, const std::vector<std::string>& nodes) {
  std::map<std::string, Eigen::Index> idx;
  for (size_t i = 0; i < nodes.size(); ++i) idx[nodes[i]] = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Matrix P = Matrix::Zero(n, n);
  for (const auto& rec : flows.records) {
    const auto o = idx.find(rec.origin);
    const auto d = idx.find(rec.destination);
    if (o == idx.end() || d == idx.end()) {
      throw DataError("flow record references unknown node '" +
                      (o == idx.end() ? rec.origin : rec.destination) + "'");
    }
    if (rec.trips < 0.0) throw DataError("negative trip count");
    P(o->second, d->second) += rec.trips;
  }
  return P;
}

/// tau_ij = t_i P(i, j) / sum_k P(i, k).
inline Matrix build_travel_rates(const Matrix& trips, const Vector& t_out) {
  const Eigen::Index n = trips.rows();
  if (trips.cols() != n) throw DimensionError("trip matrix must be square");
  detail::require_size(t_out.size(), n, "t_out");
  Matrix tau(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(t_out(i) > 0.0 && t_out(i) <= 1.0)) {
      throw PreconditionError("t_out must lie in (0, 1] for node " + std::to_string(i));
    }
    const double total = trips.row(i).sum();
    if (!(total > 0.0)) {
      throw PreconditionError("node " + std::to_string(i) + " has zero outgoing flow");
    }
    tau.row(i) = trips.row(i) * (t_out(i) / total);
  }
  return tau;
}

inline Matrix build_travel_rates(const FlowTable& flows, const std::vector<std::string>& nodes,
                                 const Vector& t_out) {
  return build_travel_rates(trip_matrix(flows, nodes), t_out);
}

struct Calibration {
  double beta_a = 0.0;
  double beta_s = 0.0;
  double lambda = 0.0;
  int iterations = 0;
};

/// Finds beta_s (with beta_a = eta beta_s) so the uncontrolled dominant
/// eigenvalue equals target_growth. Bisection over [0, 100].
inline Calibration calibrate_beta(const Matrix& A, const Vector& s0, double eta,
                                  double target_growth, const EpidemicParams& base) {
  if (!check_strong_connectivity(A)) throw PreconditionError("calibration needs a strongly connected A");
  if ((s0.array() <= 0.0).any()) throw PreconditionError("calibration needs s0 > 0");
  if (!(eta >= 0.0)) throw PreconditionError("eta must be nonnegative");
  if (!std::isfinite(target_growth)) throw PreconditionError("target growth must be finite");

  auto growth = [&](double bs) {
    return spectral_abscissa(assemble_flow_matrix(s0, A, base.with_transmission(bs, eta)));
  };
  constexpr double kHi = 100.0;
  const double f_lo = growth(0.0);
  if (std::abs(target_growth - f_lo) <= 1e-12) return {0.0, 0.0, f_lo, 0};
  if (target_growth < f_lo) {
    throw SolverError("calibration bracket failure: target " + std::to_string(target_growth) +
                      " is below the zero-transmission growth rate " + std::to_string(f_lo));
  }
  if (target_growth > growth(kHi)) {
    throw SolverError("calibration bracket failure: target unreachable with beta_s <= 100");
  }
  double lo = 0.0, hi = kHi;
  int it = 0;
  for (; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (growth(mid) < target_growth ? lo : hi) = mid;
  }
  const double bs = 0.5 * (lo + hi);
  const double lam = growth(bs);
  if (std::abs(lam - target_growth) > 1e-8) {
    throw SolverError("calibration missed the target growth rate by " +
                      std::to_string(std::abs(lam - target_growth)));
  }
  return {eta * bs, bs, lam, it};
}

}  // namespace epinet
