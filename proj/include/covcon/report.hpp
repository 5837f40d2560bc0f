#pragma once

// JSON and CSV forms of results. JSON objects use nlohmann::json's sorted
// key order, so serialized output is canonical.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "covcon/bounds.hpp"
#include "covcon/error.hpp"
#include "covcon/experiments.hpp"
#include "covcon/linalg.hpp"
#include "covcon/statistics.hpp"

namespace covcon {

using json = nlohmann::json;

inline json to_json(const DeviationReport& r) {
  return {{"n", r.n},
          {"N", r.N},
          {"lambda_min", r.lambda_min},
          {"lambda_max", r.lambda_max},
          {"deviation", r.deviation},
          {"max_col_norm", r.max_col_norm},
          {"boundedness_ratio", r.boundedness_ratio},
          {"seed", r.seed}};
}

inline json to_json(const Psi1Estimate& p) {
  return {{"value", p.value}, {"sample_size", p.sample_size}, {"bracket", {p.lo, p.hi}}};
}

inline json to_json(const SparseNormProfile& p) {
  json j{{"m_values", p.m_values}, {"a_m", p.a_m}, {"mode", mode_name(p.mode)}};
  j["certificates"] = p.certificates;
  return j;
}

inline json to_json(const TruncationSplit& s) {
  return {{"B", std::isinf(s.B) ? json("inf") : json(s.B)},
          {"x", s.x},
          {"s", s.s},
          {"s1", s.s1},
          {"s2", s.s2},
          {"s3", s.s3},
          {"e_b_indices", s.e_b_indices},
          {"m_observed", s.m_observed},
          {"big_m", s.big_m}};
}

inline json to_json(const BoundConfig& b) {
  return {{"psi", b.psi}, {"K", b.K},   {"C_main", b.C_main}, {"c_prob", b.c_prob}, {"C1", b.C1},
          {"C2", b.C2},   {"C3", b.C3}, {"C_old", b.C_old},   {"t", b.t},           {"C_remark", b.C_remark}};
}

inline json to_json(const BoundReport& r) {
  return {{"name", bound_name(r.name)},
          {"inputs", r.inputs},
          {"value", r.value},
          {"probability_budget", r.probability_budget}};
}

inline json to_json(const ScalingFit& f) {
  return {{"exponent", f.exponent},
          {"log_constant", f.log_constant},
          {"r_squared", f.r_squared},
          {"beta_values", f.beta_values}};
}

inline json cell_json(const Cell& c) {
  return {{"family", family_name(c.family)}, {"n", c.n}, {"N", c.N}};
}

// ---------------------------------------------------------------------------
// Per-trial CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kResultsCsvHeader =
    "family,n,N,trial,seed,lambda_min,lambda_max,deviation,max_col_norm,boundedness_ratio";

inline void write_results_header(std::ostream& os) { os << kResultsCsvHeader << '\n'; }

inline void write_results_rows(std::ostream& os, const CellResult& r) {
  for (std::size_t t = 0; t < r.reports.size(); ++t) {
    const auto& d = r.reports[t];
    os << family_name(r.cell.family) << ',' << d.n << ',' << d.N << ',' << t << ',' << d.seed << ','
       << format_real(d.lambda_min) << ',' << format_real(d.lambda_max) << ','
       << format_real(d.deviation) << ',' << format_real(d.max_col_norm) << ','
       << format_real(d.boundedness_ratio) << '\n';
  }
}

/// Groups rows back into cells (first-appearance order). Summaries carry
/// the deviation statistics and K^; psi^ is not part of the CSV and is 0.
inline std::vector<CellResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("results CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsCsvHeader) throw ValidationError("results CSV: unexpected header '" + line + "'");
  std::vector<CellResult> cells;
  std::map<std::string, std::size_t> index;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 10)
      throw ValidationError("results CSV line " + std::to_string(lineno) + ": expected 10 fields");
    try {
      DeviationReport d;
      d.n = std::stoull(f[1]);
      d.N = std::stoull(f[2]);
      d.seed = std::stoull(f[4]);
      d.lambda_min = std::stod(f[5]);
      d.lambda_max = std::stod(f[6]);
      d.deviation = std::stod(f[7]);
      d.max_col_norm = std::stod(f[8]);
      d.boundedness_ratio = std::stod(f[9]);
      const std::string key = f[0] + "|" + f[1] + "|" + f[2];
      auto it = index.find(key);
      if (it == index.end()) {
        CellResult r;
        r.cell = {parse_family(f[0]), d.n, d.N};
        r.cell_index = cells.size();
        it = index.emplace(key, cells.size()).first;
        cells.push_back(std::move(r));
      }
      cells[it->second].reports.push_back(d);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("results CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  for (auto& c : cells) {
    CellSummary s;
    std::vector<double> devs;
    for (const auto& d : c.reports) {
      s.mean_deviation += d.deviation;
      s.max_deviation = std::max(s.max_deviation, d.deviation);
      s.K_hat = std::max(s.K_hat, d.boundedness_ratio);
      devs.push_back(d.deviation);
    }
    s.mean_deviation /= static_cast<double>(c.reports.size());
    s.median_deviation = median_of(std::move(devs));
    c.summary = s;
  }
  return cells;
}

/// One ScalingFit per family over its n <= N cells; families with fewer
/// than three distinct ratios are skipped.
inline json fits_json(const std::vector<CellResult>& results) {
  std::map<std::string, std::vector<CellResult>> by_family;
  for (const auto& r : results)
    if (r.cell.n <= r.cell.N) by_family[family_name(r.cell.family)].push_back(r);
  json out = json::object();
  for (const auto& [name, cells] : by_family) {
    std::set<double> ratios;
    for (const auto& c : cells) ratios.insert(c.cell.beta());
    if (ratios.size() < 3) continue;
    out[name] = to_json(scaling_fit(cells));
  }
  return out;
}

}  // namespace covcon
