#pragma once

// Seeded Monte Carlo driver. Every trial owns a seed derived up front from
// (master, cell, trial), so results never depend on the worker schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "covcon/bounds.hpp"
#include "covcon/error.hpp"
#include "covcon/linalg.hpp"
#include "covcon/parallel.hpp"
#include "covcon/rng.hpp"
#include "covcon/sampler.hpp"
#include "covcon/statistics.hpp"

namespace covcon {

inline constexpr std::uint64_t kCalibrationSeed = 0xCA11B8A7Eull;
inline constexpr std::uint64_t kVerificationSeed = 0x7E57ull;

struct Cell {
  Family family;
  std::size_t n = 1;
  std::size_t N = 1;

  double beta() const { return static_cast<double>(n) / static_cast<double>(N); }
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct ExperimentGrid {
  std::vector<Cell> cells;
  std::size_t trials = 1;
  std::uint64_t master_seed = kVerificationSeed;
  BoundConfig bound_config;
  std::size_t psi_directions = 32;
  /// Replace cfg.psi / cfg.K by the per-cell measurements in the bounds.
  bool measured_constants = true;

  void validate() const {
    if (cells.empty()) throw ValidationError("experiment grid has no cells");
    if (trials < 1) throw ValidationError("experiment grid needs at least one trial per cell");
    for (const auto& c : cells) EnsembleSpec{c.family, c.n, c.N, 0}.validate();
  }
};

/// Cartesian product families x ns x Ns.
inline std::vector<Cell> product_cells(const std::vector<Family>& families,
                                       const std::vector<std::size_t>& ns,
                                       const std::vector<std::size_t>& Ns) {
  std::vector<Cell> out;
  for (const auto& f : families)
    for (std::size_t n : ns)
      for (std::size_t N : Ns) out.push_back({f, n, N});
  return out;
}

struct CellSummary {
  double mean_deviation = 0.0;
  double median_deviation = 0.0;
  double max_deviation = 0.0;
  double psi_hat = 0.0;  // psi_1 estimate from trial 0, basis + random directions
  double K_hat = 0.0;    // max boundedness ratio over trials
  std::size_t exceedances = 0;  // trials with deviation above the cell's bound
};

struct CellResult {
  Cell cell;
  std::size_t cell_index = 0;
  std::vector<DeviationReport> reports;
  CellSummary summary;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// cfg with psi and K replaced by the cell's measurements (K floored at 1).
inline BoundConfig effective_config(const BoundConfig& cfg, const CellSummary& s, bool measured) {
  BoundConfig e = cfg;
  if (measured) {
    e.psi = s.psi_hat;
    e.K = std::max(1.0, s.K_hat);
  }
  return e;
}

/// Deviation bound the cell is checked against: theorem1_rhs for n <= N,
/// the rank-deficient deviation bound otherwise.
inline double cell_deviation_bound(const BoundConfig& cfg, const Cell& c) {
  return c.n <= c.N ? theorem1_rhs(cfg, c.n, c.N) : remark2_bounds(cfg, c.n, c.N).dev_bound;
}

inline EnsembleSpec trial_spec(const ExperimentGrid& grid, std::size_t cell_index, std::size_t trial) {
  const Cell& c = grid.cells.at(cell_index);
  return {c.family, c.n, c.N, derive_seed(grid.master_seed, cell_index, trial)};
}

/// Summary fields recomputed from `reports` (plus the trial-0 psi estimate).
inline CellSummary summarize(const Cell& cell, const std::vector<DeviationReport>& reports,
                             double psi_hat, const BoundConfig& cfg, bool measured) {
  CellSummary s;
  s.psi_hat = psi_hat;
  std::vector<double> devs;
  devs.reserve(reports.size());
  for (const auto& r : reports) {
    devs.push_back(r.deviation);
    s.mean_deviation += r.deviation;
    s.max_deviation = std::max(s.max_deviation, r.deviation);
    s.K_hat = std::max(s.K_hat, r.boundedness_ratio);
  }
  s.mean_deviation /= static_cast<double>(reports.size());
  s.median_deviation = median_of(std::move(devs));
  const double bound = cell_deviation_bound(effective_config(cfg, s, measured), cell);
  for (const auto& r : reports)
    if (r.deviation > bound) ++s.exceedances;
  return s;
}

inline CellResult run_cell(const ExperimentGrid& grid, std::size_t cell_index, std::size_t threads = 1) {
  if (cell_index >= grid.cells.size()) throw ValidationError("run_cell: cell index out of range");
  CellResult out;
  out.cell = grid.cells[cell_index];
  out.cell_index = cell_index;
  out.reports.resize(grid.trials);
  parallel_for(grid.trials, threads, [&](std::size_t t) {
    try {
      out.reports[t] = operator_deviation(sample_ensemble(trial_spec(grid, cell_index, t)));
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [trial " + std::to_string(t) + "]", e.residual());
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " [trial " + std::to_string(t) + "]");
    }
  });
  const double psi_hat = psi1_ensemble(sample_ensemble(trial_spec(grid, cell_index, 0)), grid.psi_directions);
  out.summary = summarize(out.cell, out.reports, psi_hat, grid.bound_config, grid.measured_constants);
  return out;
}

inline std::vector<CellResult> run_grid(const ExperimentGrid& grid, std::size_t threads = 1) {
  grid.validate();
  std::vector<CellResult> out;
  out.reserve(grid.cells.size());
  for (std::size_t c = 0; c < grid.cells.size(); ++c) out.push_back(run_cell(grid, c, threads));
  return out;
}

// ---------------------------------------------------------------------------
// Scaling law
// ---------------------------------------------------------------------------

struct ScalingFit {
  double exponent = 0.0;      // slope of ln(mean deviation) on ln(n/N)
  double log_constant = 0.0;  // intercept
  double r_squared = 0.0;
  std::vector<double> beta_values;  // distinct n/N ratios, ascending
};

/// Ordinary least squares on (ln beta, ln y) pairs.
inline ScalingFit fit_log_linear(const std::vector<double>& betas, const std::vector<double>& ys) {
  if (betas.size() != ys.size() || betas.empty()) throw ValidationError("scaling_fit: empty design");
  std::set<double> distinct(betas.begin(), betas.end());
  if (distinct.size() < 3)
    throw ValidationError("scaling_fit: need at least 3 distinct n/N ratios, got " +
                          std::to_string(distinct.size()));
  const double k = static_cast<double>(betas.size());
  double mx = 0.0, my = 0.0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(ys[i] > 0.0)) throw ValidationError("scaling_fit: mean deviation must be positive");
    lx.push_back(std::log(betas[i]));
    ly.push_back(std::log(ys[i]));
    mx += lx.back();
    my += ly.back();
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  ScalingFit fit;
  fit.exponent = sxy / sxx;
  fit.log_constant = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.log_constant + fit.exponent * lx[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  fit.beta_values.assign(distinct.begin(), distinct.end());
  return fit;
}

inline ScalingFit scaling_fit(const std::vector<CellResult>& results) {
  std::vector<double> betas, ys;
  for (const auto& r : results) {
    if (r.reports.size() < 10)
      throw ValidationError("scaling_fit: every cell needs at least 10 trials");
    betas.push_back(r.cell.beta());
    ys.push_back(r.summary.mean_deviation);
  }
  return fit_log_linear(betas, ys);
}

// ---------------------------------------------------------------------------
// High-probability checks
// ---------------------------------------------------------------------------

struct CellFailure {
  Cell cell;
  double bound = 0.0;                // deviation threshold used
  double exceedance_fraction = 0.0;  // trials with deviation > bound
  double budget_raw = 0.0;           // 2 exp(-c sqrt n)
  double budget = 0.0;               // clamped to [0, 1]
  bool within_budget = false;
};

inline std::vector<CellFailure> failure_rate(const std::vector<CellResult>& results,
                                             const BoundConfig& cfg, bool measured = true) {
  std::vector<CellFailure> out;
  for (const auto& r : results) {
    const BoundConfig e = effective_config(cfg, r.summary, measured);
    CellFailure f;
    f.cell = r.cell;
    f.bound = theorem1_rhs(e, r.cell.n, r.cell.N);
    std::size_t bad = 0;
    for (const auto& rep : r.reports)
      if (rep.deviation > f.bound) ++bad;
    f.exceedance_fraction = static_cast<double>(bad) / static_cast<double>(r.reports.size());
    f.budget_raw = failure_budget_raw(e, r.cell.n);
    f.budget = clamp_probability(f.budget_raw);
    f.within_budget = f.exceedance_fraction <= f.budget;
    out.push_back(f);
  }
  return out;
}

struct SandwichCell {
  Cell cell;
  double lo = 0.0, hi = 0.0;  // corollary interval
  std::vector<bool> trial_holds;
  double failure_fraction = 0.0;
  double budget = 0.0;
  bool within_budget = false;
};

/// lo <= lambda_min/N <= lambda_max/N <= hi per trial.
inline std::vector<SandwichCell> bai_yin_sandwich(const std::vector<CellResult>& results,
                                                  const BoundConfig& cfg, bool measured = true) {
  std::vector<SandwichCell> out;
  for (const auto& r : results) {
    const BoundConfig e = effective_config(cfg, r.summary, measured);
    SandwichCell s;
    s.cell = r.cell;
    std::tie(s.lo, s.hi) = corollary_interval(e, r.cell.n, r.cell.N);
    const double dN = static_cast<double>(r.cell.N);
    std::size_t bad = 0;
    for (const auto& rep : r.reports) {
      const double lmin = rep.lambda_min / dN;
      const double lmax = rep.lambda_max / dN;
      const bool ok = s.lo <= lmin && lmin <= lmax && lmax <= s.hi;
      s.trial_holds.push_back(ok);
      if (!ok) ++bad;
    }
    s.failure_fraction = static_cast<double>(bad) / static_cast<double>(r.reports.size());
    s.budget = clamp_probability(failure_budget_raw(e, r.cell.n));
    s.within_budget = s.failure_fraction <= s.budget;
    out.push_back(std::move(s));
  }
  return out;
}

struct Remark2Cell {
  CellResult result;
  Remark2Bounds bounds;
  std::vector<double> norms;  // ||A|| per trial
  std::size_t norm_ok = 0;
  std::size_t deviation_ok = 0;
  bool consistent = false;  // dev_bound >= 1, forced by lambda_min = 0
  bool all_pass() const {
    return consistent && norm_ok == norms.size() && deviation_ok == norms.size();
  }
};

/// Rank-deficient regime N < n: ||A|| <= C (psi+K) sqrt n and
/// deviation <= C (psi+K)^2 n/N per trial.
inline std::vector<Remark2Cell> remark2_run(const ExperimentGrid& grid, std::size_t threads = 1) {
  grid.validate();
  for (const auto& c : grid.cells)
    if (c.N >= c.n)
      throw DomainError("remark2_run: every cell must have N < n (got n=" + std::to_string(c.n) +
                        ", N=" + std::to_string(c.N) + ")");
  std::vector<Remark2Cell> out;
  for (std::size_t ci = 0; ci < grid.cells.size(); ++ci) {
    Remark2Cell rc;
    rc.result = run_cell(grid, ci, threads);
    const BoundConfig e = effective_config(grid.bound_config, rc.result.summary, grid.measured_constants);
    rc.bounds = remark2_bounds(e, rc.result.cell.n, rc.result.cell.N);
    rc.norms.resize(grid.trials);
    parallel_for(grid.trials, threads,
                 [&](std::size_t t) { rc.norms[t] = matrix_norm(sample_ensemble(trial_spec(grid, ci, t))); });
    for (std::size_t t = 0; t < grid.trials; ++t) {
      if (rc.norms[t] <= rc.bounds.norm_bound) ++rc.norm_ok;
      if (rc.result.reports[t].deviation <= rc.bounds.dev_bound) ++rc.deviation_ok;
    }
    rc.consistent = rc.bounds.dev_bound >= 1.0;
    out.push_back(std::move(rc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration of the absolute constants
// ---------------------------------------------------------------------------

struct CalibrationPlan {
  std::vector<Cell> cells;          // main regime, n <= N
  std::vector<Cell> remark_cells;   // N < n; may be empty
  std::size_t trials = 200;
  std::size_t remark_trials = 50;
  std::uint64_t master_seed = kCalibrationSeed;
  std::size_t psi_directions = 32;
  double quantile = 0.99;
};

struct CalibrationResult {
  BoundConfig config;
  std::vector<CellResult> results;
  std::vector<double> ratios;  // deviation / ((psi+K)^2 sqrt(n/N)) pooled
};

/// Nearest-rank quantile.
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

/// Freezes every constant of `base` except psi, K, t from seeded runs:
///   C_main   q-quantile of deviation / ((psi^+K^)^2 sqrt(n/N)),
///   c_prob   largest c with 2e^{-c sqrt n} >= 2 max(p_cell, 1/T) per cell,
///   C1       max empirical E<X,y>^4 / psi^4 over probe directions,
///   C2       max over B of ||<X,y>||_4^2 P(|<X,y>| >= B)^{1/2} e^{B/psi} / psi^2,
///   C_old    max(C2, 1/8),
///   C3       5% above the smallest value making both cond3 terms strict,
///   C_remark 10% above the largest remark-regime ratio.
inline CalibrationResult calibrate(const CalibrationPlan& plan, const BoundConfig& base,
                                   std::size_t threads = 1) {
  ExperimentGrid grid;
  grid.cells = plan.cells;
  grid.trials = plan.trials;
  grid.master_seed = plan.master_seed;
  grid.bound_config = base;
  grid.psi_directions = plan.psi_directions;
  grid.measured_constants = true;
  for (const auto& c : grid.cells)
    if (c.n > c.N) throw ValidationError("calibration main cells must have n <= N");

  CalibrationResult out;
  out.results = run_grid(grid, threads);
  BoundConfig cfg = base;

  for (const auto& r : out.results) {
    const BoundConfig e = effective_config(base, r.summary, true);
    const double scale = (e.psi + e.K) * (e.psi + e.K) * std::sqrt(r.cell.beta());
    for (const auto& rep : r.reports) out.ratios.push_back(rep.deviation / scale);
  }
  cfg.C_main = quantile_of(out.ratios, plan.quantile);

  double c_prob = std::numeric_limits<double>::infinity();
  for (const auto& f : failure_rate(out.results, cfg)) {
    const double floor_rate = 1.0 / static_cast<double>(plan.trials);
    const double q = std::min(1.0, 2.0 * std::max(f.exceedance_fraction, floor_rate));
    c_prob = std::min(c_prob, std::log(2.0 / q) / std::sqrt(static_cast<double>(f.cell.n)));
  }
  cfg.c_prob = c_prob;

  double C1 = 0.0, C2 = 0.0;
  for (std::size_t ci = 0; ci < out.results.size(); ++ci) {
    const auto& r = out.results[ci];
    const double psi = r.summary.psi_hat;
    const SampleMatrix a = sample_ensemble(trial_spec(grid, ci, 0));
    for (const auto& y : probe_directions(a.rows(), plan.psi_directions, a.spec().seed)) {
      const auto proj = project_columns(a.view(), y);
      double m4 = 0.0;
      for (double v : proj) m4 += v * v * v * v;
      m4 /= static_cast<double>(proj.size());
      C1 = std::max(C1, m4 / std::pow(psi, 4));
      for (int k = 0; k <= 40; ++k) {
        const double B = 0.25 * k * psi;
        std::size_t tail = 0;
        for (double v : proj)
          if (std::abs(v) >= B) ++tail;
        if (tail == 0) break;
        const double p = static_cast<double>(tail) / static_cast<double>(proj.size());
        C2 = std::max(C2, std::sqrt(m4) * std::sqrt(p) * std::exp(B / psi) / (psi * psi));
      }
    }
  }
  cfg.C1 = C1;
  cfg.C2 = C2;
  cfg.C_old = std::max(C2, 0.125);

  double C3 = 0.0;
  const double ln7 = std::log(7.0);
  for (const auto& c : plan.cells) {
    const double lg = std::log(5.0 * static_cast<double>(c.N) / static_cast<double>(c.n));
    C3 = std::max(C3, std::sqrt(8.0 * cfg.C1 * ln7));
    C3 = std::max(C3, (64.0 / 3.0) * cfg.C_old * ln7 * lg * lg * std::sqrt(c.beta()));
  }
  cfg.C3 = 1.05 * C3;

  cfg.C_remark = cfg.C_main;
  if (!plan.remark_cells.empty()) {
    ExperimentGrid rg = grid;
    rg.cells = plan.remark_cells;
    rg.trials = plan.remark_trials;
    rg.master_seed = derive_seed(plan.master_seed, 0x52454D41524Bull, 0);
    double worst = 0.0;
    for (const auto& rc : remark2_run(rg, threads)) {
      const BoundConfig e = effective_config(base, rc.result.summary, true);
      const double s = e.psi + e.K;
      const double dn = static_cast<double>(rc.result.cell.n);
      const double dN = static_cast<double>(rc.result.cell.N);
      for (std::size_t t = 0; t < rc.norms.size(); ++t) {
        worst = std::max(worst, rc.norms[t] / (s * std::sqrt(dn)));
        worst = std::max(worst, rc.result.reports[t].deviation / (s * s * dn / dN));
      }
    }
    cfg.C_remark = 1.1 * worst;
  }
  out.config = cfg;
  return out;
}

}  // namespace covcon
