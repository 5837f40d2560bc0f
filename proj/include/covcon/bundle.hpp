#pragma once

// End-to-end experiment run: optional calibration, the main grid, the
// rank-deficient grid, and the serialized result bundle.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "covcon/bounds.hpp"
#include "covcon/config.hpp"
#include "covcon/error.hpp"
#include "covcon/experiments.hpp"
#include "covcon/plot.hpp"
#include "covcon/report.hpp"

namespace covcon {

struct ResultBundle {
  std::string config_echo;  // canonical INI
  std::string results_csv;
  std::string fit_json;
  std::string bounds_json;
  std::string plot_svg;
  BoundConfig constants;  // constants the checks ran with
  std::vector<CellResult> results;
  std::vector<Remark2Cell> remark;
};

/// Gaussian calibration plan on the (n, N) pairs used by `config`.
inline CalibrationPlan calibration_plan(const RunConfig& config) {
  CalibrationPlan plan;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t n : config.experiment.ns)
    for (std::size_t N : config.experiment.Ns)
      if (seen.insert({n, N}).second) plan.cells.push_back({Family::gaussian(), n, N});
  if (config.has_remark2)
    for (std::size_t n : config.remark2.ns)
      for (std::size_t N : config.remark2.Ns) plan.remark_cells.push_back({Family::gaussian(), n, N});
  plan.trials = config.calibration.trials;
  plan.remark_trials = config.calibration.remark_trials;
  plan.master_seed = config.calibration.master_seed;
  plan.psi_directions = config.psi_directions;
  plan.quantile = config.calibration.quantile;
  return plan;
}

inline json consistency_json(const BoundConfig& cfg, const Cell& c) {
  const double B = choose_B(cfg, c.n, c.N);
  const double theta = choose_theta(cfg, c.n, c.N);
  const Cond3 cond = cond3_holds(theta, c.N, B, cfg, c.n);
  const double s3 = s3_envelope(cfg, B);
  const double limit = cfg.C_old * cfg.psi * cfg.psi * c.beta();
  json j = cell_json(c);
  j["B"] = B;
  j["theta"] = theta;
  j["cond3_variance"] = cond.variance_term;
  j["cond3_range"] = cond.range_term;
  j["s3_envelope"] = s3;
  j["s3_limit"] = limit;
  j["s3_ok"] = s3 <= limit;
  return j;
}

inline ResultBundle run_experiment(const RunConfig& config, std::size_t threads) {
  ResultBundle bundle;
  bundle.config_echo = to_ini(config);

  BoundConfig constants = config.bounds;
  json calibration{{"enabled", config.calibration.enabled}};
  if (config.calibration.enabled) {
    const CalibrationResult cal = calibrate(calibration_plan(config), config.bounds, threads);
    constants = cal.config;
    calibration["master_seed"] = config.calibration.master_seed;
    calibration["trials"] = config.calibration.trials;
    calibration["quantile"] = config.calibration.quantile;
  }
  bundle.constants = constants;

  ExperimentGrid grid = config.main_grid();
  grid.bound_config = constants;
  bundle.results = run_grid(grid, threads);
  if (config.has_remark2) {
    ExperimentGrid rg = config.remark_grid();
    rg.bound_config = constants;
    bundle.remark = remark2_run(rg, threads);
  }

  std::ostringstream csv;
  write_results_header(csv);
  for (const auto& r : bundle.results) write_results_rows(csv, r);
  for (const auto& r : bundle.remark) write_results_rows(csv, r.result);
  bundle.results_csv = csv.str();

  bundle.fit_json = fits_json(bundle.results).dump(2) + "\n";

  const auto failures = failure_rate(bundle.results, constants, grid.measured_constants);
  const auto sandwich = bai_yin_sandwich(bundle.results, constants, grid.measured_constants);
  json cells = json::array();
  json consistency = json::array();
  for (std::size_t i = 0; i < bundle.results.size(); ++i) {
    const auto& r = bundle.results[i];
    json j = cell_json(r.cell);
    j["trials"] = r.reports.size();
    j["psi_hat"] = r.summary.psi_hat;
    j["K_hat"] = r.summary.K_hat;
    j["mean_deviation"] = r.summary.mean_deviation;
    j["median_deviation"] = r.summary.median_deviation;
    j["max_deviation"] = r.summary.max_deviation;
    j["bound"] = failures[i].bound;
    j["exceedance_fraction"] = failures[i].exceedance_fraction;
    j["budget"] = failures[i].budget;
    j["budget_raw"] = failures[i].budget_raw;
    j["within_budget"] = failures[i].within_budget;
    j["sandwich_lo"] = sandwich[i].lo;
    j["sandwich_hi"] = sandwich[i].hi;
    j["sandwich_failure_fraction"] = sandwich[i].failure_fraction;
    j["sandwich_ok"] = sandwich[i].within_budget;
    cells.push_back(std::move(j));
    consistency.push_back(
        consistency_json(effective_config(constants, r.summary, grid.measured_constants), r.cell));
  }
  json remark = json::array();
  for (const auto& rc : bundle.remark) {
    json j = cell_json(rc.result.cell);
    j["trials"] = rc.norms.size();
    j["psi_hat"] = rc.result.summary.psi_hat;
    j["K_hat"] = rc.result.summary.K_hat;
    j["norm_bound"] = rc.bounds.norm_bound;
    j["dev_bound"] = rc.bounds.dev_bound;
    j["max_norm"] = *std::max_element(rc.norms.begin(), rc.norms.end());
    j["max_deviation"] = rc.result.summary.max_deviation;
    j["norm_ok"] = rc.norm_ok;
    j["deviation_ok"] = rc.deviation_ok;
    j["consistent"] = rc.consistent;
    j["all_pass"] = rc.all_pass();
    remark.push_back(std::move(j));
  }
  json bounds{{"constants", to_json(constants)},
              {"calibration", calibration},
              {"cells", cells},
              {"consistency", consistency},
              {"remark2", remark}};
  bundle.bounds_json = bounds.dump(2) + "\n";

  if (config.emit.count("svg")) bundle.plot_svg = render_plot(bundle.results, constants);
  return bundle;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_bundle(const ResultBundle& b, const std::filesystem::path& dir,
                         const std::set<std::string>& emit) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_text(dir / "config.ini", b.config_echo);
  if (emit.count("csv")) write_text(dir / "results.csv", b.results_csv);
  if (emit.count("json")) {
    write_text(dir / "fit.json", b.fit_json);
    write_text(dir / "bounds.json", b.bounds_json);
  }
  if (emit.count("svg")) write_text(dir / "plot.svg", b.plot_svg);
}

}  // namespace covcon
