// covcon command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "covcon/covcon.hpp"

namespace {

using covcon::json;

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw covcon::IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

covcon::BoundConfig load_bounds(const std::string& config_path) {
  if (config_path.empty()) return {};
  return covcon::load_run_config(config_path).bounds;
}

covcon::SparseMode parse_mode(const std::string& s) {
  if (s == "exact") return covcon::SparseMode::exact;
  if (s == "greedy") return covcon::SparseMode::greedy;
  throw covcon::ValidationError("mode must be 'exact' or 'greedy', got '" + s + "'");
}

std::size_t parse_threads(const std::string& s) {
  if (s.empty() || s == "auto") return covcon::resolve_threads(0);
  std::size_t pos = 0;
  long v = -1;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
  }
  if (pos != s.size() || v < 1) throw covcon::ValidationError("--threads must be >= 1 or 'auto'");
  return covcon::resolve_threads(static_cast<std::size_t>(v));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical covariance concentration toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw an isotropic ensemble and write it to a file");
  std::string family = "gaussian", out_path;
  std::optional<double> p;
  std::size_t n = 0, N = 0;
  std::uint64_t seed = 0;
  bool csv = false;
  sample->add_option("--family", family, "gaussian|euclidean_ball|exponential_product|lp_ball|rademacher_control");
  sample->add_option("--p", p, "lp_ball exponent (>= 1 or inf)");
  sample->add_option("--n", n, "dimension")->required();
  sample->add_option("--N", N, "sample count")->required();
  sample->add_option("--seed", seed, "ensemble seed");
  sample->add_option("--out", out_path, "output file")->required();
  sample->add_flag("--csv", csv, "write CSV (n rows x N columns) instead of binary");

  // deviation
  auto* deviation = app.add_subcommand("deviation", "Operator deviation of a matrix file");
  std::string in_path;
  deviation->add_option("--in", in_path, "matrix file")->required();

  // psi1
  auto* psi1 = app.add_subcommand("psi1", "Empirical psi_1 norm of the marginals of a matrix file");
  std::size_t directions = 32;
  psi1->add_option("--in", in_path, "matrix file")->required();
  psi1->add_option("--directions", directions, "random directions beyond the basis");

  // amnorm
  auto* amnorm = app.add_subcommand("amnorm", "Sparse operator norm A_m of a matrix file");
  std::string mode = "exact";
  std::optional<std::size_t> m;
  std::string threads_text;
  amnorm->add_option("--in", in_path, "matrix file")->required();
  amnorm->add_option("--mode", mode, "exact|greedy");
  amnorm->add_option("--m", m, "single sparsity level; default is the profile over 1,2,4,...,N");
  amnorm->add_option("--threads", threads_text, "worker threads or 'auto'");

  // net
  auto* net = app.add_subcommand("net", "Build an epsilon-separated net of the sphere");
  double epsilon = 1.0 / 3.0;
  bool points = false;
  net->add_option("--n", n, "dimension")->required();
  net->add_option("--epsilon", epsilon, "net radius in (0, 1)");
  net->add_flag("--points", points, "include the points");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Evaluate the closed-form bounds");
  std::string config_path;
  double max_col = 0.0;
  std::optional<double> psi, K;
  bounds->add_option("--n", n, "dimension")->required();
  bounds->add_option("--N", N, "sample count")->required();
  bounds->add_option("--config", config_path, "run config supplying [bounds]");
  bounds->add_option("--max-col-norm", max_col, "observed max column norm");
  bounds->add_option("--psi", psi, "override psi");
  bounds->add_option("--K", K, "override K");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run an experiment config and write the bundle");
  std::string output_override;
  experiment->add_option("--config", config_path, "run config")->required();
  experiment->add_option("--output-dir", output_override, "override [output] dir");
  experiment->add_option("--threads", threads_text, "worker threads or 'auto'");

  // fit
  auto* fit = app.add_subcommand("fit", "Scaling fit of a results CSV");
  std::string results_path;
  fit->add_option("--results", results_path, "results.csv")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "Log-log SVG of a results CSV");
  plot->add_option("--results", results_path, "results.csv")->required();
  plot->add_option("--out", out_path, "output SVG")->required();
  plot->add_option("--config", config_path, "run config supplying [bounds]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sample) {
      const covcon::EnsembleSpec spec{covcon::parse_family(family, p), n, N, seed};
      const auto a = covcon::sample_ensemble(spec);
      if (csv) {
        std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
        if (!os) throw covcon::IoError("cannot open '" + out_path + "' for writing");
        covcon::write_matrix_csv(os, a);
        if (!os) throw covcon::IoError("write to '" + out_path + "' failed");
      } else {
        covcon::write_matrix(out_path, a);
      }
    } else if (*deviation) {
      print(covcon::to_json(covcon::operator_deviation(covcon::read_matrix(in_path))));
    } else if (*psi1) {
      const auto a = covcon::read_matrix(in_path);
      const auto dirs = covcon::probe_directions(a.rows(), directions, a.spec().seed);
      json per = json::array();
      double best = 0.0;
      for (const auto& y : dirs) {
        const auto est = covcon::psi1_estimate(covcon::project_columns(a.view(), y));
        best = std::max(best, est.value);
        per.push_back(covcon::to_json(est));
      }
      print({{"psi1", best}, {"directions", dirs.size()}, {"per_direction", per}});
    } else if (*amnorm) {
      const auto a = covcon::read_matrix(in_path);
      covcon::SparseNormOptions opt;
      opt.threads = parse_threads(threads_text);
      const auto md = parse_mode(mode);
      if (m) {
        const auto r = covcon::sparse_norm_detailed(a, *m, md, opt);
        print({{"m", *m}, {"mode", covcon::mode_name(md)}, {"value", r.value}, {"support", r.support}});
      } else {
        print(covcon::to_json(covcon::sparse_norm_profile(a, md, opt)));
      }
    } else if (*net) {
      const auto s = covcon::build_net(n, epsilon);
      json j{{"n", s.n}, {"epsilon", s.epsilon}, {"size", s.size()},
             {"log_cardinality_bound", covcon::net_cardinality_log(n)}};
      if (points) {
        json pts = json::array();
        for (std::size_t i = 0; i < s.size(); ++i) {
          const auto pt = s.point(i);
          pts.push_back(std::vector<double>(pt.begin(), pt.end()));
        }
        j["points"] = pts;
      }
      print(j);
    } else if (*bounds) {
      auto cfg = load_bounds(config_path);
      if (psi) cfg.psi = *psi;
      if (K) cfg.K = *K;
      cfg.validate();
      json arr = json::array();
      for (const auto& r : covcon::evaluate_bounds(cfg, n, N, max_col)) arr.push_back(covcon::to_json(r));
      print({{"constants", covcon::to_json(cfg)}, {"bounds", arr}});
    } else if (*experiment) {
      auto cfg = covcon::load_run_config(config_path);
      if (!output_override.empty()) cfg.output_dir = output_override;
      const std::size_t threads =
          threads_text.empty() ? covcon::resolve_threads(cfg.parallelism) : parse_threads(threads_text);
      const auto bundle = covcon::run_experiment(cfg, threads);
      covcon::write_bundle(bundle, cfg.output_dir, cfg.emit);
    } else if (*fit) {
      std::istringstream in(read_text(results_path));
      std::cout << covcon::fits_json(covcon::read_results_csv(in)).dump(2) << '\n';
    } else if (*plot) {
      std::istringstream in(read_text(results_path));
      const auto results = covcon::read_results_csv(in);
      auto cfg = load_bounds(config_path);
      covcon::write_text(out_path, covcon::render_plot(results, cfg));
    }
  } catch (const covcon::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (residual " << e.residual() << ")\n";
    return e.exit_code();
  } catch (const covcon::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 2;
  }
  return 0;
}
