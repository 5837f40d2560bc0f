#pragma once

// Run configuration: flat INI with one section per module.
//
//   [experiment]   families, n, N, trials, master_seed, psi_directions,
//                  measured_constants
//   [remark2]      families, n, N, trials            (optional, N < n cells)
//   [calibration]  enabled, master_seed, trials, remark_trials, quantile
//   [bounds]       psi, K, C_main, c_prob, C1, C2, C3, C_old, t, C_remark
//   [output]       dir, emit, parallelism
//
// Unknown sections or keys are rejected.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "covcon/bounds.hpp"
#include "covcon/error.hpp"
#include "covcon/experiments.hpp"
#include "covcon/sampler.hpp"

namespace covcon {

struct GridSection {
  std::vector<Family> families;
  std::vector<std::size_t> ns;
  std::vector<std::size_t> Ns;
  std::size_t trials = 1;
  friend bool operator==(const GridSection&, const GridSection&) = default;
};

struct CalibrationSection {
  bool enabled = false;
  std::uint64_t master_seed = kCalibrationSeed;
  std::size_t trials = 200;
  std::size_t remark_trials = 50;
  double quantile = 0.99;
  friend bool operator==(const CalibrationSection&, const CalibrationSection&) = default;
};

struct RunConfig {
  GridSection experiment;
  std::uint64_t master_seed = kVerificationSeed;
  std::size_t psi_directions = 32;
  bool measured_constants = true;
  bool has_remark2 = false;
  GridSection remark2;
  CalibrationSection calibration;
  BoundConfig bounds;
  std::string output_dir = "results";
  std::set<std::string> emit{"csv", "json", "svg"};
  std::size_t parallelism = 0;  // 0 = auto

  ExperimentGrid main_grid() const {
    ExperimentGrid g;
    g.cells = product_cells(experiment.families, experiment.ns, experiment.Ns);
    g.trials = experiment.trials;
    g.master_seed = master_seed;
    g.bound_config = bounds;
    g.psi_directions = psi_directions;
    g.measured_constants = measured_constants;
    return g;
  }

  /// Remark-regime grid; its seeds are derived from the master seed so the
  /// two grids never share trial streams.
  ExperimentGrid remark_grid() const {
    ExperimentGrid g = main_grid();
    g.cells = product_cells(remark2.families, remark2.ns, remark2.Ns);
    g.trials = remark2.trials;
    g.master_seed = derive_seed(master_seed, 0x52454D41524Bull, 1);
    return g;
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Located {
  std::string value;
  int line = 0;
};

class IniParser {
 public:
  explicit IniParser(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string s = trim(raw);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s[0] == '[') {
        if (s.back() != ']') fail(line, "unterminated section header '" + s + "'");
        section = trim(s.substr(1, s.size() - 2));
        if (!known_.count(section)) fail(line, "unknown section [" + section + "]");
        if (sections_.count(section)) fail(line, "duplicate section [" + section + "]");
        sections_[section];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
      if (section.empty()) fail(line, "key outside of any section");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (!known_.at(section).count(key)) fail(line, "unknown key '" + key + "' in [" + section + "]");
      if (value.empty()) fail(line, "empty value for '" + key + "'");
      auto& sec = sections_[section];
      if (sec.count(key)) fail(line, "duplicate key '" + key + "' in [" + section + "]");
      sec[key] = {value, line};
    }
    end_line_ = line + 1;
  }

  [[noreturn]] static void fail(int line, const std::string& what) {
    throw ValidationError("config line " + std::to_string(line) + ": " + what);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  const Located* find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  const Located& require(const std::string& section, const std::string& key) const {
    if (const auto* v = find(section, key)) return *v;
    fail(end_line_, "unexpected end of configuration: missing required key '" + key + "' in [" +
                        section + "]");
  }

 private:
  const std::map<std::string, std::set<std::string>> known_{
      {"experiment", {"families", "n", "N", "trials", "master_seed", "psi_directions", "measured_constants"}},
      {"remark2", {"families", "n", "N", "trials"}},
      {"calibration", {"enabled", "master_seed", "trials", "remark_trials", "quantile"}},
      {"bounds", {"psi", "K", "C_main", "c_prob", "C1", "C2", "C3", "C_old", "t", "C_remark"}},
      {"output", {"dir", "emit", "parallelism"}},
  };
  std::map<std::string, std::map<std::string, Located>> sections_;
  int end_line_ = 1;
};

inline std::uint64_t parse_u64(const Located& v) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v.value, &used, 0);
    if (used != v.value.size() || v.value[0] == '-') throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    IniParser::fail(v.line, "expected an unsigned integer, got '" + v.value + "'");
  }
}

inline std::size_t parse_positive(const Located& v) {
  const auto x = parse_u64(v);
  if (x == 0) IniParser::fail(v.line, "expected a positive integer, got '" + v.value + "'");
  return static_cast<std::size_t>(x);
}

inline double parse_double(const Located& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v.value, &used);
    if (used != v.value.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    IniParser::fail(v.line, "expected a real number, got '" + v.value + "'");
  }
}

inline bool parse_bool(const Located& v) {
  if (v.value == "true") return true;
  if (v.value == "false") return false;
  IniParser::fail(v.line, "expected true or false, got '" + v.value + "'");
}

inline std::vector<std::size_t> parse_sizes(const Located& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v.value)) out.push_back(parse_positive({item, v.line}));
  if (out.empty()) IniParser::fail(v.line, "empty list");
  return out;
}

inline std::vector<Family> parse_families(const Located& v) {
  std::vector<Family> out;
  for (const auto& item : split_list(v.value)) {
    try {
      out.push_back(parse_family(item));
    } catch (const ValidationError& e) {
      IniParser::fail(v.line, e.what());
    }
  }
  if (out.empty()) IniParser::fail(v.line, "empty family list");
  return out;
}

inline GridSection parse_grid(const IniParser& p, const std::string& section) {
  GridSection g;
  g.families = parse_families(p.require(section, "families"));
  g.ns = parse_sizes(p.require(section, "n"));
  g.Ns = parse_sizes(p.require(section, "N"));
  g.trials = parse_positive(p.require(section, "trials"));
  return g;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, Family>)
      out += family_name(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::uppercase << std::hex << v;
  return os.str();
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  using namespace detail;
  const IniParser p(text);
  RunConfig c;
  c.experiment = parse_grid(p, "experiment");
  if (const auto* v = p.find("experiment", "master_seed")) c.master_seed = parse_u64(*v);
  if (const auto* v = p.find("experiment", "psi_directions")) c.psi_directions = static_cast<std::size_t>(parse_u64(*v));
  if (const auto* v = p.find("experiment", "measured_constants")) c.measured_constants = parse_bool(*v);

  if (p.has_section("remark2")) {
    c.has_remark2 = true;
    c.remark2 = parse_grid(p, "remark2");
  }
  if (const auto* v = p.find("calibration", "enabled")) c.calibration.enabled = parse_bool(*v);
  if (const auto* v = p.find("calibration", "master_seed")) c.calibration.master_seed = parse_u64(*v);
  if (const auto* v = p.find("calibration", "trials")) c.calibration.trials = parse_positive(*v);
  if (const auto* v = p.find("calibration", "remark_trials")) c.calibration.remark_trials = parse_positive(*v);
  if (const auto* v = p.find("calibration", "quantile")) {
    c.calibration.quantile = parse_double(*v);
    if (!(c.calibration.quantile > 0.0 && c.calibration.quantile <= 1.0))
      IniParser::fail(v->line, "quantile must be in (0, 1]");
  }

  auto& b = c.bounds;
  const std::pair<const char*, double*> fields[] = {
      {"psi", &b.psi}, {"K", &b.K},   {"C_main", &b.C_main}, {"c_prob", &b.c_prob}, {"C1", &b.C1},
      {"C2", &b.C2},   {"C3", &b.C3}, {"C_old", &b.C_old},   {"t", &b.t},           {"C_remark", &b.C_remark},
  };
  bool remark_given = false;
  for (const auto& [key, dst] : fields)
    if (const auto* v = p.find("bounds", key)) {
      *dst = parse_double(*v);
      if (std::string(key) == "C_remark") remark_given = true;
    }
  if (!remark_given) b.C_remark = b.C_main;
  try {
    b.validate();
  } catch (const ValidationError& e) {
    const auto* any = p.find("bounds", "psi");
    IniParser::fail(any ? any->line : 1, e.what());
  }

  if (const auto* v = p.find("output", "dir")) c.output_dir = v->value;
  if (const auto* v = p.find("output", "emit")) {
    c.emit.clear();
    for (const auto& item : split_list(v->value)) {
      if (item != "csv" && item != "json" && item != "svg")
        IniParser::fail(v->line, "unknown emit target '" + item + "'");
      c.emit.insert(item);
    }
  }
  if (const auto* v = p.find("output", "parallelism"))
    c.parallelism = v->value == "auto" ? 0 : parse_positive(*v);

  try {
    c.main_grid().validate();
    if (c.has_remark2) c.remark_grid().validate();
  } catch (const ValidationError& e) {
    IniParser::fail(p.require("experiment", "families").line, e.what());
  }
  for (std::size_t n : c.experiment.ns)
    for (std::size_t N : c.experiment.Ns)
      if (N < n)
        IniParser::fail(p.require("experiment", "N").line,
                        "[experiment] cells need n <= N; put N < n cells in [remark2]");
  if (c.has_remark2)
    for (std::size_t n : c.remark2.ns)
      for (std::size_t N : c.remark2.Ns)
        if (N >= n) IniParser::fail(p.require("remark2", "N").line, "[remark2] cells need N < n");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

/// Canonical text form; parse_run_config(to_ini(c)) == c.
inline std::string to_ini(const RunConfig& c) {
  using detail::hex;
  using detail::join;
  std::ostringstream os;
  os << "[experiment]\n"
     << "families = " << join(c.experiment.families) << "\n"
     << "n = " << join(c.experiment.ns) << "\n"
     << "N = " << join(c.experiment.Ns) << "\n"
     << "trials = " << c.experiment.trials << "\n"
     << "master_seed = " << hex(c.master_seed) << "\n"
     << "psi_directions = " << c.psi_directions << "\n"
     << "measured_constants = " << (c.measured_constants ? "true" : "false") << "\n";
  if (c.has_remark2)
    os << "\n[remark2]\n"
       << "families = " << join(c.remark2.families) << "\n"
       << "n = " << join(c.remark2.ns) << "\n"
       << "N = " << join(c.remark2.Ns) << "\n"
       << "trials = " << c.remark2.trials << "\n";
  os << "\n[calibration]\n"
     << "enabled = " << (c.calibration.enabled ? "true" : "false") << "\n"
     << "master_seed = " << hex(c.calibration.master_seed) << "\n"
     << "trials = " << c.calibration.trials << "\n"
     << "remark_trials = " << c.calibration.remark_trials << "\n"
     << "quantile = " << format_real(c.calibration.quantile) << "\n";
  const auto& b = c.bounds;
  os << "\n[bounds]\n"
     << "psi = " << format_real(b.psi) << "\n"
     << "K = " << format_real(b.K) << "\n"
     << "C_main = " << format_real(b.C_main) << "\n"
     << "c_prob = " << format_real(b.c_prob) << "\n"
     << "C1 = " << format_real(b.C1) << "\n"
     << "C2 = " << format_real(b.C2) << "\n"
     << "C3 = " << format_real(b.C3) << "\n"
     << "C_old = " << format_real(b.C_old) << "\n"
     << "t = " << format_real(b.t) << "\n"
     << "C_remark = " << format_real(b.C_remark) << "\n";
  std::vector<std::string> emit(c.emit.begin(), c.emit.end());
  os << "\n[output]\n"
     << "dir = " << c.output_dir << "\n"
     << "emit = ";
  for (std::size_t i = 0; i < emit.size(); ++i) os << (i ? ", " : "") << emit[i];
  os << "\nparallelism = " << (c.parallelism == 0 ? std::string("auto") : std::to_string(c.parallelism)) << "\n";
  return os.str();
}

}  // namespace covcon
