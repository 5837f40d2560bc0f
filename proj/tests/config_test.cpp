#include <gtest/gtest.h>

#include <string>

#include "covcon/config.hpp"
#include "covcon/error.hpp"

namespace {

using namespace covcon;

const char* kFull = R"(# demo
[experiment]
families = gaussian, lp_ball:1.5, lp_ball:inf
n = 4, 8
N = 64, 256
trials = 12
master_seed = 0x7E57
psi_directions = 8
measured_constants = false

[remark2]
families = gaussian
n = 32
N = 8
trials = 5

[calibration]
enabled = true
trials = 30
remark_trials = 7
quantile = 0.95

[bounds]
psi = 1.2
K = 1.5
C_main = 0.4
c_prob = 0.02
C1 = 3.1
C2 = 2.2
C3 = 40
C_old = 2.5
t = 1
C_remark = 0.9

[output]
dir = out/run
emit = csv, json
parallelism = 3
)";

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_run_config(kFull);
  EXPECT_EQ(c.experiment.families.size(), 3u);
  EXPECT_EQ(c.experiment.families[1], Family::lp_ball(1.5));
  EXPECT_EQ(c.experiment.ns, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(c.experiment.trials, 12u);
  EXPECT_EQ(c.master_seed, 0x7E57u);
  EXPECT_FALSE(c.measured_constants);
  EXPECT_TRUE(c.has_remark2);
  EXPECT_EQ(c.remark2.Ns, (std::vector<std::size_t>{8}));
  EXPECT_TRUE(c.calibration.enabled);
  EXPECT_EQ(c.calibration.remark_trials, 7u);
  EXPECT_EQ(c.bounds.C3, 40.0);
  EXPECT_EQ(c.bounds.C_remark, 0.9);
  EXPECT_EQ(c.output_dir, "out/run");
  EXPECT_EQ(c.emit, (std::set<std::string>{"csv", "json"}));
  EXPECT_EQ(c.parallelism, 3u);
  const auto g = c.main_grid();
  EXPECT_EQ(g.cells.size(), 12u);
  EXPECT_NE(c.remark_grid().master_seed, g.master_seed);
}

TEST(Config, RoundTripIsLossless) {
  const auto c = parse_run_config(kFull);
  const auto text = to_ini(c);
  const auto d = parse_run_config(text);
  EXPECT_EQ(c, d);
  EXPECT_EQ(text, to_ini(d));
  const auto minimal = parse_run_config("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = 1\n");
  EXPECT_EQ(parse_run_config(to_ini(minimal)), minimal);
  EXPECT_EQ(minimal.parallelism, 0u);
  EXPECT_EQ(minimal.bounds.C_remark, minimal.bounds.C_main);
}

TEST(Config, RejectsUnknownKeysAndSections) {
  const std::string base = "[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = 1\n";
  EXPECT_EQ(error_of(base + "[bounds]\nC_mian = 2\n"), "config line 7: unknown key 'C_mian' in [bounds]");
  EXPECT_EQ(error_of(base + "[plots]\n"), "config line 6: unknown section [plots]");
  EXPECT_EQ(error_of(base + "trials = 2\n"), "config line 6: duplicate key 'trials' in [experiment]");
  EXPECT_EQ(error_of("n = 2\n"), "config line 1: key outside of any section");
}

TEST(Config, LineNumberedErrors) {
  EXPECT_EQ(error_of("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = x\n"),
            error_of("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = x\n"));
  EXPECT_NE(error_of("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = x\n").find("config line 5"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nfamilies = cauchy\nn = 2\nN = 4\ntrials = 1\n").find("config line 2"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nfamilies = gaussian\nn = 8\nN = 4\ntrials = 1\n").find("config line 4"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = 1\n[bounds]\nK = 0.5\n")
                .find("K must be >= 1"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nfamilies = gaussian\nn = 2\nN = 4\ntrials = 1\n[remark2]\nfamilies = gaussian\n"
                     "n = 2\nN = 4\ntrials = 1\n")
                .find("N < n"),
            std::string::npos);
}

TEST(Config, TruncatedFile) {
  const std::string full(kFull);
  // Cut inside [experiment]: required keys go missing at end of input.
  const std::string cut = full.substr(0, full.find("trials = 12"));
  const int lines = static_cast<int>(std::count(cut.begin(), cut.end(), '\n'));
  EXPECT_EQ(error_of(cut), "config line " + std::to_string(lines + 1) +
                               ": unexpected end of configuration: missing required key 'trials' in [experiment]");
  // Cut mid-header.
  const std::string mid = full.substr(0, full.find("[remark2]") + 4);
  EXPECT_NE(error_of(mid).find("unterminated section header"), std::string::npos);
  EXPECT_NE(error_of("").find("config line 1"), std::string::npos);
}

TEST(Config, LoadErrors) {
  EXPECT_THROW(load_run_config("/nonexistent/covcon.ini"), IoError);
}

}  // namespace
