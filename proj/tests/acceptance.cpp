// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "covcon/covcon.hpp"

namespace {

namespace fs = std::filesystem;
using namespace covcon;
using Clock = std::chrono::steady_clock;

// Tolerances and bands.
constexpr double kExponentLo = 0.4, kExponentHi = 0.6;
constexpr double kMinRSquared = 0.95;
constexpr double kLogConstantFactor = 2.0;
constexpr double kMedianLo = 1.5, kMedianHi = 3.5;
constexpr double kEigenTol = 1e-10;
constexpr double kCharPolyTol = 1e-8;
constexpr double kColumnNormTol = 1e-12;
constexpr double kOperatorNormTol = 1e-9;
constexpr double kRandomSearchRel = 0.01;
constexpr double kNetFactor = 4.5;
constexpr double kRecombinationSlack = 1e-12;
constexpr double kPsiClosedFormTol = 1e-9;
constexpr double kPsiExponentialRel = 0.10;
constexpr double kHomogeneityTol = 1e-9;
constexpr double kBoundedK = 4.0;
constexpr int kBoundedMinPass = 99;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double seconds) {
  std::printf("criterion %2d: %s  %s (%s) [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", title.c_str(),
              o.detail.c_str(), seconds);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> unit(RandomStream& rng, std::size_t n) {
  std::vector<double> x(n);
  double nn = 0;
  do {
    nn = 0;
    for (auto& v : x) {
      v = rng.normal();
      nn += v * v;
    }
  } while (nn == 0);
  for (auto& v : x) v /= std::sqrt(nn);
  return x;
}

// ------------------------------------------------------------- bundles

struct Bundle {
  fs::path dir;
  double seconds = 0;
  int code = -1;
};

Bundle run_bundle(const std::string& threads) {
  Bundle b;
  b.dir = fs::current_path() / ("acceptance_threads_" + threads);
  fs::remove_all(b.dir);
  const std::string cmd = "COVCON_THREADS=" + threads + " '" + COVCON_CLI + "' experiment --config '" +
                          COVCON_SOURCE_DIR + "/configs/acceptance.ini' --output-dir '" + b.dir.string() + "'";
  const auto t0 = Clock::now();
  const int status = std::system(cmd.c_str());
  b.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  b.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return b;
}

// ------------------------------------------------------------ oracles

double det(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  if (n == 1) return a[0][0];
  double s = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<double>> m;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != c) row.push_back(a[r][k]);
      m.push_back(row);
    }
    s += ((c % 2) ? -1.0 : 1.0) * a[0][c] * det(m);
  }
  return s;
}

std::vector<double> charpoly_roots(const SymMatrix& m) {
  const std::size_t n = m.dim();
  auto p = [&](double x) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i][j] = m(i, j) - (i == j ? x : 0.0);
    return det(a);
  };
  const double r = m.frobenius_norm() + 1.0;
  const int steps = 100000;
  std::vector<double> roots;
  double x0 = -r, f0 = p(x0);
  for (int k = 1; k <= steps; ++k) {
    const double x1 = -r + 2.0 * r * k / steps;
    const double f1 = p(x1);
    if (f0 * f1 < 0) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = p(mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

SymMatrix random_sym(std::size_t dim, std::uint64_t seed) {
  RandomStream rng(seed);
  SymMatrix m(dim);
  for (std::size_t j = 0; j < dim; ++j)
    for (std::size_t i = 0; i <= j; ++i) m.set(i, j, rng.normal());
  return m;
}

// ----------------------------------------------------------- criteria

Outcome criterion5() {
  std::ostringstream why;
  bool ok = true;
  const auto id = sym_eigen(SymMatrix::identity(4));
  for (double v : id.eigenvalues) ok &= v == 1.0;
  ok &= id.residual == 0.0;
  SymMatrix two(2);
  two.set(0, 0, 2);
  two.set(1, 1, 2);
  two.set(0, 1, 1);
  const auto s2 = sym_eigen(two);
  ok &= std::abs(s2.eigenvalues[0] - 1) < kEigenTol && std::abs(s2.eigenvalues[1] - 3) < kEigenTol;
  SymMatrix three(3);
  for (int i = 0; i < 3; ++i) three.set(i, i, 2);
  three.set(0, 1, 1);
  three.set(1, 2, 1);
  const auto s3 = sym_eigen(three);
  const double r2 = std::sqrt(2.0);
  ok &= std::abs(s3.eigenvalues[0] - (2 - r2)) < kEigenTol && std::abs(s3.eigenvalues[1] - 2) < kEigenTol &&
        std::abs(s3.eigenvalues[2] - (2 + r2)) < kEigenTol;
  if (!ok) why << "analytic cases failed; ";
  double worst_cp = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = random_sym(5, 500 + seed);
    const auto roots = charpoly_roots(m);
    const auto s = sym_eigen(m);
    if (roots.size() != 5) {
      ok = false;
      why << "char-poly root count " << roots.size() << "; ";
      continue;
    }
    for (std::size_t k = 0; k < 5; ++k) worst_cp = std::max(worst_cp, std::abs(roots[k] - s.eigenvalues[k]));
  }
  ok &= worst_cp <= kCharPolyTol;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + (seed * 37) % 64;
    const auto m = random_sym(n, 9000 + seed);
    const auto s = sym_eigen(m);
    const double scale = std::max(1.0, m.frobenius_norm());
    double tr = 0;
    for (double v : s.eigenvalues) tr += v;
    worst = std::max(worst, std::abs(tr - m.trace()) / scale);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double vv = 0, rec = 0;
        for (std::size_t k = 0; k < n; ++k) {
          vv += s.basis(k, i) * s.basis(k, j);
          rec += s.basis(i, k) * s.eigenvalues[k] * s.basis(j, k);
        }
        worst = std::max(worst, std::abs(vv - (i == j ? 1.0 : 0.0)));
        worst = std::max(worst, std::abs(rec - m(i, j)) / scale);
      }
  }
  ok &= worst <= kEigenTol;
  why << "char-poly err " << fmt("%.2e", worst_cp) << ", invariant err " << fmt("%.2e", worst);
  return {ok, why.str()};
}

Outcome criterion6() {
  std::size_t violations = 0, checks = 0;
  double end1 = 0, endN = 0;
  for (std::size_t n = 1; n <= 4; ++n)
    for (std::size_t N = 1; N <= 8; ++N)
      for (std::uint64_t rep = 0; rep < 2; ++rep) {
        const auto a = sample_ensemble({Family::gaussian(), n, N, 7000 + 100 * n + 10 * N + rep});
        for (std::size_t m = 1; m <= N; ++m) {
          const double ex = sparse_norm(a, m, SparseMode::exact);
          const double gr = sparse_norm(a, m, SparseMode::greedy);
          ++checks;
          if (gr > ex) ++violations;
          if (m == 1) end1 = std::max(end1, std::abs(ex - max_column_norm(a.view())));
          if (m == N) endN = std::max(endN, std::abs(ex - matrix_norm(a)));
        }
      }
  // Random search over sparse unit vectors, per support.
  double worst_rel = 0;
  bool below = true;
  RandomStream rng(77);
  for (std::uint64_t inst = 0; inst < 3; ++inst) {
    const auto a = sample_ensemble({Family::gaussian(), 4, 8, 8100 + inst});
    for (std::size_t m : {2u, 3u}) {
      double best = 0;
      for (std::size_t first = 0; first + m <= 8; ++first)
      detail::for_each_support_from(8, m, first, [&](std::span<const std::size_t> sup) {
        for (int t = 0; t < 20000; ++t) {
          const auto z = unit(rng, m);
          double az2 = 0;
          for (std::size_t r = 0; r < 4; ++r) {
            double v = 0;
            for (std::size_t q = 0; q < m; ++q) v += a(r, sup[q]) * z[q];
            az2 += v * v;
          }
          best = std::max(best, std::sqrt(az2));
        }
      });
      const double ex = sparse_norm(a, m, SparseMode::exact);
      below &= best <= ex + 1e-12;
      worst_rel = std::max(worst_rel, (ex - best) / ex);
    }
  }
  const bool ok = violations == 0 && end1 <= kColumnNormTol && endN <= kOperatorNormTol && below &&
                  worst_rel <= kRandomSearchRel;
  std::ostringstream why;
  why << violations << "/" << checks << " greedy>exact, |A_1-maxcol| " << fmt("%.1e", end1) << ", |A_N-||A||| "
      << fmt("%.1e", endN) << ", random-search gap " << fmt("%.2f%%", 100 * worst_rel);
  return {ok, why.str()};
}

Outcome criterion7() {
  std::map<std::size_t, SphereNet> nets;
  std::size_t net_bad = 0, rec_bad = 0, pig_bad = 0, probes = 0;
  RandomStream rng(4242);
  for (std::size_t inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + inst % 6;
    const std::size_t N = 8 + 3 * (inst % 5);
    if (!nets.count(n)) nets.emplace(n, build_net(n, 1.0 / 3.0));
    const auto a = sample_ensemble({Family::gaussian(), n, N, derive_seed(0xACCE97, inst, 0)});
    const double dev = operator_deviation(a).deviation;
    const double ns = net_sup_deviation(a, nets.at(n));
    if (!(ns <= dev + 1e-12 && dev <= kNetFactor * ns)) ++net_bad;
    std::map<std::size_t, double> am;
    for (int p = 0; p < 20; ++p) {
      const auto x = unit(rng, n);
      const double B = 0.15 * (p + 1);
      const auto s = truncation_split(a, x, B);
      ++probes;
      if (s.s > s.s1 + s.s2 + s.s3 + kRecombinationSlack) ++rec_bad;
      const std::size_t m = s.m_observed;
      if (m == 0) continue;
      if (!am.count(m)) am[m] = sparse_norm(a, m, SparseMode::exact);
      if (B * B * static_cast<double>(m) > am[m] * am[m] * (1 + 1e-12)) ++pig_bad;
    }
  }
  std::ostringstream why;
  why << "net sandwich violations " << net_bad << "/100, recombination " << rec_bad << "/" << probes
      << ", pigeonhole " << pig_bad << "/" << probes;
  return {net_bad == 0 && rec_bad == 0 && pig_bad == 0, why.str()};
}

Outcome criterion8() {
  const std::vector<double> c(1000, std::log(4.0));
  const double closed = std::abs(psi1_estimate(c).value - 2.0);
  RandomStream rng(8080);
  std::vector<double> e(100000);
  for (auto& v : e) v = rng.exponential();
  const double ve = psi1_estimate(e).value;
  const double rel = std::abs(ve - 2.0) / 2.0;
  double hom = 0;
  const double base = psi1_estimate(e).value;
  for (double s : {0.1, 3.0, 40.0}) {
    std::vector<double> z(e);
    for (auto& v : z) v *= s;
    hom = std::max(hom, std::abs(psi1_estimate(z).value - s * base) / (s * base));
  }
  std::ostringstream why;
  why << "closed-form err " << fmt("%.1e", closed) << ", exponential " << fmt("%.4f", ve) << " (rel "
      << fmt("%.2f%%", 100 * rel) << "), homogeneity err " << fmt("%.1e", hom);
  return {closed <= kPsiClosedFormTol && rel <= kPsiExponentialRel && hom <= kHomogeneityTol, why.str()};
}

Outcome criterion9() {
  double worst = 0;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + t % 16;
    const std::size_t N = 1 + (t * 7) % 64;
    const auto a = sample_ensemble({Family::euclidean_ball(), n, N, derive_seed(0xB0B, t, 0)});
    worst = std::max(worst, boundedness_check(a, std::sqrt(3.0)).ratio);
  }
  int pass = 0;
  for (std::uint64_t t = 0; t < 100; ++t)
    pass += boundedness_check(sample_ensemble({Family::gaussian(), 32, 512, derive_seed(0x6A55, t, 0)}), kBoundedK)
                .holds;
  std::ostringstream why;
  why << "ball max ratio " << fmt("%.4f", worst) << " <= sqrt3, gaussian K=4 holds " << pass << "/100";
  return {worst <= std::sqrt(3.0) && pass >= kBoundedMinPass, why.str()};
}

template <typename F>
void timed(int id, const std::string& title, F&& f) {
  const auto t0 = Clock::now();
  Outcome o{false, ""};
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, title, o, std::chrono::duration<double>(Clock::now() - t0).count());
}

}  // namespace

int main() {
  std::printf("covcon acceptance suite\n");
  const Bundle one = run_bundle("1");
  const Bundle eight = run_bundle("8");
  std::printf("acceptance run: threads=1 %.1fs (exit %d), threads=8 %.1fs (exit %d)\n", one.seconds, one.code,
              eight.seconds, eight.code);

  json fits, checks;
  std::vector<CellResult> results;
  bool bundle_ok = one.code == 0;
  if (bundle_ok) {
    try {
      fits = json::parse(slurp(one.dir / "fit.json"));
      checks = json::parse(slurp(one.dir / "bounds.json"));
      std::istringstream csv(slurp(one.dir / "results.csv"));
      results = read_results_csv(csv);
    } catch (const std::exception& e) {
      std::printf("bundle unreadable: %s\n", e.what());
      bundle_ok = false;
    }
  }
  auto need_bundle = [&]() -> std::optional<Outcome> {
    if (!bundle_ok) return Outcome{false, "acceptance bundle missing"};
    return std::nullopt;
  };
  auto fit_line = [&](const std::string& fam, bool& ok) {
    if (!fits.contains(fam)) {
      ok = false;
      return fam + ": no fit";
    }
    const double e = fits[fam]["exponent"], r2 = fits[fam]["r_squared"];
    ok = e >= kExponentLo && e <= kExponentHi && r2 >= kMinRSquared;
    return fam + " exponent " + fmt("%.4f", e) + " R2 " + fmt("%.4f", r2);
  };

  timed(1, "scaling law, gaussian grid", [&] {
    if (auto o = need_bundle()) return *o;
    bool ok;
    const auto d = fit_line("gaussian", ok);
    return Outcome{ok, d};
  });

  timed(2, "scaling law across families", [&] {
    if (auto o = need_bundle()) return *o;
    bool ok = true;
    std::string d;
    double lo = 1e300, hi = -1e300;
    for (const char* fam : {"gaussian", "euclidean_ball", "exponential_product"}) {
      bool f;
      d += fit_line(fam, f) + "; ";
      ok &= f;
      if (fits.contains(fam)) {
        lo = std::min(lo, fits[fam]["log_constant"].get<double>());
        hi = std::max(hi, fits[fam]["log_constant"].get<double>());
      }
    }
    const double ratio = std::exp(hi - lo);
    ok &= ratio <= kLogConstantFactor;
    d += "constant ratio " + fmt("%.3f", ratio);
    return Outcome{ok, d};
  });

  timed(3, "eigenvalue sandwich within failure budget", [&] {
    if (auto o = need_bundle()) return *o;
    std::size_t bad = 0, total = 0;
    double worst = 0, budget = 1;
    for (const auto& c : checks["cells"]) {
      ++total;
      if (!c["sandwich_ok"].get<bool>()) ++bad;
      worst = std::max(worst, c["sandwich_failure_fraction"].get<double>());
      budget = std::min(budget, c["budget"].get<double>());
    }
    std::ostringstream why;
    why << bad << "/" << total << " cells over budget, worst failure fraction " << fmt("%.3f", worst)
        << ", smallest budget " << fmt("%.3f", budget) << ", C_main " << fmt("%.4f", checks["constants"]["C_main"])
        << ", c_prob " << fmt("%.4f", checks["constants"]["c_prob"]);
    return Outcome{bad == 0 && total > 0, why.str()};
  });

  timed(4, "deviation magnitude, gaussian n=64 N=4096", [&] {
    if (auto o = need_bundle()) return *o;
    for (const auto& r : results)
      if (r.cell.family == Family::gaussian() && r.cell.n == 64 && r.cell.N == 4096) {
        const double ratio = r.summary.median_deviation / std::sqrt(64.0 / 4096.0);
        return Outcome{ratio >= kMedianLo && ratio <= kMedianHi,
                       "median/sqrt(n/N) = " + fmt("%.4f", ratio) + " over " + std::to_string(r.reports.size()) +
                           " trials"};
      }
    return Outcome{false, "cell missing"};
  });

  timed(5, "eigensolver suite", criterion5);
  timed(6, "sparse-norm oracle equivalence", criterion6);
  timed(7, "proof-machinery diagnostics", criterion7);
  timed(8, "psi_1 estimator", criterion8);
  timed(9, "boundedness condition", criterion9);

  timed(10, "determinism across thread counts", [&] {
    if (one.code != 0 || eight.code != 0) return Outcome{false, "a run failed"};
    std::string d;
    bool ok = true;
    for (const char* f : {"results.csv", "fit.json", "bounds.json", "plot.svg"}) {
      const bool same = slurp(one.dir / f) == slurp(eight.dir / f) && !slurp(one.dir / f).empty();
      ok &= same;
      d += std::string(f) + (same ? " identical; " : " DIFFERS; ");
    }
    return Outcome{ok, d};
  });

  if (bundle_ok)
    for (const auto& r : checks["remark2"])
      std::printf("info: rank-deficient cell n=%d N=%d norm %d/%d, deviation %d/%d, all_pass=%s\n",
                  r["n"].get<int>(), r["N"].get<int>(), r["norm_ok"].get<int>(), r["trials"].get<int>(),
                  r["deviation_ok"].get<int>(), r["trials"].get<int>(), r["all_pass"].get<bool>() ? "true" : "false");

  std::printf("%s: %d criterion failure(s)\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
