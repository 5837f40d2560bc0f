#pragma once

// Hypothesis-side estimators: psi_1 norms, the boundedness ratio, sparse
// operator norms A_m, sphere nets and the truncation split of S(x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covcon/error.hpp"
#include "covcon/linalg.hpp"
#include "covcon/parallel.hpp"
#include "covcon/quadrature.hpp"
#include "covcon/rng.hpp"
#include "covcon/sampler.hpp"

namespace covcon {

// ---------------------------------------------------------------------------
// psi_1 norm
// ---------------------------------------------------------------------------

/// Empirical psi_1 norm: inf{C > 0 : mean exp(|Y_i|/C) <= 2}. Finite-sample
/// estimates are biased low; treat `value` as a lower bound.
struct Psi1Estimate {
  double value = 0.0;
  std::size_t sample_size = 0;
  double lo = 0.0;  // bisection bracket at termination; `value` == hi
  double hi = 0.0;
};

inline Psi1Estimate psi1_estimate(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("psi1_estimate: empty sample");
  double peak = 0.0;
  for (double y : samples) {
    if (!std::isfinite(y)) throw ValidationError("psi1_estimate: non-finite sample");
    peak = std::max(peak, std::abs(y));
  }
  Psi1Estimate out;
  out.sample_size = samples.size();
  if (peak == 0.0) return out;

  const double T = static_cast<double>(samples.size());
  const double log_target = std::log(2.0);
  // log mean exp(|y|/C), shifted by the peak for stability.
  auto log_mgf = [&](double c) {
    double s = 0.0;
    for (double y : samples) s += std::exp((std::abs(y) - peak) / c);
    return peak / c + std::log(s / T);
  };
  // mean exp(|y|/C) <= exp(peak/C), so C = peak/ln2 is feasible; below
  // peak/ln(2T) the single largest term alone exceeds 2.
  double hi = peak / log_target;
  double lo = 0.5 * peak / std::log(2.0 * T);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (log_mgf(mid) <= log_target)
      hi = mid;
    else
      lo = mid;
  }
  out.value = hi;
  out.lo = lo;
  out.hi = hi;
  return out;
}

/// Basis directions followed by `random_directions` seeded unit vectors.
inline std::vector<std::vector<double>> probe_directions(std::size_t n, std::size_t random_directions,
                                                         std::uint64_t seed) {
  std::vector<std::vector<double>> dirs;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    dirs.push_back(std::move(e));
  }
  RandomStream rng(derive_seed(seed, 0x50534931ull, 0));
  for (std::size_t k = 0; k < random_directions; ++k) {
    std::vector<double> y(n);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : y) {
        v = rng.normal();
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : y) v *= inv;
    dirs.push_back(std::move(y));
  }
  return dirs;
}

inline std::vector<double> project_columns(const MatrixView& a, std::span<const double> y) {
  std::vector<double> out(a.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    const auto x = a.column(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < a.rows; ++j) dot += x[j] * y[j];
    out[i] = dot;
  }
  return out;
}

/// Max psi_1 estimate of <X_i, y> pooled over columns, over the basis plus
/// `random_directions` directions seeded from the matrix's spec. A lower
/// bound on the uniform constant.
inline double psi1_ensemble(const SampleMatrix& a, std::size_t random_directions) {
  double best = 0.0;
  for (const auto& y : probe_directions(a.rows(), random_directions, a.spec().seed))
    best = std::max(best, psi1_estimate(project_columns(a.view(), y)).value);
  return best;
}

// ---------------------------------------------------------------------------
// Boundedness condition
// ---------------------------------------------------------------------------

struct BoundednessCheck {
  double ratio = 0.0;
  bool holds = false;
};

inline BoundednessCheck boundedness_check(const SampleMatrix& a, double K) {
  if (!(K >= 1.0)) throw ValidationError("boundedness_check: K must be >= 1");
  const double ratio = boundedness_ratio(max_column_norm(a.view()), a.rows(), a.cols());
  return {ratio, ratio <= K};
}

// ---------------------------------------------------------------------------
// Sparse operator norm A_m = sup{|Az| : z unit, at most m non-zeros}
// ---------------------------------------------------------------------------

enum class SparseMode { exact, greedy };

inline std::string mode_name(SparseMode m) { return m == SparseMode::exact ? "exact" : "greedy"; }

inline constexpr double kExactSubsetBudget = 1e6;

struct SparseNormResult {
  double value = 0.0;
  std::vector<std::size_t> support;  // sorted; achieves `value`
};

struct SparseNormOptions {
  std::size_t threads = 1;
  std::size_t power_starts = 64;
  std::size_t power_iterations = 200;
  std::size_t growth_starts = 16;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

/// Top singular value of the columns of A listed in `support` (sorted).
inline double support_norm(const MatrixView& a, std::span<const std::size_t> support) {
  std::vector<double> sub;
  sub.reserve(a.rows * support.size());
  for (std::size_t c : support) {
    const auto col = a.column(c);
    sub.insert(sub.end(), col.begin(), col.end());
  }
  return top_singular_value({a.rows, support.size(), sub});
}

namespace detail {

// Visits every sorted m-subset of [first, N) whose smallest element is `first`.
template <typename Visit>
void for_each_support_from(std::size_t N, std::size_t m, std::size_t first, Visit&& visit) {
  std::vector<std::size_t> s(m);
  s[0] = first;
  for (std::size_t k = 1; k < m; ++k) s[k] = first + k;
  if (m == 0 || s[m - 1] >= N) return;
  for (;;) {
    visit(std::span<const std::size_t>(s));
    std::size_t k = m;
    while (k > 1 && s[k - 1] == N - m + (k - 1)) --k;
    if (k == 1) return;
    ++s[k - 1];
    for (std::size_t j = k; j < m; ++j) s[j] = s[j - 1] + 1;
  }
}

inline SparseNormResult sparse_norm_exact(const MatrixView& a, std::size_t m, std::size_t threads) {
  const std::size_t N = a.cols;
  const std::size_t firsts = N - m + 1;
  std::vector<SparseNormResult> partial(firsts);
  parallel_for(firsts, threads, [&](std::size_t first) {
    auto& best = partial[first];
    best.value = -1.0;
    for_each_support_from(N, m, first, [&](std::span<const std::size_t> s) {
      const double v = support_norm(a, s);
      if (v > best.value) {
        best.value = v;
        best.support.assign(s.begin(), s.end());
      }
    });
  });
  // Ordered reduction: ties resolve to the lexicographically first support.
  SparseNormResult best = partial[0];
  for (std::size_t f = 1; f < firsts; ++f)
    if (partial[f].value > best.value) best = partial[f];
  return best;
}

// Pads a support to exactly m indices with the largest unused columns, then
// sorts it, so every greedy candidate is scored exactly like an exact-mode
// support.
inline std::vector<std::size_t> complete_support(std::vector<std::size_t> s, std::size_t m,
                                                 std::span<const std::size_t> by_norm) {
  std::vector<char> used(by_norm.size(), 0);
  for (std::size_t c : s) used[c] = 1;
  for (std::size_t c : by_norm) {
    if (s.size() >= m) break;
    if (!used[c]) {
      s.push_back(c);
      used[c] = 1;
    }
  }
  std::sort(s.begin(), s.end());
  return s;
}

inline SparseNormResult sparse_norm_greedy(const MatrixView& a, std::size_t m,
                                           const SparseNormOptions& opt, std::uint64_t seed) {
  const std::size_t N = a.cols;
  const std::size_t n = a.rows;
  std::vector<double> norms(N);
  for (std::size_t c = 0; c < N; ++c) {
    double s = 0.0;
    for (double v : a.column(c)) s += v * v;
    norms[c] = s;
  }
  std::vector<std::size_t> by_norm(N);
  std::iota(by_norm.begin(), by_norm.end(), std::size_t{0});
  std::stable_sort(by_norm.begin(), by_norm.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SparseNormResult best;
  best.value = -1.0;
  auto consider = [&](std::vector<std::size_t> s) {
    s = complete_support(std::move(s), m, by_norm);
    const double v = support_norm(a, s);
    if (v > best.value || (v == best.value && s < best.support)) {
      best.value = v;
      best.support = std::move(s);
    }
  };

  // (a) truncated power iteration: z <- H_m(A^T A z) / | . |.
  RandomStream rng(derive_seed(seed, 0x475245454459ull, m));
  std::vector<double> z(N), az(n), w(N);
  std::vector<std::size_t> idx(N);
  for (std::size_t start = 0; start < opt.power_starts; ++start) {
    for (auto& v : z) v = rng.normal();
    std::vector<std::size_t> support;
    for (std::size_t it = 0; it < opt.power_iterations; ++it) {
      std::fill(az.begin(), az.end(), 0.0);
      for (std::size_t c = 0; c < N; ++c) {
        if (z[c] == 0.0) continue;
        const auto col = a.column(c);
        for (std::size_t r = 0; r < n; ++r) az[r] += col[r] * z[c];
      }
      for (std::size_t c = 0; c < N; ++c) {
        const auto col = a.column(c);
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += col[r] * az[r];
        w[c] = s;
      }
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                        [&](std::size_t x, std::size_t y) {
                          const double ax = std::abs(w[x]), ay = std::abs(w[y]);
                          return ax > ay || (ax == ay && x < y);
                        });
      std::vector<std::size_t> next(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(next.begin(), next.end());
      double norm2 = 0.0;
      std::fill(z.begin(), z.end(), 0.0);
      for (std::size_t c : next) {
        z[c] = w[c];
        norm2 += w[c] * w[c];
      }
      if (norm2 == 0.0) break;
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t c : next) z[c] *= inv;
      const bool stable = next == support;
      support = std::move(next);
      if (stable) break;
    }
    std::vector<std::size_t> nz;
    for (std::size_t c : support)
      if (z[c] != 0.0) nz.push_back(c);
    consider(std::move(nz));
  }

  // (b) greedy support growth from the largest columns.
  const std::size_t starts = std::min(opt.growth_starts, N);
  for (std::size_t k = 0; k < starts; ++k) {
    std::vector<std::size_t> s{by_norm[k]};
    std::vector<char> in(N, 0);
    in[by_norm[k]] = 1;
    while (s.size() < m) {
      double best_gain = -1.0;
      std::size_t best_col = N;
      for (std::size_t c = 0; c < N; ++c) {
        if (in[c]) continue;
        auto trial = s;
        trial.push_back(c);
        std::sort(trial.begin(), trial.end());
        const double v = support_norm(a, trial);
        if (v > best_gain) {
          best_gain = v;
          best_col = c;
        }
      }
      s.push_back(best_col);
      in[best_col] = 1;
    }
    consider(std::move(s));
  }
  return best;
}

}  // namespace detail

/// A_m. Exact mode enumerates all m-column supports (budget 1e6 subsets) and
/// takes the largest top singular value; greedy mode returns a lower bound.
inline SparseNormResult sparse_norm_detailed(const SampleMatrix& a, std::size_t m, SparseMode mode,
                                             const SparseNormOptions& opt = {}) {
  const std::size_t N = a.cols();
  if (m < 1 || m > N) throw ValidationError("sparse_norm: m must satisfy 1 <= m <= N");
  if (mode == SparseMode::exact) {
    const double subsets = binomial(N, m);
    if (subsets > kExactSubsetBudget)
      throw BudgetError("sparse_norm: exact mode needs binom(" + std::to_string(N) + ", " +
                        std::to_string(m) + ") = " + format_real(subsets) +
                        " supports, over the budget of 1e6; use greedy mode");
    return detail::sparse_norm_exact(a.view(), m, opt.threads);
  }
  return detail::sparse_norm_greedy(a.view(), m, opt, a.spec().seed);
}

inline double sparse_norm(const SampleMatrix& a, std::size_t m, SparseMode mode,
                          const SparseNormOptions& opt = {}) {
  return sparse_norm_detailed(a, m, mode, opt).value;
}

struct SparseNormProfile {
  std::vector<std::size_t> m_values;
  std::vector<double> a_m;
  SparseMode mode = SparseMode::exact;
  std::vector<std::vector<std::size_t>> certificates;  // exact mode only
};

/// A_m on the grid {1, 2, 4, ..., N}, made monotone by cumulative max.
inline SparseNormProfile sparse_norm_profile(const SampleMatrix& a, SparseMode mode,
                                             const SparseNormOptions& opt = {}) {
  const std::size_t N = a.cols();
  SparseNormProfile p;
  p.mode = mode;
  for (std::size_t m = 1; m < N; m *= 2) p.m_values.push_back(m);
  p.m_values.push_back(N);
  if (mode == SparseMode::exact)
    for (std::size_t m : p.m_values)
      if (binomial(N, m) > kExactSubsetBudget)
        throw BudgetError("sparse_norm_profile: exact mode exceeds the 1e6 support budget at m=" +
                          std::to_string(m) + "; use greedy mode");
  std::vector<std::size_t> certificate;
  double running = 0.0;
  for (std::size_t m : p.m_values) {
    auto r = sparse_norm_detailed(a, m, mode, opt);
    if (r.value > running) {
      running = r.value;
      certificate = std::move(r.support);
    }
    p.a_m.push_back(running);
    if (mode == SparseMode::exact) p.certificates.push_back(certificate);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Truncation split of S(x) at level B
// ---------------------------------------------------------------------------

struct ExpectationMode {
  enum class Kind { analytic_isotropic, fresh_sample };
  Kind kind = Kind::analytic_isotropic;
  std::size_t trials = 100000;

  static ExpectationMode analytic() { return {}; }
  static ExpectationMode fresh(std::size_t T = 100000) { return {Kind::fresh_sample, T}; }
};

struct TruncationSplit {
  double B = 0.0;
  std::vector<double> x;
  double s = 0.0;   // S(x) = |(1/N) sum <X_i,x>^2 - 1|
  double s1 = 0.0;  // truncated, centered average
  double s2 = 0.0;  // empirical excess over B
  double s3 = 0.0;  // expected excess over B
  std::vector<std::size_t> e_b_indices;
  std::size_t m_observed = 0;
  double big_m = 0.0;  // max{psi^2 n, max_i |X_i|^2}
};

/// E[(Y^2 - B^2) 1{|Y| >= B}] for the standard normal.
inline double gaussian_excess(double B) {
  if (std::isinf(B)) return 0.0;
  return 2.0 * (B * normal_pdf(B) + (1.0 - B * B) * normal_upper_tail(B));
}

/// Same for the symmetric exponential with unit variance (rate sqrt 2).
inline double laplace_excess(double B) {
  if (std::isinf(B)) return 0.0;
  const double rate = std::numbers::sqrt2;
  return std::exp(-rate * B) * (2.0 * B / rate + 2.0 / (rate * rate));
}

/// Same for any 1-D marginal of the isotropic ball in R^n (radius sqrt(n+2)).
/// The marginal of the unit ball has density ~ (1 - s^2)^{(n-1)/2}; with
/// s = cos(a) the excess integrand is smooth in a.
inline double ball_excess(double B, std::size_t n) {
  if (std::isinf(B)) return 0.0;
  const double dn = static_cast<double>(n);
  const double R = std::sqrt(dn + 2.0);
  const double b = B / R;
  if (b >= 1.0) return 0.0;
  const double log_norm = std::lgamma(0.5) + std::lgamma(0.5 * (dn + 1.0)) - std::lgamma(0.5 * dn + 1.0);
  const double norm = std::exp(log_norm);
  static const GaussLegendre rule(16);
  const double top = std::acos(std::max(b, 0.0));
  const double integral = rule.integrate(
      [&](double t) {
        const double c = std::cos(t);
        return (c * c - b * b) * std::pow(std::sin(t), dn);
      },
      0.0, top, 128);
  return 2.0 * R * R * integral / norm;
}

namespace detail {

inline std::optional<std::size_t> basis_axis(std::span<const double> x) {
  std::optional<std::size_t> axis;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    if (axis || std::abs(std::abs(x[j]) - 1.0) > 1e-12) return std::nullopt;
    axis = j;
  }
  return axis;
}

inline double analytic_excess(const EnsembleSpec& spec, std::span<const double> x, double B) {
  switch (spec.family.kind) {
    case FamilyKind::gaussian: return gaussian_excess(B);
    case FamilyKind::euclidean_ball: return ball_excess(B, spec.n);
    case FamilyKind::exponential_product:
      if (basis_axis(x)) return laplace_excess(B);
      throw ValidationError(
          "truncation_split: no closed-form marginal for exponential_product off the coordinate "
          "axes; use fresh_sample");
    default:
      throw ValidationError("truncation_split: no closed-form marginal for family " +
                            family_name(spec.family) + "; use fresh_sample");
  }
}

inline double sampled_excess(const EnsembleSpec& spec, std::span<const double> x, double B,
                             std::size_t trials) {
  if (std::isinf(B)) return 0.0;
  EnsembleSpec fresh = spec;
  fresh.seed = derive_seed(spec.seed, 0x4652455348ull, 0);
  const auto stats = sample_direction_statistics(fresh, x, trials);
  double s = 0.0;
  for (double y : stats.samples)
    if (std::abs(y) >= B) s += y * y - B * B;
  return s / static_cast<double>(trials);
}

}  // namespace detail

/// Splits S(x) into S1 + S2 + S3 at level B (B = +inf disables truncation).
/// The truncated second moment is taken as 1 - S3 by isotropy, so
/// S(x) <= S1 + S2 + S3 holds in both expectation modes.
inline TruncationSplit truncation_split(const SampleMatrix& a, std::span<const double> x, double B,
                                        ExpectationMode mode = ExpectationMode::analytic(),
                                        double psi = 1.0) {
  if (x.size() != a.rows()) throw ValidationError("truncation_split: x has wrong dimension");
  double norm2 = 0.0;
  for (double v : x) norm2 += v * v;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-12)
    throw ValidationError("truncation_split: x is not a unit vector");
  if (!(B >= 0.0)) throw ValidationError("truncation_split: B must be >= 0");

  TruncationSplit out;
  out.B = B;
  out.x.assign(x.begin(), x.end());
  out.s3 = mode.kind == ExpectationMode::Kind::analytic_isotropic
               ? detail::analytic_excess(a.spec(), x, B)
               : detail::sampled_excess(a.spec(), x, B, mode.trials);

  const auto y = project_columns(a.view(), x);
  const double inv_N = 1.0 / static_cast<double>(a.cols());
  double second = 0.0, truncated = 0.0, excess = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double y2 = y[i] * y[i];
    second += y2;
    if (std::abs(y[i]) >= B) {
      out.e_b_indices.push_back(i);
      truncated += B * B;
      excess += y2 - B * B;
    } else {
      truncated += y2;
    }
  }
  out.s = std::abs(second * inv_N - 1.0);
  out.s1 = std::abs(truncated * inv_N - (1.0 - out.s3));
  out.s2 = excess * inv_N;
  out.m_observed = out.e_b_indices.size();
  const double mc = max_column_norm(a.view());
  out.big_m = std::max(psi * psi * static_cast<double>(a.rows()), mc * mc);
  return out;
}

// ---------------------------------------------------------------------------
// epsilon-nets of the sphere
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxNetDimension = 8;

struct SphereNet {
  std::size_t n = 0;
  double epsilon = 0.0;
  std::vector<double> points;  // row-major, one unit vector per n entries

  std::size_t size() const { return n == 0 ? 0 : points.size() / n; }
  std::span<const double> point(std::size_t k) const {
    return std::span<const double>(points).subspan(k * n, n);
  }
};

struct NetOptions {
  /// Stop after this many consecutive rejected candidates, scaled by net size.
  std::size_t patience_min = 300000;
  std::size_t patience_per_point = 100;
  std::size_t max_candidates = 100000000;
};

namespace detail {

// Candidate stream: additive recurrence with the generalized golden ratio in
// dimension d (Roberts' R_d sequence), mapped to the sphere through
// Box-Muller pairs and normalization.
class SphereStream {
 public:
  explicit SphereStream(std::size_t n) : n_(n), d_(2 * ((n + 1) / 2)), alpha_(d_), state_(d_, 0.5) {
    double phi = 2.0;
    for (int it = 0; it < 100; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(d_ + 1));
    for (std::size_t j = 0; j < d_; ++j) alpha_[j] = std::fmod(std::pow(1.0 / phi, static_cast<double>(j + 1)), 1.0);
  }

  void next(std::span<double> out) {
    auto& g = buffer_;
    for (;;) {
      for (std::size_t j = 0; j < d_; ++j) {
        state_[j] += alpha_[j];
        if (state_[j] >= 1.0) state_[j] -= 1.0;
      }
      for (std::size_t j = 0; j < d_; j += 2) {
        const double u = std::max(state_[j], 0x1.0p-60);
        const double r = std::sqrt(-2.0 * std::log(u));
        const double angle = 2.0 * std::numbers::pi * state_[j + 1];
        g[j] = r * std::cos(angle);
        g[j + 1] = r * std::sin(angle);
      }
      double norm2 = 0.0;
      for (std::size_t j = 0; j < n_; ++j) norm2 += g[j] * g[j];
      if (norm2 == 0.0) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t j = 0; j < n_; ++j) out[j] = g[j] * inv;
      return;
    }
  }

 private:
  std::size_t n_, d_;
  std::vector<double> alpha_, state_;
  std::vector<double> buffer_ = std::vector<double>(d_);
};

}  // namespace detail

/// Greedy maximal epsilon-separated subset of S^{n-1} (pairwise distances
/// > epsilon), which covers the sphere at radius epsilon once no candidate
/// can be added. Sequential and deterministic.
inline SphereNet build_net(std::size_t n, double epsilon, const NetOptions& opt = {}) {
  if (n < 1 || n > kMaxNetDimension)
    throw ValidationError("build_net: n must be in [1, 8]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("build_net: epsilon must be in (0, 1)");

  const double cap_log = static_cast<double>(n) * std::log(1.0 + 2.0 / epsilon);
  // Cells of side epsilon over [-1, 1]^n; any point within epsilon of a
  // candidate sits in a cell adjacent to the candidate's.
  const std::int64_t cells = static_cast<std::int64_t>(std::floor(2.0 / epsilon)) + 1;
  std::size_t cell_count = 1;
  for (std::size_t j = 0; j < n; ++j) cell_count *= static_cast<std::size_t>(cells);
  std::vector<std::int32_t> head(cell_count, -1);  // first point per cell
  std::vector<std::int32_t> next;                  // chain through points

  SphereNet net;
  net.n = n;
  net.epsilon = epsilon;
  detail::SphereStream stream(n);
  std::vector<double> cand(n), within(n);
  std::vector<std::int64_t> home(n);
  const double eps2 = epsilon * epsilon;

  auto conflicts_in = [&](std::size_t key) {
    for (std::int32_t idx = head[key]; idx >= 0; idx = next[static_cast<std::size_t>(idx)]) {
      const auto p = net.point(static_cast<std::size_t>(idx));
      double d2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) d2 += (p[j] - cand[j]) * (p[j] - cand[j]);
      if (d2 <= eps2) return true;
    }
    return false;
  };
  // Depth-first over neighbour cells, pruned by the squared gap between the
  // candidate and each cell box.
  auto conflicts = [&](auto&& self, std::size_t axis, std::size_t key, double gap2) -> bool {
    if (axis == n) return conflicts_in(key);
    for (int step : {0, -1, 1}) {
      const std::int64_t c = home[axis] + step;
      if (c < 0 || c >= cells) continue;
      double g = 0.0;
      if (step == -1) g = within[axis];
      if (step == 1) g = epsilon - within[axis];
      const double total = gap2 + g * g;
      if (total > eps2) continue;
      if (self(self, axis + 1, key * static_cast<std::size_t>(cells) + static_cast<std::size_t>(c), total))
        return true;
    }
    return false;
  };

  std::size_t streak = 0;
  for (std::size_t k = 0; k < opt.max_candidates; ++k) {
    const std::size_t patience = std::max(opt.patience_min, opt.patience_per_point * net.size());
    if (streak >= patience) break;
    stream.next(cand);
    for (std::size_t j = 0; j < n; ++j) {
      const double shifted = cand[j] + 1.0;
      home[j] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(shifted / epsilon)), 0,
                                         cells - 1);
      within[j] = shifted - static_cast<double>(home[j]) * epsilon;
    }
    if (conflicts(conflicts, 0, 0, 0.0)) {
      ++streak;
      continue;
    }
    streak = 0;
    std::size_t key = 0;
    for (std::size_t j = 0; j < n; ++j)
      key = key * static_cast<std::size_t>(cells) + static_cast<std::size_t>(home[j]);
    next.push_back(head[key]);
    head[key] = static_cast<std::int32_t>(net.size());
    net.points.insert(net.points.end(), cand.begin(), cand.end());
    if (std::log(static_cast<double>(net.size())) > cap_log + 1e-12)
      throw Error("build_net: net size exceeds the (1 + 2/epsilon)^n volumetric bound");
  }
  return net;
}

/// max over net points y of |<(A A^T / N - I) y, y>|.
inline double net_sup_deviation(const SampleMatrix& a, const SphereNet& net) {
  if (net.n != a.rows()) throw ValidationError("net_sup_deviation: net dimension does not match n");
  const SymMatrix g = gram_covariance(a);
  double best = 0.0;
  for (std::size_t k = 0; k < net.size(); ++k) {
    const double q = g.quadratic_form(net.point(k));
    best = std::max(best, std::abs(q - 1.0));
  }
  return best;
}

}  // namespace covcon
