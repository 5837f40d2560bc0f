#pragma once

// Closed-form envelopes from the deviation theorem and its proof. The
// absolute constants are never hard-coded: they live in BoundConfig.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "covcon/error.hpp"

namespace covcon {

struct BoundConfig {
  double psi = 1.0;      // uniform psi_1 constant of the linear forms
  double K = 1.0;        // boundedness constant
  double C_main = 1.0;   // deviation bound constant
  double c_prob = 1.0;   // exponent constant of the failure probability
  double C1 = 1.0;       // fourth-moment constant: E<X,x>^4 <= C1 psi^4
  double C2 = 1.0;       // expected-excess constant
  double C3 = 1.0;       // theta = C3 psi^2 sqrt(n/N)
  double C_old = 1.0;    // sparse-norm envelope constant, also used in the choice of B
  double t = 1.0;        // sparse-norm envelope parameter
  double C_remark = 1.0; // constant of the N < n regime bounds

  /// Throws ValidationError naming the first offending field.
  void validate() const {
    auto positive = [](const char* name, double v) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(std::string("bound constant ") + name + " must be positive and finite");
    };
    if (!(psi >= 0.0) || !std::isfinite(psi)) throw ValidationError("bound constant psi must be >= 0");
    if (!(K >= 1.0) || !std::isfinite(K)) throw ValidationError("bound constant K must be >= 1");
    if (!(t >= 1.0) || !std::isfinite(t)) throw ValidationError("bound constant t must be >= 1");
    positive("C_main", C_main);
    positive("c_prob", c_prob);
    positive("C1", C1);
    positive("C2", C2);
    positive("C3", C3);
    positive("C_old", C_old);
    positive("C_remark", C_remark);
    if (C_old < C2) throw ValidationError("bound constant C_old must be >= C2");
  }

  friend bool operator==(const BoundConfig&, const BoundConfig&) = default;
};

inline double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

/// Raw 2 exp(-c sqrt(n)); callers clamp at the reporting layer.
inline double failure_budget_raw(const BoundConfig& cfg, std::size_t n) {
  return 2.0 * std::exp(-cfg.c_prob * std::sqrt(static_cast<double>(n)));
}

inline double theorem1_rhs(const BoundConfig& cfg, std::size_t n, std::size_t N) {
  if (n < 1 || n > N)
    throw DomainError("theorem1_rhs requires 1 <= n <= N (got n=" + std::to_string(n) +
                      ", N=" + std::to_string(N) + "); use remark2_bounds for N < n");
  const double s = cfg.psi + cfg.K;
  return cfg.C_main * s * s * std::sqrt(static_cast<double>(n) / static_cast<double>(N));
}

/// (1 - rhs, 1 + rhs), unclamped.
inline std::pair<double, double> corollary_interval(const BoundConfig& cfg, std::size_t n,
                                                    std::size_t N) {
  const double r = theorem1_rhs(cfg, n, N);
  return {1.0 - r, 1.0 + r};
}

/// C_old psi t max{sqrt(m) ln(2N/m), sqrt(n)} + 6 max_i |X_i|.
inline double thmold_bound(const BoundConfig& cfg, std::size_t m, std::size_t n, std::size_t N,
                           double max_col_norm) {
  if (m < 1 || m > N) throw DomainError("thmold_bound requires 1 <= m <= N");
  const double dm = static_cast<double>(m);
  const double sparse_term = std::sqrt(dm) * std::log(2.0 * static_cast<double>(N) / dm);
  const double scale = std::max(sparse_term, std::sqrt(static_cast<double>(n)));
  return cfg.C_old * cfg.psi * cfg.t * scale + 6.0 * max_col_norm;
}

/// exp(-theta^2 N / (2 (C1 psi^4 + B^2 theta / 3))).
inline double bernstein_tail(double theta, std::size_t N, const BoundConfig& cfg, double B) {
  if (!(theta > 0.0)) throw DomainError("bernstein_tail requires theta > 0");
  if (!(B >= 0.0)) throw DomainError("bernstein_tail requires B >= 0");
  const double psi4 = std::pow(cfg.psi, 4);
  const double denom = 2.0 * (cfg.C1 * psi4 + B * B * theta / 3.0);
  return std::exp(-theta * theta * static_cast<double>(N) / denom);
}

struct Cond3 {
  bool variance_term = false;  // theta^2 N > 8 C1 psi^4 n ln 7
  bool range_term = false;     // theta N > (8/3) B^2 n ln 7
  bool both() const { return variance_term && range_term; }
};

inline Cond3 cond3_holds(double theta, std::size_t N, double B, const BoundConfig& cfg,
                         std::size_t n) {
  const double dn = static_cast<double>(n);
  const double dN = static_cast<double>(N);
  const double ln7 = std::log(7.0);
  Cond3 c;
  c.variance_term = theta * theta * dN > 8.0 * cfg.C1 * std::pow(cfg.psi, 4) * dn * ln7;
  c.range_term = theta * dN > (8.0 / 3.0) * B * B * dn * ln7;
  return c;
}

/// 2 sqrt(2 C_old) psi ln(5N/n).
inline double choose_B(const BoundConfig& cfg, std::size_t n, std::size_t N) {
  if (n < 1 || n > 5 * N)
    throw DomainError("choose_B requires 1 <= n <= 5N so that ln(5N/n) >= 0");
  return 2.0 * std::sqrt(2.0 * cfg.C_old) * cfg.psi *
         std::log(5.0 * static_cast<double>(N) / static_cast<double>(n));
}

/// C3 psi^2 sqrt(n/N).
inline double choose_theta(const BoundConfig& cfg, std::size_t n, std::size_t N) {
  return cfg.C3 * cfg.psi * cfg.psi * std::sqrt(static_cast<double>(n) / static_cast<double>(N));
}

/// C2 psi^2 exp(-B/psi).
inline double s3_envelope(const BoundConfig& cfg, double B) {
  if (cfg.psi == 0.0) return 0.0;
  return cfg.C2 * cfg.psi * cfg.psi * std::exp(-B / cfg.psi);
}

struct Remark2Bounds {
  double norm_bound = 0.0;  // C (psi + K) sqrt(n)
  double dev_bound = 0.0;   // C (psi + K)^2 n / N
  bool in_regime = false;   // N < n
};

inline Remark2Bounds remark2_bounds(const BoundConfig& cfg, std::size_t n, std::size_t N) {
  if (n < 1 || N < 1) throw DomainError("remark2_bounds requires positive dimensions");
  const double s = cfg.psi + cfg.K;
  const double dn = static_cast<double>(n);
  return {cfg.C_remark * s * std::sqrt(dn), cfg.C_remark * s * s * dn / static_cast<double>(N),
          N < n};
}

/// ln of the (1/3)-net cardinality bound 7^n.
inline double net_cardinality_log(std::size_t n) { return static_cast<double>(n) * std::log(7.0); }

enum class BoundName {
  theorem1_rhs,
  corollary_lower,
  corollary_upper,
  thmold_bound,
  bernstein_tail,
  choose_B,
  choose_theta,
  s3_envelope,
  remark2_norm,
  remark2_deviation,
  net_cardinality_log,
};

inline std::string bound_name(BoundName b) {
  switch (b) {
    case BoundName::theorem1_rhs: return "theorem1_rhs";
    case BoundName::corollary_lower: return "corollary_lower";
    case BoundName::corollary_upper: return "corollary_upper";
    case BoundName::thmold_bound: return "thmold_bound";
    case BoundName::bernstein_tail: return "bernstein_tail";
    case BoundName::choose_B: return "choose_B";
    case BoundName::choose_theta: return "choose_theta";
    case BoundName::s3_envelope: return "s3_envelope";
    case BoundName::remark2_norm: return "remark2_norm";
    case BoundName::remark2_deviation: return "remark2_deviation";
    case BoundName::net_cardinality_log: return "net_cardinality_log";
  }
  return "unknown";
}

/// One evaluated bound. `value` is the raw formula value; only
/// `probability_budget` is clamped to [0, 1].
struct BoundReport {
  BoundName name;
  std::map<std::string, double> inputs;
  double value = 0.0;
  double probability_budget = 0.0;
};

/// Everything evaluable from (cfg, n, N); thmold and Bernstein entries use
/// the proof's parameter choices m = 1, B = choose_B, theta = choose_theta.
inline std::vector<BoundReport> evaluate_bounds(const BoundConfig& cfg, std::size_t n, std::size_t N,
                                                double max_col_norm = 0.0) {
  const double dn = static_cast<double>(n);
  const double dN = static_cast<double>(N);
  const double budget = clamp_probability(failure_budget_raw(cfg, n));
  std::vector<BoundReport> out;
  const std::map<std::string, double> base{{"n", dn}, {"N", dN}};
  if (n <= N) {
    const auto [lo, hi] = corollary_interval(cfg, n, N);
    out.push_back({BoundName::theorem1_rhs, base, theorem1_rhs(cfg, n, N), budget});
    out.push_back({BoundName::corollary_lower, base, lo, budget});
    out.push_back({BoundName::corollary_upper, base, hi, budget});
  } else {
    const auto r2 = remark2_bounds(cfg, n, N);
    out.push_back({BoundName::remark2_norm, base, r2.norm_bound, budget});
    out.push_back({BoundName::remark2_deviation, base, r2.dev_bound, budget});
  }
  auto with = [&](std::map<std::string, double> extra) {
    extra.insert(base.begin(), base.end());
    return extra;
  };
  out.push_back({BoundName::thmold_bound, with({{"m", 1.0}, {"max_col_norm", max_col_norm}}),
                 thmold_bound(cfg, 1, n, N, max_col_norm),
                 clamp_probability(std::exp(-cfg.t * std::sqrt(dn)))});
  if (n <= 5 * N) {
    const double B = choose_B(cfg, n, N);
    const double theta = choose_theta(cfg, n, N);
    out.push_back({BoundName::choose_B, base, B, 0.0});
    out.push_back({BoundName::choose_theta, base, theta, 0.0});
    out.push_back({BoundName::s3_envelope, with({{"B", B}}), s3_envelope(cfg, B), 0.0});
    if (theta > 0.0) {
      const double tail = bernstein_tail(theta, N, cfg, B);
      out.push_back({BoundName::bernstein_tail, with({{"B", B}, {"theta", theta}}), tail,
                     clamp_probability(tail)});
    }
  }
  out.push_back({BoundName::net_cardinality_log, {{"n", dn}}, net_cardinality_log(n), 0.0});
  return out;
}

}  // namespace covcon
