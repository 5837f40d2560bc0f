#pragma once

// Isotropic ensembles: every family is scaled so that E[X X^T] = I.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "covcon/error.hpp"
#include "covcon/parallel.hpp"
#include "covcon/rng.hpp"

namespace covcon {

/// Tag values are part of the binary matrix format.
enum class FamilyKind : std::uint32_t {
  gaussian = 0,
  euclidean_ball = 1,
  exponential_product = 2,
  lp_ball = 3,
  rademacher_control = 4,
};

/// Distribution family; `p` is meaningful only for lp_ball (+inf is the cube).
struct Family {
  FamilyKind kind = FamilyKind::gaussian;
  double p = 0.0;

  static Family gaussian() { return {FamilyKind::gaussian, 0.0}; }
  static Family euclidean_ball() { return {FamilyKind::euclidean_ball, 0.0}; }
  static Family exponential_product() { return {FamilyKind::exponential_product, 0.0}; }
  static Family lp_ball(double p) { return {FamilyKind::lp_ball, p}; }
  static Family rademacher_control() { return {FamilyKind::rademacher_control, 0.0}; }

  friend bool operator==(const Family& a, const Family& b) {
    return a.kind == b.kind && (a.kind != FamilyKind::lp_ball || a.p == b.p);
  }
};

inline std::string_view kind_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::euclidean_ball: return "euclidean_ball";
    case FamilyKind::exponential_product: return "exponential_product";
    case FamilyKind::lp_ball: return "lp_ball";
    case FamilyKind::rademacher_control: return "rademacher_control";
  }
  return "unknown";
}

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Canonical name, e.g. "gaussian" or "lp_ball:1.5" / "lp_ball:inf".
inline std::string family_name(const Family& f) {
  std::string name(kind_name(f.kind));
  if (f.kind == FamilyKind::lp_ball) name += ":" + format_real(f.p);
  return name;
}

inline FamilyKind parse_kind(std::string_view text) {
  for (auto k : {FamilyKind::gaussian, FamilyKind::euclidean_ball, FamilyKind::exponential_product,
                 FamilyKind::lp_ball, FamilyKind::rademacher_control})
    if (kind_name(k) == text) return k;
  throw ValidationError("unknown family '" + std::string(text) + "'");
}

inline double parse_p(std::string_view text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  const std::string s(text);
  char* end = nullptr;
  const double p = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ValidationError("invalid p value '" + s + "'");
  return p;
}

/// Accepts canonical names; `p` supplies the exponent when the name is a
/// bare "lp_ball".
inline Family parse_family(std::string_view text, std::optional<double> p = std::nullopt) {
  const auto colon = text.find(':');
  const FamilyKind kind = parse_kind(text.substr(0, colon));
  if (colon != std::string_view::npos) {
    if (kind != FamilyKind::lp_ball || p)
      throw ValidationError("family '" + std::string(text) + "' does not take a p suffix here");
    p = parse_p(text.substr(colon + 1));
  }
  if (kind == FamilyKind::lp_ball) {
    if (!p) throw ValidationError("family lp_ball requires p");
    return Family::lp_ball(*p);
  }
  if (p) throw ValidationError("family " + std::string(kind_name(kind)) + " does not take p");
  return {kind, 0.0};
}

/// Every family but the Rademacher control is log-concave.
inline bool is_log_concave(FamilyKind kind) { return kind != FamilyKind::rademacher_control; }

struct IsotropicScale {
  FamilyKind family;
  std::size_t n;
  double factor;
};

/// Multiplier that makes the canonical sample of `family` isotropic.
/// Canonical samples: standard normal, uniform unit ball, Laplace with
/// unit rate, uniform unit l_p ball, +-1 signs.
inline IsotropicScale isotropic_scale(FamilyKind family, std::size_t n,
                                      std::optional<double> p = std::nullopt) {
  if (n == 0) throw ValidationError("isotropic_scale: n must be positive");
  if (p.has_value() != (family == FamilyKind::lp_ball))
    throw ValidationError("isotropic_scale: family " + std::string(kind_name(family)) +
                          (p ? " does not take p" : " requires p"));
  const double dn = static_cast<double>(n);
  switch (family) {
    case FamilyKind::gaussian:
    case FamilyKind::rademacher_control:
      return {family, n, 1.0};
    case FamilyKind::euclidean_ball:
      // Uniform on the unit ball has E|X|^2 = n/(n+2).
      return {family, n, std::sqrt(dn + 2.0)};
    case FamilyKind::exponential_product:
      // Density (1/2)e^{-|t|} has variance 2.
      return {family, n, 1.0 / std::sqrt(2.0)};
    case FamilyKind::lp_ball: {
      const double q = *p;
      if (!(q >= 1.0))
        throw ValidationError("isotropic_scale: family lp_ball needs p >= 1, got " + format_real(q));
      if (std::isinf(q)) return {family, n, std::sqrt(3.0)};
      // E X_1^2 for the uniform unit l_p ball:
      //   Gamma(3/p) Gamma(1 + n/p) / (Gamma(1/p) Gamma(1 + (n+2)/p)).
      const double log_var = std::lgamma(3.0 / q) - std::lgamma(1.0 / q) +
                             std::lgamma(1.0 + dn / q) - std::lgamma(1.0 + (dn + 2.0) / q);
      return {family, n, std::exp(-0.5 * log_var)};
    }
  }
  throw ValidationError("isotropic_scale: unsupported family");
}

struct EnsembleSpec {
  Family family;
  std::size_t n = 1;
  std::size_t N = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || N < 1) throw ValidationError("ensemble dimensions must be positive");
    if (family.kind == FamilyKind::lp_ball && !(family.p >= 1.0))
      throw ValidationError("lp_ball requires p >= 1 (convex ball), got " + format_real(family.p));
  }

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

inline IsotropicScale isotropic_scale(const Family& family, std::size_t n) {
  return family.kind == FamilyKind::lp_ball ? isotropic_scale(family.kind, n, family.p)
                                            : isotropic_scale(family.kind, n);
}

/// Non-owning column-major view; column j occupies data[j*rows, (j+1)*rows).
struct MatrixView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[c * rows + r]; }
  std::span<const double> column(std::size_t c) const { return data.subspan(c * rows, rows); }
};

/// n x N matrix whose columns are the sampled vectors. Stored column-major,
/// which is also the on-disk order.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  SampleMatrix(EnsembleSpec spec, std::vector<double> entries)
      : spec_(spec), entries_(std::move(entries)) {
    if (entries_.size() != spec_.n * spec_.N)
      throw ValidationError("SampleMatrix: entry count does not match n*N");
    for (double v : entries_)
      if (!std::isfinite(v)) throw ValidationError("SampleMatrix: non-finite entry");
  }

  std::size_t rows() const { return spec_.n; }
  std::size_t cols() const { return spec_.N; }
  const EnsembleSpec& spec() const { return spec_; }
  std::span<const double> entries() const { return entries_; }
  std::span<const double> column(std::size_t i) const {
    return std::span<const double>(entries_).subspan(i * rows(), rows());
  }
  double operator()(std::size_t r, std::size_t c) const { return entries_[c * rows() + r]; }
  MatrixView view() const { return {rows(), cols(), entries_}; }

  /// Same spec, entries multiplied by `a`.
  SampleMatrix scaled(double a) const {
    std::vector<double> e(entries_);
    for (auto& v : e) v *= a;
    return {spec_, std::move(e)};
  }

  friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

 private:
  EnsembleSpec spec_;
  std::vector<double> entries_;
};

/// Draws column i of an ensemble from its own substream, so any column can
/// be produced independently of the others.
class ColumnSampler {
 public:
  explicit ColumnSampler(const EnsembleSpec& spec)
      : spec_(spec), factor_((spec.validate(), isotropic_scale(spec.family, spec.n).factor)) {}

  double factor() const { return factor_; }

  std::uint64_t column_seed(std::size_t column) const {
    return derive_seed(spec_.seed, 0x436F6C756D6E5Aull, column);
  }

  void fill(std::size_t column, std::span<double> out) const {
    RandomStream rng(column_seed(column));
    const std::size_t n = spec_.n;
    switch (spec_.family.kind) {
      case FamilyKind::gaussian:
        for (auto& v : out) v = rng.normal();
        break;
      case FamilyKind::rademacher_control:
        for (auto& v : out) v = rng.sign();
        break;
      case FamilyKind::exponential_product:
        for (auto& v : out) v = rng.sign() * rng.exponential() * factor_;
        break;
      case FamilyKind::euclidean_ball: {
        double norm2 = 0.0;
        for (auto& v : out) {
          v = rng.normal();
          norm2 += v * v;
        }
        const double radius = factor_ * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
        const double scale = radius / std::sqrt(norm2);
        for (auto& v : out) v *= scale;
        clamp_to_radius(out, factor_);
        break;
      }
      case FamilyKind::lp_ball:
        fill_lp(rng, out);
        break;
    }
  }

 private:
  // Rounding in the radial step can push |x| a few ulps past the radius.
  static void clamp_to_radius(std::span<double> x, double radius) {
    for (;;) {
      double norm2 = 0.0;
      for (double v : x) norm2 += v * v;
      if (std::sqrt(norm2) <= radius) return;
      for (auto& v : x) v *= (1.0 - 0x1.0p-52);
    }
  }

  // Uniform on the unit l_p ball: Y_j with density ~ exp(-|t|^p), E ~ Exp(1),
  // X = Y / (sum |Y_j|^p + E)^{1/p}. With G_j = |Y_j|^p ~ Gamma(1/p) this is
  // |X_j| = (G_j / (sum G + E))^{1/p}.
  void fill_lp(RandomStream& rng, std::span<double> out) const {
    const double p = spec_.family.p;
    if (std::isinf(p)) {
      for (auto& v : out) v = (2.0 * rng.uniform() - 1.0) * factor_;
      return;
    }
    const double shape = 1.0 / p;
    double total = 0.0;
    for (auto& v : out) {
      v = rng.log_gamma_variate(shape);  // log G_j
      total += std::exp(v);
    }
    total += rng.exponential();
    const double log_total = std::log(total);
    for (auto& v : out) v = rng.sign() * std::exp((v - log_total) / p) * factor_;
  }

  EnsembleSpec spec_;
  double factor_;
};

struct SampleOptions {
  /// Upper bound on n*N doubles held by a SampleMatrix (default 1 GiB).
  std::size_t max_entries = std::size_t{1} << 27;
  std::size_t threads = 1;
};

/// n x N matrix with i.i.d. isotropic columns. Output depends only on
/// `spec`, not on the worker count.
inline SampleMatrix sample_ensemble(const EnsembleSpec& spec, const SampleOptions& options = {}) {
  spec.validate();
  if (spec.N > options.max_entries / spec.n)
    throw ResourceError("sample_ensemble: n*N = " + std::to_string(spec.n) + "*" +
                        std::to_string(spec.N) + " exceeds the memory budget of " +
                        std::to_string(options.max_entries) + " entries");
  const ColumnSampler sampler(spec);
  std::vector<double> entries(spec.n * spec.N);
  std::span<double> all(entries);
  parallel_for(spec.N, options.threads,
               [&](std::size_t i) { sampler.fill(i, all.subspan(i * spec.n, spec.n)); });
  return {spec, std::move(entries)};
}

struct DirectionStatistics {
  double mean = 0.0;
  double variance = 0.0;
  double fourth_moment = 0.0;
  std::vector<double> samples;
};

/// Moments of <X, direction> over T fresh vectors drawn from `spec`
/// (spec.N is ignored; column streams 0..T-1 are used).
inline DirectionStatistics sample_direction_statistics(const EnsembleSpec& spec,
                                                       std::span<const double> direction,
                                                       std::size_t trials) {
  spec.validate();
  if (direction.size() != spec.n)
    throw ValidationError("sample_direction_statistics: direction has wrong dimension");
  double norm2 = 0.0;
  for (double v : direction) norm2 += v * v;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-12)
    throw ValidationError("sample_direction_statistics: direction is not a unit vector");
  if (trials == 0) throw ValidationError("sample_direction_statistics: need at least one trial");

  const ColumnSampler sampler(spec);
  DirectionStatistics out;
  out.samples.resize(trials);
  std::vector<double> x(spec.n);
  for (std::size_t t = 0; t < trials; ++t) {
    sampler.fill(t, x);
    double dot = 0.0;
    for (std::size_t j = 0; j < spec.n; ++j) dot += x[j] * direction[j];
    out.samples[t] = dot;
  }
  const double T = static_cast<double>(trials);
  for (double y : out.samples) out.mean += y;
  out.mean /= T;
  for (double y : out.samples) {
    const double d = y - out.mean;
    out.variance += d * d;
    out.fourth_moment += y * y * y * y;
  }
  out.variance /= T;
  out.fourth_moment /= T;
  return out;
}

}  // namespace covcon
