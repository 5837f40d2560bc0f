#pragma once

// Dense symmetric spectral kernels on desk-scale matrices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "covcon/error.hpp"
#include "covcon/sampler.hpp"

namespace covcon {

/// Symmetric matrix holding only the upper triangle, packed by column:
/// (i, j) with i <= j lives at j*(j+1)/2 + i.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : dim_(dim), packed_(dim * (dim + 1) / 2, 0.0) {}

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
  }

  std::size_t dim() const { return dim_; }
  std::span<const double> packed() const { return packed_; }

  double operator()(std::size_t i, std::size_t j) const { return packed_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, double v) { packed_[index(i, j)] = v; }

  double frobenius_norm() const {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j)
      for (std::size_t i = 0; i <= j; ++i) {
        const double v = packed_[index(i, j)];
        s += (i == j ? 1.0 : 2.0) * v * v;
      }
    return std::sqrt(s);
  }

  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += (*this)(i, i);
    return s;
  }

  /// y^T M y.
  double quadratic_form(std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      s += packed_[index(j, j)] * y[j] * y[j];
      for (std::size_t i = 0; i < j; ++i) s += 2.0 * packed_[index(i, j)] * y[i] * y[j];
    }
    return s;
  }

  /// Dense row-major copy.
  std::vector<double> dense() const {
    std::vector<double> d(dim_ * dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) d[i * dim_ + j] = (*this)(i, j);
    return d;
  }

 private:
  static std::size_t index(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return j * (j + 1) / 2 + i;
  }

  std::size_t dim_ = 0;
  std::vector<double> packed_;
};

/// Column-major square matrix; column k is the eigenvector of eigenvalues[k].
struct Basis {
  std::size_t dim = 0;
  std::vector<double> data;
  double operator()(std::size_t r, std::size_t c) const { return data[c * dim + r]; }
  std::span<const double> column(std::size_t c) const {
    return std::span<const double>(data).subspan(c * dim, dim);
  }
};

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  Basis basis;                      // empty when vectors were not requested
  double residual = 0.0;            // ||V L V^T - M||_F, or off-diagonal mass without vectors
  int sweeps = 0;

  double min() const { return eigenvalues.front(); }
  double max() const { return eigenvalues.back(); }
};

struct JacobiOptions {
  double tolerance = 1e-14;  // off-diagonal Frobenius mass relative to ||M||_F
  int max_sweeps = 50;
  bool vectors = true;
};

namespace detail {

inline double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double s = 0.0;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
  return std::sqrt(2.0 * s);
}

inline double reconstruction_residual(const SymMatrix& m, const std::vector<double>& values,
                                      const Basis& v) {
  const std::size_t n = m.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double r = 0.0;
      for (std::size_t k = 0; k < n; ++k) r += v(i, k) * values[k] * v(j, k);
      const double d = r - m(i, j);
      s += d * d;
    }
  return std::sqrt(s);
}

}  // namespace detail

/// Full eigendecomposition by cyclic Jacobi rotations.
inline Spectrum sym_eigen(const SymMatrix& m, const JacobiOptions& options = {}) {
  const std::size_t n = m.dim();
  if (n == 0) throw ValidationError("sym_eigen: empty matrix");
  for (double v : m.packed())
    if (!std::isfinite(v))
      throw NumericalError("sym_eigen: non-finite entry", std::numeric_limits<double>::infinity());

  std::vector<double> a = m.dense();
  std::vector<double> v;
  if (options.vectors) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  }
  const double scale = m.frobenius_norm();
  const double target = options.tolerance * scale;

  Spectrum out;
  bool converged = false;
  for (int sweep = 0; sweep <= options.max_sweeps; ++sweep) {
    if (detail::off_diagonal_norm(a, n) <= target) {
      converged = true;
      out.sweeps = sweep;
      break;
    }
    if (sweep == options.max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150)
          t = 0.5 / theta;
        else
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          const double new_kp = c * akp - s * akq;
          const double new_kq = s * akp + c * akq;
          a[k * n + p] = a[p * n + k] = new_kp;
          a[k * n + q] = a[q * n + k] = new_kq;
        }
        a[p * n + p] -= t * apq;
        a[q * n + q] += t * apq;
        a[p * n + q] = a[q * n + p] = 0.0;
        if (options.vectors) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v[k * n + p];
            const double vkq = v[k * n + q];
            v[k * n + p] = c * vkp - s * vkq;
            v[k * n + q] = s * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });
  out.eigenvalues.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.eigenvalues[k] = a[order[k] * n + order[k]];
  if (options.vectors) {
    out.basis.dim = n;
    out.basis.data.resize(n * n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t r = 0; r < n; ++r) out.basis.data[k * n + r] = v[r * n + order[k]];
    out.residual = detail::reconstruction_residual(m, out.eigenvalues, out.basis);
  } else {
    out.residual = detail::off_diagonal_norm(a, n);
  }
  if (!converged)
    throw NumericalError("sym_eigen: Jacobi did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps (residual " +
                             format_real(out.residual) + ")",
                         out.residual);
  return out;
}

/// scale * A A^T (rows x rows).
inline SymMatrix row_gram(const MatrixView& a, double scale = 1.0) {
  const std::size_t n = a.rows;
  std::vector<double> acc(n * n, 0.0);
  for (std::size_t c = 0; c < a.cols; ++c) {
    const auto x = a.column(c);
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = x[j];
      double* row = acc.data() + j * n;
      for (std::size_t i = 0; i <= j; ++i) row[i] += x[i] * xj;
    }
  }
  SymMatrix g(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) g.set(i, j, acc[j * n + i] * scale);
  return g;
}

/// scale * A^T A (cols x cols).
inline SymMatrix column_gram(const MatrixView& a, double scale = 1.0) {
  SymMatrix g(a.cols);
  for (std::size_t j = 0; j < a.cols; ++j) {
    const auto xj = a.column(j);
    for (std::size_t i = 0; i <= j; ++i) {
      const auto xi = a.column(i);
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows; ++r) s += xi[r] * xj[r];
      g.set(i, j, s * scale);
    }
  }
  return g;
}

/// Empirical covariance A A^T / N.
inline SymMatrix gram_covariance(const SampleMatrix& a) {
  return row_gram(a.view(), 1.0 / static_cast<double>(a.cols()));
}

/// Largest eigenvalue of A A^T, computed on the smaller of the two Grams.
inline double top_gram_eigenvalue(const MatrixView& a) {
  const SymMatrix g = a.rows <= a.cols ? row_gram(a) : column_gram(a);
  JacobiOptions opts;
  opts.vectors = false;
  return std::max(0.0, sym_eigen(g, opts).max());
}

inline double top_singular_value(const MatrixView& a) { return std::sqrt(top_gram_eigenvalue(a)); }

/// Spectral norm ||A||.
inline double matrix_norm(const SampleMatrix& a) { return top_singular_value(a.view()); }

inline double max_column_norm(const MatrixView& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) {
    double s = 0.0;
    for (double v : a.column(c)) s += v * v;
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

/// max_i |X_i| / sqrt(n), relative to the threshold scale max{1, (N/n)^{1/4}}.
inline double boundedness_ratio(double max_col_norm, std::size_t n, std::size_t N) {
  const double dn = static_cast<double>(n);
  const double level = std::max(1.0, std::pow(static_cast<double>(N) / dn, 0.25));
  return max_col_norm / std::sqrt(dn) / level;
}

struct DeviationReport {
  std::size_t n = 0;
  std::size_t N = 0;
  double lambda_min = 0.0;  // eigenvalues of A A^T (unnormalized)
  double lambda_max = 0.0;
  double deviation = 0.0;   // ||A A^T / N - I||
  double max_col_norm = 0.0;
  double boundedness_ratio = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const DeviationReport&, const DeviationReport&) = default;
};

/// One spectral evaluation of sup_x |(1/N) sum <X_i,x>^2 - 1|. For N < n the
/// N x N Gram is diagonalized and lambda_min(A A^T) = 0 by rank deficiency.
inline DeviationReport operator_deviation(const SampleMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t N = a.cols();
  const double inv_N = 1.0 / static_cast<double>(N);
  JacobiOptions opts;
  opts.vectors = false;

  DeviationReport r;
  r.n = n;
  r.N = N;
  r.seed = a.spec().seed;
  double mu_min, mu_max;
  if (n <= N) {
    const Spectrum s = sym_eigen(gram_covariance(a), opts);
    mu_min = std::max(0.0, s.min());
    mu_max = std::max(0.0, s.max());
  } else {
    const Spectrum s = sym_eigen(column_gram(a.view(), inv_N), opts);
    mu_min = 0.0;
    mu_max = std::max(0.0, s.max());
  }
  r.lambda_min = mu_min * static_cast<double>(N);
  r.lambda_max = mu_max * static_cast<double>(N);
  r.deviation = std::max(std::abs(mu_max - 1.0), std::abs(mu_min - 1.0));
  r.max_col_norm = max_column_norm(a.view());
  r.boundedness_ratio = boundedness_ratio(r.max_col_norm, n, N);
  return r;
}

}  // namespace covcon
