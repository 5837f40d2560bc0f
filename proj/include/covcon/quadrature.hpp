#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

namespace covcon {

/// Gauss-Legendre rule on [-1, 1] (nodes by Newton iteration on P_order).
class GaussLegendre {
 public:
  explicit GaussLegendre(std::size_t order = 16) : nodes_(order), weights_(order) {
    const double n = static_cast<double>(order);
    for (std::size_t i = 0; i < order; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= order; ++k) {
          const double dk = static_cast<double>(k);
          const double p2 = ((2.0 * dk - 1.0) * x * p1 - (dk - 1.0) * p0) / dk;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes_[i] = x;
      weights_[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  /// Composite rule: `panels` equal sub-intervals of [a, b].
  template <typename F>
  double integrate(F&& f, double a, double b, std::size_t panels = 64) const {
    const double h = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
      const double mid = a + (static_cast<double>(p) + 0.5) * h;
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(mid + 0.5 * h * nodes_[i]);
      total += 0.5 * h * s;
    }
    return total;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

inline double normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

/// P(g > t) for standard normal g.
inline double normal_upper_tail(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

}  // namespace covcon
