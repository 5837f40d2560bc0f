#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "covcon/error.hpp"
#include "covcon/linalg.hpp"
#include "covcon/quadrature.hpp"
#include "covcon/sampler.hpp"

namespace {

using namespace covcon;

const double kInf = std::numeric_limits<double>::infinity();

// E X_1^2 for the uniform unit l_p ball, from the marginal density
// proportional to (1 - |t|^p)^{(n-1)/p} on [-1, 1]. The substitution
// t = 1 - u^8 smooths the endpoint.
double lp_coordinate_variance(double p, std::size_t n) {
  const GaussLegendre gl(20);
  const double a = (static_cast<double>(n) - 1.0) / p;
  auto weight = [&](double u) {
    const double t = 1.0 - std::pow(u, 8);
    const double base = std::max(0.0, 1.0 - std::pow(t, p));
    return (n == 1 ? 1.0 : std::pow(base, a)) * 8.0 * std::pow(u, 7);
  };
  const double mass = gl.integrate(weight, 0.0, 1.0, 400);
  const double second = gl.integrate(
      [&](double u) {
        const double t = 1.0 - std::pow(u, 8);
        return t * t * weight(u);
      },
      0.0, 1.0, 400);
  return second / mass;
}

TEST(IsotropicScale, GaussianAndRademacherAreOne) {
  for (std::size_t n : {1u, 5u, 100u}) {
    EXPECT_EQ(isotropic_scale(FamilyKind::gaussian, n).factor, 1.0);
    EXPECT_EQ(isotropic_scale(FamilyKind::rademacher_control, n).factor, 1.0);
  }
}

TEST(IsotropicScale, BallMatchesRadialIntegral) {
  const GaussLegendre gl(20);
  for (std::size_t n : {1u, 2u, 3u, 10u, 64u}) {
    const double dn = static_cast<double>(n);
    // E|X|^2 for the uniform unit ball: integral of r^2 * n r^{n-1} on [0, 1].
    const double second = gl.integrate([&](double r) { return r * r * dn * std::pow(r, dn - 1.0); }, 0.0, 1.0, 64);
    const double expected = std::sqrt(dn / second);
    EXPECT_NEAR(isotropic_scale(FamilyKind::euclidean_ball, n).factor, expected, 1e-10 * expected) << n;
  }
}

TEST(IsotropicScale, LaplaceMatchesIntegral) {
  const GaussLegendre gl(20);
  // Variance of density (1/2) e^{-|t|}: 2 * integral_0^inf t^2 e^{-t}/2, truncated at 60.
  const double var = gl.integrate([](double t) { return t * t * std::exp(-t); }, 0.0, 60.0, 200);
  EXPECT_NEAR(isotropic_scale(FamilyKind::exponential_product, 3).factor, 1.0 / std::sqrt(var), 1e-12);
}

TEST(IsotropicScale, CubeIsSqrtThree) {
  const GaussLegendre gl(8);
  const double var = gl.integrate([](double t) { return t * t * 0.5; }, -1.0, 1.0, 1);
  EXPECT_NEAR(isotropic_scale(FamilyKind::lp_ball, 4, kInf).factor, 1.0 / std::sqrt(var), 1e-14);
}

TEST(IsotropicScale, LpBallMatchesMarginalQuadrature) {
  for (double p : {1.0, 1.5, 2.0, 3.0, 8.0})
    for (std::size_t n : {1u, 2u, 3u, 7u, 20u}) {
      const double expected = 1.0 / std::sqrt(lp_coordinate_variance(p, n));
      const double got = isotropic_scale(FamilyKind::lp_ball, n, p).factor;
      EXPECT_NEAR(got, expected, 1e-10 * expected) << "p=" << p << " n=" << n;
    }
}

TEST(IsotropicScale, LpTwoEqualsBall) {
  for (std::size_t n : {1u, 4u, 33u})
    EXPECT_NEAR(isotropic_scale(FamilyKind::lp_ball, n, 2.0).factor,
                isotropic_scale(FamilyKind::euclidean_ball, n).factor, 1e-12);
}

TEST(IsotropicScale, Errors) {
  EXPECT_THROW(isotropic_scale(FamilyKind::lp_ball, 3), ValidationError);
  EXPECT_THROW(isotropic_scale(FamilyKind::gaussian, 3, 2.0), ValidationError);
  EXPECT_THROW(isotropic_scale(FamilyKind::lp_ball, 3, 0.5), ValidationError);
  EXPECT_THROW(isotropic_scale(FamilyKind::gaussian, 0), ValidationError);
  try {
    isotropic_scale(FamilyKind::euclidean_ball, 3, 2.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("euclidean_ball"), std::string::npos);
  }
}

TEST(Family, ParseAndName) {
  EXPECT_EQ(parse_family("gaussian"), Family::gaussian());
  EXPECT_EQ(parse_family("lp_ball:1.5"), Family::lp_ball(1.5));
  EXPECT_EQ(parse_family("lp_ball", 3.0), Family::lp_ball(3.0));
  EXPECT_EQ(parse_family("lp_ball:inf"), Family::lp_ball(kInf));
  EXPECT_EQ(family_name(Family::lp_ball(kInf)), "lp_ball:inf");
  EXPECT_EQ(family_name(Family::exponential_product()), "exponential_product");
  EXPECT_THROW(parse_family("cauchy"), ValidationError);
  EXPECT_THROW(parse_family("lp_ball"), ValidationError);
  EXPECT_THROW(parse_family("gaussian:2"), ValidationError);
  EXPECT_FALSE(is_log_concave(FamilyKind::rademacher_control));
  EXPECT_TRUE(is_log_concave(FamilyKind::lp_ball));
}

TEST(SampleEnsemble, DeterministicSmallGaussian) {
  const EnsembleSpec spec{Family::gaussian(), 1, 3, 7};
  const auto a = sample_ensemble(spec);
  const auto b = sample_ensemble(spec);
  ASSERT_EQ(a.rows(), 1u);
  ASSERT_EQ(a.cols(), 3u);
  for (double v : a.entries()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_ensemble({Family::gaussian(), 1, 3, 8}));
}

TEST(SampleEnsemble, IndependentOfThreadCount) {
  for (const Family f : {Family::gaussian(), Family::euclidean_ball(), Family::lp_ball(1.5)}) {
    const EnsembleSpec spec{f, 5, 301, 11};
    SampleOptions one, many;
    many.threads = 7;
    EXPECT_EQ(sample_ensemble(spec, one), sample_ensemble(spec, many));
  }
}

TEST(SampleEnsemble, ColumnsArePrefixStable) {
  const auto small = sample_ensemble({Family::exponential_product(), 3, 10, 5});
  const auto large = sample_ensemble({Family::exponential_product(), 3, 40, 5});
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(small(r, i), large(r, i));
}

TEST(SampleEnsemble, BallSupportBound) {
  const auto a = sample_ensemble({Family::euclidean_ball(), 2, 100, 1});
  for (std::size_t i = 0; i < a.cols(); ++i) {
    const auto c = a.column(i);
    EXPECT_LE(std::sqrt(c[0] * c[0] + c[1] * c[1]), 2.0);
  }
  for (std::size_t n : {1u, 3u, 9u}) {
    const auto b = sample_ensemble({Family::euclidean_ball(), n, 10000, 2});
    const double r = std::sqrt(static_cast<double>(n) + 2.0);
    for (std::size_t i = 0; i < b.cols(); ++i) {
      double s = 0;
      for (double v : b.column(i)) s += v * v;
      ASSERT_LE(std::sqrt(s), r);
    }
  }
}

TEST(SampleEnsemble, LpBallConstraint) {
  for (double p : {1.0, 1.5, 4.0, kInf}) {
    const std::size_t n = 3;
    const auto a = sample_ensemble({Family::lp_ball(p), n, 2000, 9});
    const double f = isotropic_scale(FamilyKind::lp_ball, n, p).factor;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double norm = 0;
      for (double v : a.column(i)) norm = std::isinf(p) ? std::max(norm, std::abs(v)) : norm + std::pow(std::abs(v), p);
      if (!std::isinf(p)) norm = std::pow(norm, 1.0 / p);
      ASSERT_LE(norm, f * (1.0 + 1e-12)) << p;
    }
  }
}

TEST(SampleEnsemble, ExponentialVariance) {
  const std::size_t T = 100000;
  const auto a = sample_ensemble({Family::exponential_product(), 1, T, 3});
  double m2 = 0;
  for (double v : a.entries()) m2 += v * v;
  m2 /= static_cast<double>(T);
  // Var(X^2) = E X^4 - 1 = 5 for the unit-variance Laplace law; 5 standard errors.
  EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt(5.0 / static_cast<double>(T)));
}

TEST(SampleEnsemble, ResourceBudget) {
  SampleOptions opt;
  opt.max_entries = 1000;
  EXPECT_THROW(sample_ensemble({Family::gaussian(), 10, 101, 0}, opt), ResourceError);
  EXPECT_NO_THROW(sample_ensemble({Family::gaussian(), 10, 100, 0}, opt));
  EXPECT_THROW(sample_ensemble({Family::gaussian(), 0, 10, 0}), ValidationError);
}

// Empirical covariance of every family at T = 1e5, n = 4: diagonal within
// 5 SE of 1, off-diagonal within 5 SE of 0, means within 5 SE of 0.
TEST(SampleEnsemble, IsotropyAllFamilies) {
  const std::size_t n = 4, T = 100000;
  const std::vector<Family> families{Family::gaussian(),      Family::euclidean_ball(),
                                     Family::exponential_product(), Family::lp_ball(1.0),
                                     Family::lp_ball(1.5),    Family::lp_ball(3.0),
                                     Family::lp_ball(kInf),   Family::rademacher_control()};
  const double dT = static_cast<double>(T);
  for (const auto& f : families) {
    const auto a = sample_ensemble({f, n, T, 17});
    for (std::size_t j = 0; j < n; ++j) {
      double mean = 0;
      for (std::size_t i = 0; i < T; ++i) mean += a(j, i);
      mean /= dT;
      EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(dT)) << family_name(f);
      for (std::size_t k = j; k < n; ++k) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < T; ++i) {
          const double v = a(j, i) * a(k, i);
          s += v;
          s2 += v * v;
        }
        const double m = s / dT;
        const double se = std::sqrt(std::max(s2 / dT - m * m, 0.0) / dT);
        const double target = j == k ? 1.0 : 0.0;
        // Rademacher squares are identically 1 (se = 0).
        EXPECT_LE(std::abs(m - target), 5.0 * se + 1e-12) << family_name(f) << " " << j << "," << k;
      }
    }
  }
}

// Two-sample Kolmogorov-Smirnov on |X|: lp_ball p = 2 against the ball.
TEST(SampleEnsemble, LpTwoMatchesBallInLaw) {
  const std::size_t n = 5, T = 10000;
  auto norms = [&](const Family& f, std::uint64_t seed) {
    const auto a = sample_ensemble({f, n, T, seed});
    std::vector<double> out;
    for (std::size_t i = 0; i < T; ++i) {
      double s = 0;
      for (double v : a.column(i)) s += v * v;
      out.push_back(std::sqrt(s));
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto x = norms(Family::lp_ball(2.0), 21);
  const auto y = norms(Family::euclidean_ball(), 22);
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < T && j < T) {
    const double t = std::min(x[i], y[j]);
    while (i < T && x[i] <= t) ++i;
    while (j < T && y[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(T));
  }
  const double critical = 1.628 * std::sqrt(2.0 / static_cast<double>(T));
  EXPECT_LT(d, critical);
}

TEST(DirectionStatistics, GaussianVariance) {
  const std::vector<double> y{0.6, 0.0, -0.8};
  const auto s = sample_direction_statistics({Family::gaussian(), 3, 1, 4}, y, 100000);
  EXPECT_EQ(s.samples.size(), 100000u);
  EXPECT_GE(s.variance, 0.97);
  EXPECT_LE(s.variance, 1.03);
}

TEST(DirectionStatistics, BallBounded) {
  const std::vector<double> y{1.0, 0.0};
  const auto s = sample_direction_statistics({Family::euclidean_ball(), 2, 1, 5}, y, 100000);
  for (double v : s.samples) ASSERT_LE(std::abs(v), 2.0);
}

TEST(DirectionStatistics, LaplaceFourthMoment) {
  // Density (l/2) e^{-l|t|}, l = sqrt 2: E t^4 = 24 / l^4 = 6, by integration.
  const GaussLegendre gl(20);
  const double l = std::sqrt(2.0);
  const double m4 = gl.integrate([&](double t) { return std::pow(t, 4) * l * std::exp(-l * t); }, 0.0, 80.0, 400);
  EXPECT_NEAR(m4, 6.0, 1e-9);
  const std::vector<double> y{1.0};
  const std::size_t T = 200000;
  const auto s = sample_direction_statistics({Family::exponential_product(), 1, 1, 6}, y, T);
  // Var(t^4) = E t^8 - 36 = 8!/l^8 - 36 = 2484.
  EXPECT_NEAR(s.fourth_moment, m4, 5.0 * std::sqrt(2484.0 / static_cast<double>(T)));
}

TEST(DirectionStatistics, RejectsNonUnit) {
  const std::vector<double> y{1.0, 1e-5};
  EXPECT_THROW(sample_direction_statistics({Family::gaussian(), 2, 1, 0}, y, 10), ValidationError);
  const std::vector<double> z{1.0};
  EXPECT_THROW(sample_direction_statistics({Family::gaussian(), 2, 1, 0}, z, 10), ValidationError);
}

}  // namespace
