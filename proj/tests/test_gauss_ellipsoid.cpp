#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shiftguard/chi_square.hpp"
#include "shiftguard/ellipsoid.hpp"
#include "shiftguard/errors.hpp"
#include "shiftguard/gaussian.hpp"

using namespace shiftguard;

namespace {

// Independent oracle: chi-square CDF by composite-Simpson integration of the
// density with the substitution x = u^2 (regularizes the n=1 endpoint).
double chi2_cdf_by_integration(double x, int n) {
  if (x <= 0.0) return 0.0;
  auto integrand = [n](double u) {
    // 2u * pdf(u^2) = 2 u^{n-1} e^{-u^2/2} / (2^{n/2} Gamma(n/2))
    if (u == 0.0) return n == 1 ? std::sqrt(2.0 / std::numbers::pi) : 0.0;
    double half_n = 0.5 * n;
    double log_val = (n - 1) * std::log(u) - 0.5 * u * u - half_n * std::log(2.0) -
                     std::lgamma(half_n) + std::log(2.0);
    return std::exp(log_val);
  };
  double b = std::sqrt(x);
  const int segments = 20000;  // even
  double h = b / segments;
  double sum = integrand(0.0) + integrand(b);
  for (int i = 1; i < segments; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
  return sum * h / 3.0;
}

double chi2_quantile_by_integration(double p, int n) {
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf_by_integration(hi, n) < p) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi2_cdf_by_integration(mid, n) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("chi-square quantile matches the integration oracle") {
  // frozen from the oracle above
  CHECK(chi_square_quantile(0.95, 2) == doctest::Approx(5.991464547).epsilon(1e-8));
  CHECK(chi_square_quantile(0.95, 3) == doctest::Approx(7.814727903).epsilon(1e-8));
  CHECK(chi2_quantile_by_integration(0.95, 2) == doctest::Approx(5.991464547).epsilon(1e-7));

  for (int n : {1, 2, 3, 5, 10}) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      double q = chi_square_quantile(p, n);
      double q_oracle = chi2_quantile_by_integration(p, n);
      CHECK(std::fabs(q - q_oracle) < 1e-6);
    }
  }
}

TEST_CASE("chi-square quantile inverts the CDF") {
  for (int n = 1; n <= 10; ++n) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      double q = chi_square_quantile(p, n);
      CHECK(std::fabs(chi_square_cdf(q, n) - p) < 1e-9);
    }
  }
}

TEST_CASE("chi-square quantile limits and domain errors") {
  CHECK(chi_square_quantile(1e-12, 2) < 1e-10);  // p -> 0+ gives 0
  CHECK_THROWS_AS(chi_square_quantile(0.0, 2), DomainError);
  CHECK_THROWS_AS(chi_square_quantile(1.0, 2), DomainError);
  CHECK_THROWS_AS(chi_square_quantile(0.5, 0), DomainError);
}

TEST_CASE("confidence ellipsoid scales the covariance by the quantile") {
  Gaussian g(Vec::Zero(2), Mat::Identity(2, 2));
  Ellipsoid e = confidence_ellipsoid(g, 0.95);
  CHECK(e.shape()(0, 0) == doctest::Approx(5.991464547).epsilon(1e-8));
  CHECK(e.shape()(1, 0) == 0.0);

  // degenerate confidence: shape goes to zero as p -> 0+
  Ellipsoid tiny = confidence_ellipsoid(g, 1e-9);
  CHECK(tiny.shape()(0, 0) < 1e-6);

  Mat singular = Mat::Zero(2, 2);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(confidence_ellipsoid(Gaussian(Vec::Zero(2), singular), 0.95),
                  IllConditionedError);
}

TEST_CASE("empirical coverage of the 95% ellipsoid") {
  Gaussian g(Vec::Zero(2), Mat::Identity(2, 2));
  Ellipsoid e = confidence_ellipsoid(g, 0.95);
  Rng rng(1234);
  int inside = 0;
  const int samples = 100000;
  for (int i = 0; i < samples; ++i)
    if (e.contains(g.sample(rng))) ++inside;
  double fraction = static_cast<double>(inside) / samples;
  CHECK(fraction > 0.945);
  CHECK(fraction < 0.955);
}

TEST_CASE("contains") {
  Ellipsoid unit(Vec::Zero(2), Mat::Identity(2, 2));
  CHECK(unit.contains(Vec::Zero(2)));
  Vec just_outside(2);
  just_outside << 1.001, 0.0;
  CHECK_FALSE(unit.contains(just_outside, 0.0));

  Vec c(2);
  c << -3.0, 7.5;
  Ellipsoid ball2(c, 4.0 * Mat::Identity(2, 2));
  Vec boundary = c;
  boundary[0] += 2.0;
  CHECK(ball2.contains(boundary, 1e-9));

  CHECK_THROWS_AS(unit.contains(Vec::Zero(3)), DimensionError);
}

TEST_CASE("contains is translation invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Mat a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
    Mat shape = a * a.transpose() + 0.1 * Mat::Identity(3, 3);
    Vec center(3), x(3), shift(3);
    for (int i = 0; i < 3; ++i) {
      center[i] = rng.normal();
      x[i] = rng.normal();
      shift[i] = rng.normal();
    }
    Ellipsoid e1(center, shape);
    Ellipsoid e2(center + shift, shape);
    CHECK(e1.contains(x, 1e-9) == e2.contains(x + shift, 1e-9));
  }
}

TEST_CASE("gaussian sampling") {
  // zero covariance -> always the mean
  Vec mean(2);
  mean << 3.0, -1.0;
  Gaussian point(mean, Mat::Zero(2, 2));
  Rng rng(5);
  for (int i = 0; i < 10; ++i) CHECK((point.sample(rng) - mean).norm() == 0.0);

  // CLT bound on the sample mean for identity covariance
  Gaussian g(mean, Mat::Identity(2, 2));
  Vec sum = Vec::Zero(2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += g.sample(rng);
  CHECK((sum / n - mean).norm() < 0.02);

  Mat negative = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(Gaussian(Vec::Zero(2), negative), IllConditionedError);
}

TEST_CASE("uniform ellipsoid samples stay inside") {
  Rng rng(11);
  Ellipsoid e(Vec::Zero(2), Mat::Identity(2, 2));
  for (int i = 0; i < 100000; ++i) CHECK(e.contains(e.sample(rng), 1e-12));

  Mat a(3, 3);
  for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
  Vec c(3);
  c << 1.0, 2.0, 3.0;
  Ellipsoid skew(c, a * a.transpose() + 0.5 * Mat::Identity(3, 3));
  for (int i = 0; i < 20000; ++i) CHECK(skew.contains(skew.sample(rng), 1e-12));
}
