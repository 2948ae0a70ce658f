#include "shiftguard/chi_square.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "shiftguard/errors.hpp"

namespace shiftguard {

namespace {

// Series representation of P(a,x), valid (and fast) for x < a+1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a,x) = 1 - P(a,x), valid for x >= a+1.
double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw DomainError("regularized_gamma_p: a must be positive");
  if (x < 0.0) throw DomainError("regularized_gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi_square_cdf(double x, int n) {
  if (n < 1) throw DomainError("chi_square_cdf: n must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * n, 0.5 * x);
}

double chi_square_pdf(double x, int n) {
  if (n < 1) throw DomainError("chi_square_pdf: n must be >= 1");
  if (x < 0.0) return 0.0;
  double half_n = 0.5 * n;
  if (x == 0.0) {
    if (n == 1) return std::numeric_limits<double>::infinity();
    if (n == 2) return 0.5;
    return 0.0;
  }
  double log_pdf = (half_n - 1.0) * std::log(x) - 0.5 * x - half_n * std::numbers::ln2_v<double> -
                   std::lgamma(half_n);
  return std::exp(log_pdf);
}

double chi_square_quantile(double p, int n) {
  if (n < 1) throw DomainError("chi_square_quantile: n must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi_square_quantile: p must be in (0,1)");

  // Bracket the quantile, then bisect, then polish with Newton steps.
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(n));
  while (chi_square_cdf(hi, n) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return hi;  // p astronomically close to 1
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi_square_cdf(mid, n) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 8; ++i) {
    double f = chi_square_cdf(x, n) - p;
    double d = chi_square_pdf(x, n);
    if (d <= 0.0 || !std::isfinite(d)) break;
    double step = f / d;
    double next = x - step;
    if (next <= lo || next >= hi) break;
    x = next;
    if (std::fabs(step) < 1e-12) break;
  }
  return x;
}

}  // namespace shiftguard
