#pragma once

namespace shiftguard {

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
// computed by series expansion for x < a+1 and by continued fraction otherwise.
double regularized_gamma_p(double a, double x);

// CDF of the chi-square distribution with n degrees of freedom.
double chi_square_cdf(double x, int n);

// Density of the chi-square distribution with n degrees of freedom.
double chi_square_pdf(double x, int n);

// Quantile rho_n with chi_square_cdf(rho_n, n) = p, to absolute tolerance 1e-9.
// Throws DomainError for p outside (0,1) or n < 1.
double chi_square_quantile(double p, int n);

}  // namespace shiftguard
