#pragma once

namespace tailpool::numerics {

/// Natural log of the Gamma function, x > 0.
double log_gamma(double x);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, 0 < p < 1. Accurate to |Phi(result) - p| < 1e-12.
double normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Chi-square CDF with dof >= 1 degrees of freedom, x >= 0.
double chisq_cdf(double x, int dof);

/// Chi-square quantile, 0 < p < 1.
double chisq_quantile(double p, int dof);

/// Quantile of the Gamma(shape, 1) distribution, 0 < p < 1.
double gamma_quantile(double p, double shape);

/// Regularized incomplete beta I_x(a, b).
double regularized_beta(double x, double a, double b);

/// Student-t CDF with df > 0 degrees of freedom.
double student_t_cdf(double x, double df);

/// Student-t quantile, 0 < p < 1; |F(result) - p| < 1e-12.
double student_t_quantile(double p, double df);

}  // namespace tailpool::numerics
