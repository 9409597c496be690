#include "tailpool/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tailpool::numerics {

namespace {

constexpr int kMaxIterations = 500;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Series expansion of P(a, x), converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int i = 0; i < kMaxIterations; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), modified Lentz, for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double mult = d * c;
    h *= mult;
    if (std::fabs(mult - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

double gamma_pdf(double x, double shape) {
  if (x <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(x) - x - log_gamma(shape));
}

// Continued fraction for the incomplete beta, modified Lentz.
double beta_cf(double x, double a, double b) {
  const double tiny = 1e-300;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    double dm = static_cast<double>(m);
    double aa = dm * (b - dm) * x / ((qam + 2.0 * dm) * (a + 2.0 * dm));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + 2.0 * dm) * (qap + 2.0 * dm));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double mult = d * c;
    h *= mult;
    if (std::fabs(mult - 1.0) < kEps) break;
  }
  return h;
}

double normal_pdf(double x) {
  return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::invalid_argument("log_gamma: argument must be positive, got " + std::to_string(x));
  }
  return std::lgamma(x);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
  }
  // Acklam's rational approximation, then one Halley step against erfc-based CDF.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = normal_cdf(x) - p;
  double u = e / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) {
    throw std::invalid_argument("regularized_gamma_p: shape must be positive");
  }
  if (x < 0.0) {
    throw std::invalid_argument("regularized_gamma_p: x must be nonnegative");
  }
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chisq_cdf(double x, int dof) {
  if (dof < 1) {
    throw std::invalid_argument("chisq_cdf: dof must be >= 1");
  }
  if (x < 0.0) {
    throw std::invalid_argument("chisq_cdf: x must be nonnegative");
  }
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double gamma_quantile(double p, double shape) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("gamma_quantile: p must lie in (0, 1)");
  }
  if (!(shape > 0.0)) {
    throw std::invalid_argument("gamma_quantile: shape must be positive");
  }
  // Wilson-Hilferty starting point, then Newton with bisection safeguard.
  double z = normal_quantile(p);
  double t = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
  double x = shape * t * t * t;
  if (!(x > 0.0)) x = shape * std::exp(z / std::sqrt(shape));
  if (!(x > 0.0)) x = 1e-8;

  double lo = 0.0;
  double hi = x;
  while (regularized_gamma_p(shape, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("gamma_quantile: failed to bracket");
  }
  if (x > hi) x = 0.5 * (lo + hi);

  for (int i = 0; i < 100; ++i) {
    double f = regularized_gamma_p(shape, x) - p;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    double df = gamma_pdf(x, shape);
    double step = (df > 0.0) ? f / df : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-14 * (std::fabs(x) + 1e-300)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double chisq_quantile(double p, int dof) {
  if (dof < 1) {
    throw std::invalid_argument("chisq_quantile: dof must be >= 1");
  }
  return 2.0 * gamma_quantile(p, 0.5 * dof);
}

double regularized_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) {
    throw std::invalid_argument("regularized_beta: a and b must be positive");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::invalid_argument("regularized_beta: x must lie in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double log_front = a * std::log(x) + b * std::log(1.0 - x) + log_gamma(a + b) -
                     log_gamma(a) - log_gamma(b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_cf(x, a, b) / a;
  }
  return 1.0 - std::exp(log_front) * beta_cf(1.0 - x, b, a) / b;
}

double student_t_cdf(double x, double df) {
  if (!(df > 0.0)) {
    throw std::invalid_argument("student_t_cdf: df must be positive");
  }
  if (x == 0.0) return 0.5;
  double w = df / (df + x * x);
  double half_tail = 0.5 * regularized_beta(w, 0.5 * df, 0.5);
  return (x > 0.0) ? 1.0 - half_tail : half_tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("student_t_quantile: p must lie in (0, 1)");
  }
  if (!(df > 0.0)) {
    throw std::invalid_argument("student_t_quantile: df must be positive");
  }
  if (p == 0.5) return 0.0;
  // Symmetry: solve in the upper half only.
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);

  auto pdf = [df](double x) {
    double lg = log_gamma(0.5 * (df + 1.0)) - log_gamma(0.5 * df) -
                0.5 * std::log(df * 3.14159265358979323846);
    return std::exp(lg - 0.5 * (df + 1.0) * std::log1p(x * x / df));
  };

  // Start from the normal quantile; widen the upper bracket geometrically.
  double lo = 0.0;
  double hi = std::max(1.0, 2.0 * normal_quantile(p));
  while (student_t_cdf(hi, df) < p) {
    lo = hi;
    hi *= 4.0;
    if (hi > 1e300) throw std::runtime_error("student_t_quantile: failed to bracket");
  }
  double x = std::min(std::max(normal_quantile(p), lo + 1e-12), hi);
  for (int i = 0; i < 200; ++i) {
    double f = student_t_cdf(x, df) - p;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    double d = pdf(x);
    double next = (d > 0.0) ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-15 * (std::fabs(x) + 1e-300)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace tailpool::numerics
