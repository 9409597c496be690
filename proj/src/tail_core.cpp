#include "tailpool/tail_core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tailpool {

namespace detail {

TailFit hill_on_sorted(const std::vector<double>& ascending, int k) {
  const int n = static_cast<int>(ascending.size());
  if (k < 1 || k > n - 1) {
    throw std::invalid_argument("hill_estimate: k must satisfy 1 <= k <= n-1, got k=" +
                                std::to_string(k) + " with n=" + std::to_string(n));
  }
  const double threshold = ascending[static_cast<std::size_t>(n - k - 1)];
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("hill_estimate: nonpositive value among the top k+1 order statistics");
  }
  const double log_threshold = std::log(threshold);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    sum += std::log(ascending[static_cast<std::size_t>(n - 1 - i)]) - log_threshold;
  }
  TailFit fit;
  fit.gamma_hat = sum / k;
  fit.k = k;
  fit.threshold = threshold;
  fit.n = n;
  return fit;
}

}  // namespace detail

int default_k(int n) {
  if (n < 2) {
    throw std::invalid_argument("default_k: need n >= 2");
  }
  int k = static_cast<int>(std::floor(std::pow(static_cast<double>(n), 0.7)));
  if (k < 1) k = 1;
  if (k > n - 1) k = n - 1;
  return k;
}

TailFit hill_estimate(const SortedSample& sample, int k) {
  return detail::hill_on_sorted(sample.values(), k);
}

double weissman_quantile(const TailFit& fit, double p, std::optional<double> gamma_override) {
  const double k_over_n = static_cast<double>(fit.k) / fit.n;
  if (!(p > 0.0 && p < k_over_n)) {
    throw std::invalid_argument("weissman_quantile: p must lie in (0, k/n), got p=" +
                                std::to_string(p) + " with k/n=" + std::to_string(k_over_n));
  }
  const double gamma = gamma_override.value_or(fit.gamma_hat);
  return std::pow(fit.k / (fit.n * p), gamma) * fit.threshold;
}

SecondOrderFit second_order_estimate(const SortedSample& sample, double tau) {
  const int n = sample.n();
  if (n < 50) {
    throw std::invalid_argument("second_order_estimate: need n >= 50, got " + std::to_string(n));
  }
  const int k = std::min(n - 1, static_cast<int>(std::floor(std::pow(static_cast<double>(n), 0.995))));

  SecondOrderFit degenerate;
  degenerate.k_second = k;
  degenerate.degenerate = true;

  const auto& x = sample.values();
  const double log_threshold = std::log(x[static_cast<std::size_t>(n - k - 1)]);

  // Moments of log-excesses over the threshold order statistic.
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  for (int i = 0; i < k; ++i) {
    double e = std::log(x[static_cast<std::size_t>(n - 1 - i)]) - log_threshold;
    m1 += e;
    m2 += e * e;
    m3 += e * e * e;
  }
  m1 /= k;
  m2 /= k;
  m3 /= k;
  if (!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0)) {
    return degenerate;  // flat upper tail, no usable log-spacings
  }

  const double w1 = m1;
  const double w2 = m2 / 2.0;
  const double w3 = m3 / 6.0;
  double num, den;
  if (tau == 0.0) {
    num = std::log(w1) - 0.5 * std::log(w2);
    den = 0.5 * std::log(w2) - std::log(w3) / 3.0;
  } else {
    num = std::pow(w1, tau) - std::pow(w2, tau / 2.0);
    den = std::pow(w2, tau / 2.0) - std::pow(w3, tau / 3.0);
    // Normalize so the degeneracy threshold below is scale-free, as it
    // already is for tau = 0.
    num /= std::pow(w1, tau);
    den /= std::pow(w1, tau);
  }
  if (!std::isfinite(num) || !std::isfinite(den)) {
    return degenerate;
  }

  // Under a pure Pareto tail both contrasts sit at 0 up to O(1/sqrt(k))
  // noise and their ratio estimates nothing; treat that as degenerate. A
  // genuine second-order signal keeps them an order of magnitude above
  // this band for usable sample sizes.
  const double noise_band = 2.0 / std::sqrt(static_cast<double>(k));
  if (std::fabs(num) <= noise_band && std::fabs(den) <= noise_band) {
    return degenerate;
  }

  double rho;
  if (std::fabs(den) < 1e-300) {
    return degenerate;
  }
  const double t = num / den;
  if (std::fabs(t - 3.0) < 1e-12) {
    rho = -20.0;
  } else {
    rho = -std::fabs(3.0 * (t - 1.0) / (t - 3.0));
  }
  if (rho < -20.0) rho = -20.0;
  if (rho > 0.0) rho = 0.0;

  // Companion scale estimator from weighted scaled log-spacings.
  double d_rho = 0.0, s0 = 0.0, s_rho = 0.0, s_2rho = 0.0;
  for (int i = 1; i <= k; ++i) {
    double u = i * (std::log(x[static_cast<std::size_t>(n - i)]) -
                    std::log(x[static_cast<std::size_t>(n - i - 1)]));
    double w_rho = std::pow(static_cast<double>(i) / k, -rho);
    d_rho += w_rho;
    s0 += u;
    s_rho += w_rho * u;
    s_2rho += w_rho * w_rho * u;
  }
  d_rho /= k;
  s0 /= k;
  s_rho /= k;
  s_2rho /= k;

  const double beta_den = d_rho * s_rho - s_2rho;
  const double beta_scale = std::fabs(d_rho * s0) + std::fabs(s_rho) + std::fabs(s_2rho);
  if (!(std::fabs(beta_den) > 1e-12 * beta_scale)) {
    return degenerate;
  }
  double beta = std::pow(static_cast<double>(k) / n, rho) * (d_rho * s0 - s_rho) / beta_den;
  if (!std::isfinite(beta)) {
    return degenerate;
  }

  SecondOrderFit fit;
  fit.rho_hat = rho;
  fit.beta_hat = beta;
  fit.k_second = k;
  fit.degenerate = false;
  return fit;
}

double lambda_hat(double gamma, const SecondOrderFit& so, long long n, long long k) {
  if (k < 1 || n <= k) {
    throw std::invalid_argument("lambda_hat: need 1 <= k < n");
  }
  return std::sqrt(static_cast<double>(k)) * gamma * so.beta_hat *
         std::pow(static_cast<double>(n) / k, so.rho_hat);
}

}  // namespace tailpool
