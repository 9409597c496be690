#pragma once

#include <optional>

#include "tailpool/sample.hpp"

namespace tailpool {

/// Deterministic default for the number of top order statistics:
/// floor(n^0.7), clamped to [1, n-1].
int default_k(int n);

/// Hill estimator from the top (k+1) order statistics, 1 <= k <= n-1.
TailFit hill_estimate(const SortedSample& sample, int k);

/// Extrapolated tail quantile (k/(np))^gamma * X_{n-k:n} at exceedance
/// probability p in (0, k/n). `gamma_override` substitutes a pooled or
/// otherwise shared index for the fit's own estimate.
double weissman_quantile(const TailFit& fit, double p,
                         std::optional<double> gamma_override = std::nullopt);

/// Second-order parameter estimation from three moments of log-excesses
/// (tuning exponent tau, 0 or 1) and the companion scale estimator, both
/// evaluated at k_second = min(n-1, floor(n^0.995)). Requires n >= 50.
/// Data without detectable second-order structure comes back flagged
/// degenerate with (rho, beta) = (0, 0).
SecondOrderFit second_order_estimate(const SortedSample& sample, double tau = 0.0);

/// Scaled bias magnitude sqrt(k) * gamma * beta * (n/k)^rho.
double lambda_hat(double gamma, const SecondOrderFit& so, long long n, long long k);

namespace detail {
/// Hill arithmetic on an ascending range; only the top k+1 entries must be
/// positive. Shared by the full-sample and residual-based estimators.
TailFit hill_on_sorted(const std::vector<double>& ascending, int k);
}  // namespace detail

}  // namespace tailpool
