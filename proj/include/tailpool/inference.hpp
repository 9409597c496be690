#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>

#include "tailpool/pooling.hpp"
#include "tailpool/sample.hpp"

namespace tailpool {

/// Chi-square deviance test outcome. `reject_at` holds the decision at the
/// conventional levels 0.10, 0.05 and 0.01.
struct TestResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::map<double, bool> reject_at;
};

struct IntervalEstimate {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

/// Covariance plug-in used by the deviance tests: per-sample tail index
/// estimates enter each entry, unlike the pooled-index matrix used for
/// confidence intervals. Kept as a separate constructor so the two cannot
/// be substituted silently.
Eigen::MatrixXd test_covariance(std::span<const TailFit> fits, const DependenceInput& dependence);

/// Deviance test of equal tail indices across samples. Under independence
/// it reduces to the Pearson-style sum of k_j (gamma_j - mu)^2 / gamma_j^2.
TestResult homogeneity_test(std::span<const double> gammas, const Eigen::MatrixXd& v_bar,
                            long long k_total);

/// Deviance test of asymptotically equivalent tail quantile functions,
/// computed from the log extrapolated quantiles and the extrapolation factor
/// log(k/(n p)).
TestResult homoskedasticity_test(std::span<const double> log_quantiles,
                                 const Eigen::MatrixXd& v_bar, long long k_total,
                                 double extrapolation_log);

/// Symmetric asymptotic interval center +- z * std_error.
IntervalEstimate gamma_confidence_interval(const PooledEstimate& est, double level);

/// Multiplicative interval q * exp(+- z * log(k/(np)) * sqrt(w'Vw/k)).
IntervalEstimate quantile_confidence_interval(double q_star, const WeightVector& w,
                                              const Eigen::MatrixXd& v_hat, long long k_total,
                                              double extrapolation_log, double level);

}  // namespace tailpool
