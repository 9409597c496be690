#include "tailpool/inference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tailpool/errors.hpp"
#include "tailpool/numerics.hpp"

namespace tailpool {

namespace {

constexpr double kReportLevels[] = {0.10, 0.05, 0.01};

TestResult deviance_result(double statistic, int m) {
  TestResult res;
  res.statistic = statistic;
  res.dof = m - 1;
  res.p_value = 1.0 - numerics::chisq_cdf(statistic, res.dof);
  for (double alpha : kReportLevels) {
    res.reject_at[alpha] = statistic > numerics::chisq_quantile(1.0 - alpha, res.dof);
  }
  return res;
}

// Generalized-least-squares residual r = z - mu 1 with mu = (1'V^{-1}z)/(1'V^{-1}1),
// returning r' V^{-1} r.
double gls_deviance(const Eigen::VectorXd& z, const Eigen::MatrixXd& v, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) {
    throw numerical_error(std::string(who) + ": covariance matrix is not positive definite");
  }
  Eigen::VectorXd v_inv_1 = llt.solve(Eigen::VectorXd::Ones(z.size()));
  Eigen::VectorXd v_inv_z = llt.solve(z);
  const double mu = v_inv_z.sum() / v_inv_1.sum();
  Eigen::VectorXd r = z.array() - mu;
  return r.dot(llt.solve(r));
}

}  // namespace

Eigen::MatrixXd test_covariance(std::span<const TailFit> fits, const DependenceInput& dependence) {
  const int m = static_cast<int>(fits.size());
  if (m < 1) throw std::invalid_argument("test_covariance: need at least one sample");
  if (dependence.size() != m) throw std::invalid_argument("test_covariance: length mismatch");
  long long k_total = 0;
  for (const auto& f : fits) k_total += f.k;
  const double k = static_cast<double>(k_total);

  Eigen::MatrixXd v(m, m);
  for (int j = 0; j < m; ++j) {
    const double gj = fits[static_cast<std::size_t>(j)].gamma_hat;
    for (int l = 0; l < m; ++l) {
      if (j == l) {
        v(j, l) = k * gj * gj / fits[static_cast<std::size_t>(j)].k;
      } else {
        const double gl = fits[static_cast<std::size_t>(l)].gamma_hat;
        v(j, l) = k * gj * gl * dependence.r(j, l) / fits[static_cast<std::size_t>(j)].k;
      }
    }
  }
  return dependence.is_independent() ? v : repair_psd(v);
}

TestResult homogeneity_test(std::span<const double> gammas, const Eigen::MatrixXd& v_bar,
                            long long k_total) {
  const int m = static_cast<int>(gammas.size());
  if (m < 2) throw std::invalid_argument("homogeneity_test: need at least two samples");
  if (v_bar.rows() != m || v_bar.cols() != m) {
    throw std::invalid_argument("homogeneity_test: covariance size mismatch");
  }
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(gammas.data(), m);
  const double statistic = static_cast<double>(k_total) * gls_deviance(z, v_bar, "homogeneity_test");
  return deviance_result(statistic, m);
}

TestResult homoskedasticity_test(std::span<const double> log_quantiles,
                                 const Eigen::MatrixXd& v_bar, long long k_total,
                                 double extrapolation_log) {
  const int m = static_cast<int>(log_quantiles.size());
  if (m < 2) throw std::invalid_argument("homoskedasticity_test: need at least two samples");
  if (v_bar.rows() != m || v_bar.cols() != m) {
    throw std::invalid_argument("homoskedasticity_test: covariance size mismatch");
  }
  if (!(extrapolation_log > 0.0)) {
    throw std::invalid_argument("homoskedasticity_test: extrapolation factor log(k/(np)) must be positive");
  }
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(log_quantiles.data(), m);
  const double statistic = static_cast<double>(k_total) /
                           (extrapolation_log * extrapolation_log) *
                           gls_deviance(z, v_bar, "homoskedasticity_test");
  return deviance_result(statistic, m);
}

IntervalEstimate gamma_confidence_interval(const PooledEstimate& est, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("gamma_confidence_interval: level must lie in (0, 1)");
  }
  const double z = numerics::normal_quantile(0.5 * (1.0 + level));
  IntervalEstimate ci;
  ci.center = est.gamma;
  ci.lower = est.gamma - z * est.std_error;
  ci.upper = est.gamma + z * est.std_error;
  ci.level = level;
  return ci;
}

IntervalEstimate quantile_confidence_interval(double q_star, const WeightVector& w,
                                              const Eigen::MatrixXd& v_hat, long long k_total,
                                              double extrapolation_log, double level) {
  if (!(q_star > 0.0)) {
    throw std::invalid_argument("quantile_confidence_interval: quantile estimate must be positive");
  }
  if (!(extrapolation_log > 0.0)) {
    throw std::invalid_argument("quantile_confidence_interval: extrapolation factor must be positive");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("quantile_confidence_interval: level must lie in (0, 1)");
  }
  Eigen::VectorXd we = w.as_eigen();
  const double z = numerics::normal_quantile(0.5 * (1.0 + level));
  const double h = z * extrapolation_log *
                   std::sqrt(we.dot(v_hat * we) / static_cast<double>(k_total));
  IntervalEstimate ci;
  ci.center = q_star;
  ci.lower = q_star * std::exp(-h);
  ci.upper = q_star * std::exp(h);
  ci.level = level;
  return ci;
}

}  // namespace tailpool
