#include "tailpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tailpool/errors.hpp"
#include "tailpool/tail_core.hpp"

namespace tailpool {

namespace {

Eigen::LLT<Eigen::MatrixXd> factorize_pd(const Eigen::MatrixXd& v, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) {
    throw numerical_error(std::string(who) + ": covariance matrix is not positive definite");
  }
  return llt;
}

void check_lengths(std::size_t got, int expect, const char* who) {
  if (static_cast<int>(got) != expect) {
    throw std::invalid_argument(std::string(who) + ": length mismatch");
  }
}

}  // namespace

WeightVector::WeightVector(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) {
    throw std::invalid_argument("WeightVector: empty");
  }
  double sum = 0.0;
  for (double x : w_) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("WeightVector: nonfinite entry");
    }
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("WeightVector: entries sum to " + std::to_string(sum) +
                                ", expected 1");
  }
  // Remove the (tiny) residual so downstream unit-sum identities hold to
  // machine precision.
  for (double& x : w_) x /= sum;
}

WeightVector WeightVector::naive(int m) {
  if (m < 1) throw std::invalid_argument("WeightVector::naive: m must be >= 1");
  return WeightVector(std::vector<double>(static_cast<std::size_t>(m), 1.0 / m));
}

WeightVector WeightVector::one_hot(int m, int j) {
  if (m < 1 || j < 0 || j >= m) throw std::invalid_argument("WeightVector::one_hot: bad index");
  std::vector<double> w(static_cast<std::size_t>(m), 0.0);
  w[static_cast<std::size_t>(j)] = 1.0;
  return WeightVector(std::move(w));
}

Eigen::VectorXd WeightVector::as_eigen() const {
  return Eigen::Map<const Eigen::VectorXd>(w_.data(), static_cast<Eigen::Index>(w_.size()));
}

DependenceInput::DependenceInput(bool independent, Eigen::MatrixXd r)
    : independent_(independent), r_(std::move(r)) {}

DependenceInput DependenceInput::independent(int m) {
  if (m < 1) throw std::invalid_argument("DependenceInput: m must be >= 1");
  return DependenceInput(true, Eigen::MatrixXd::Zero(m, m));
}

DependenceInput DependenceInput::from_matrix(Eigen::MatrixXd r) {
  if (r.rows() != r.cols() || r.rows() < 1) {
    throw std::invalid_argument("DependenceInput: matrix must be square and nonempty");
  }
  return DependenceInput(false, std::move(r));
}

double pooled_gamma(std::span<const double> gammas, const WeightVector& w) {
  check_lengths(gammas.size(), w.size(), "pooled_gamma");
  double acc = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    acc += w[j] * gammas[static_cast<std::size_t>(j)];
  }
  return acc;
}

Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw numerical_error("repair_psd: eigendecomposition failed");
  }
  Eigen::VectorXd vals = eig.eigenvalues();
  const double top = vals.maxCoeff();
  if (!(top > 0.0)) {
    throw numerical_error("repair_psd: no positive eigenvalue, matrix is irreparably singular");
  }
  const double floor = 1e-10 * top;
  bool changed = false;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < floor) {
      vals[i] = floor;
      changed = true;
    }
  }
  if (!changed) return sym;
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

PooledMoments estimate_moments(std::span<const TailFit> fits,
                               std::span<const SecondOrderFit> second_order,
                               const DependenceInput& dependence, double gamma_plugin) {
  const int m = static_cast<int>(fits.size());
  if (m < 1) throw std::invalid_argument("estimate_moments: need at least one sample");
  check_lengths(second_order.size(), m, "estimate_moments");
  check_lengths(static_cast<std::size_t>(dependence.size()), m, "estimate_moments");
  if (!(gamma_plugin > 0.0)) {
    throw std::invalid_argument("estimate_moments: gamma plug-in must be positive");
  }

  long long k_total = 0;
  for (const auto& f : fits) k_total += f.k;

  PooledMoments mo;
  mo.k_total = k_total;
  mo.bias.resize(m);
  const double sqrt_k = std::sqrt(static_cast<double>(k_total));
  for (int j = 0; j < m; ++j) {
    const auto& so = second_order[static_cast<std::size_t>(j)];
    const double lam = lambda_hat(gamma_plugin, so, fits[static_cast<std::size_t>(j)].n,
                                  fits[static_cast<std::size_t>(j)].k);
    mo.bias[j] = sqrt_k * (lam / std::sqrt(static_cast<double>(fits[static_cast<std::size_t>(j)].k))) /
                 (1.0 - so.rho_hat);
  }

  const double g2k = gamma_plugin * gamma_plugin * static_cast<double>(k_total);
  Eigen::MatrixXd v(m, m);
  for (int j = 0; j < m; ++j) {
    for (int l = 0; l < m; ++l) {
      if (j == l) {
        v(j, l) = g2k / fits[static_cast<std::size_t>(j)].k;
      } else {
        v(j, l) = g2k * dependence.r(j, l) / fits[static_cast<std::size_t>(j)].k;
      }
    }
  }
  // Declared independence gives an exactly diagonal matrix with positive
  // diagonal; skip the eigen round-trip to keep the entries exact.
  mo.covariance = dependence.is_independent() ? v : repair_psd(v);
  return mo;
}

WeightVector variance_optimal_weights(const Eigen::MatrixXd& v) {
  const int m = static_cast<int>(v.rows());
  auto llt = factorize_pd(v, "variance_optimal_weights");
  Eigen::VectorXd x = llt.solve(Eigen::VectorXd::Ones(m));
  const double denom = x.sum();
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw numerical_error("variance_optimal_weights: 1'V^{-1}1 is not positive");
  }
  Eigen::VectorXd w = x / denom;
  return WeightVector(std::vector<double>(w.data(), w.data() + m));
}

WeightVector amse_optimal_weights(const PooledMoments& moments) {
  const int m = static_cast<int>(moments.covariance.rows());
  auto llt = factorize_pd(moments.covariance, "amse_optimal_weights");
  Eigen::VectorXd a = llt.solve(Eigen::VectorXd::Ones(m));  // V^{-1} 1
  Eigen::VectorXd b = llt.solve(moments.bias);              // V^{-1} B
  const double s_bb = moments.bias.dot(b);
  const double s_1b = b.sum();
  const double s_11 = a.sum();
  const double denom = (1.0 + s_bb) * s_11 - s_1b * s_1b;
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw numerical_error("amse_optimal_weights: degenerate bias/covariance combination");
  }
  Eigen::VectorXd w = ((1.0 + s_bb) * a - s_1b * b) / denom;
  return WeightVector(std::vector<double>(w.data(), w.data() + m));
}

double amse_value(const WeightVector& w, const PooledMoments& moments) {
  check_lengths(static_cast<std::size_t>(w.size()), static_cast<int>(moments.covariance.rows()),
                "amse_value");
  Eigen::VectorXd we = w.as_eigen();
  const double wb = we.dot(moments.bias);
  return wb * wb + we.dot(moments.covariance * we);
}

PooledEstimate make_pooled_estimate(std::span<const double> gammas, const WeightVector& w,
                                    const PooledMoments& moments, PoolScheme scheme) {
  check_lengths(gammas.size(), w.size(), "make_pooled_estimate");
  Eigen::VectorXd we = w.as_eigen();
  PooledEstimate est{pooled_gamma(gammas, w), w, 0.0, 0.0, scheme, false};
  est.std_error = std::sqrt(we.dot(moments.covariance * we) / static_cast<double>(moments.k_total));
  est.bias_estimate = we.dot(moments.bias) / std::sqrt(static_cast<double>(moments.k_total));
  return est;
}

PooledEstimate bias_reduced_gamma(const PooledEstimate& est, const PooledMoments& moments) {
  if (moments.k_total < 1) {
    throw std::invalid_argument("bias_reduced_gamma: k_total must be >= 1");
  }
  Eigen::VectorXd we = est.weights.as_eigen();
  const double correction = we.dot(moments.bias) / std::sqrt(static_cast<double>(moments.k_total));
  PooledEstimate out = est;
  out.gamma = est.gamma - correction;
  out.bias_estimate = correction;
  out.bias_reduced = true;
  return out;
}

double geometric_pooled_weissman(std::span<const TailFit> fits, const WeightVector& w, double p) {
  check_lengths(fits.size(), w.size(), "geometric_pooled_weissman");
  double log_q = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    log_q += w[j] * std::log(weissman_quantile(fits[static_cast<std::size_t>(j)], p));
  }
  return std::exp(log_q);
}

double arithmetic_pooled_weissman(std::span<const TailFit> fits, const WeightVector& w, double p) {
  check_lengths(fits.size(), w.size(), "arithmetic_pooled_weissman");
  double q = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    q += w[j] * weissman_quantile(fits[static_cast<std::size_t>(j)], p);
  }
  return q;
}

double shared_gamma_weissman(const TailFit& fit, double pooled_gamma_value, double p) {
  return weissman_quantile(fit, p, pooled_gamma_value);
}

WeightVector project_to_simplex(const WeightVector& w) {
  // Sort-based Euclidean projection onto {w >= 0, sum w = 1}.
  std::vector<double> u(w.values());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  int support = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) {
      theta = candidate;
      support = static_cast<int>(i + 1);
    }
  }
  if (support == 0) {
    throw numerical_error("project_to_simplex: empty support");
  }
  std::vector<double> out(w.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(0.0, w.values()[i] - theta);
  }
  return WeightVector(std::move(out));
}

}  // namespace tailpool
