#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "tailpool/sample.hpp"

namespace tailpool {

/// Unit-sum pooling weights across m samples. Entries may be negative: the
/// mean-squared-error-optimal solution is unconstrained apart from summing
/// to one.
class WeightVector {
 public:
  /// Trivial single-sample weight; keeps the unit-sum invariant so
  /// aggregates holding a WeightVector stay default-constructible.
  WeightVector() : w_{1.0} {}
  explicit WeightVector(std::vector<double> w);

  static WeightVector naive(int m);
  static WeightVector one_hot(int m, int j);

  const std::vector<double>& values() const { return w_; }
  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int j) const { return w_[static_cast<std::size_t>(j)]; }

  Eigen::VectorXd as_eigen() const;

 private:
  std::vector<double> w_;
};

/// Estimated asymptotic bias vector and covariance matrix of the vector of
/// per-sample tail index estimates, on the sqrt(k_total) scale.
struct PooledMoments {
  Eigen::VectorXd bias;        // one entry per sample
  Eigen::MatrixXd covariance;  // symmetric positive definite after repair
  long long k_total = 0;
};

enum class PoolScheme { naive, variance_optimal, amse_optimal, custom };

/// A pooled tail-index estimate with the weights that produced it and its
/// asymptotic standard error sqrt(w'Vw / k).
struct PooledEstimate {
  double gamma = 0.0;
  WeightVector weights;
  double std_error = 0.0;
  /// Estimated asymptotic bias of the raw weighted estimate, w'B / sqrt(k).
  double bias_estimate = 0.0;
  PoolScheme scheme = PoolScheme::custom;
  bool bias_reduced = false;
};

/// Dependence input for the covariance plug-in: either declared independence
/// across samples (all cross terms zero) or a matrix of empirical tail
/// copula evaluations r(j, l) at the ratio arguments (k_j/k_l, n_j/n_l).
class DependenceInput {
 public:
  static DependenceInput independent(int m);
  static DependenceInput from_matrix(Eigen::MatrixXd r);

  bool is_independent() const { return independent_; }
  int size() const { return static_cast<int>(r_.rows()); }
  double r(int j, int l) const { return r_(j, l); }

 private:
  DependenceInput(bool independent, Eigen::MatrixXd r);
  bool independent_;
  Eigen::MatrixXd r_;
};

/// Weighted combination of per-sample tail index estimates.
double pooled_gamma(std::span<const double> gammas, const WeightVector& w);

/// Symmetrize and floor the eigenvalues at 1e-10 times the largest so the
/// result is positive definite. Throws numerical_error if nothing positive
/// survives.
Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& m);

/// Plug-in estimates of the bias vector and covariance matrix from the
/// per-sample fits, second-order fits and dependence input, using a common
/// tail index value `gamma_plugin` in the covariance and bias scales.
PooledMoments estimate_moments(std::span<const TailFit> fits,
                               std::span<const SecondOrderFit> second_order,
                               const DependenceInput& dependence, double gamma_plugin);

/// Unit-sum weights minimizing w'Vw: V^{-1} 1 / (1' V^{-1} 1).
WeightVector variance_optimal_weights(const Eigen::MatrixXd& v);

/// Unit-sum weights minimizing (w'B)^2 + w'Vw, in closed form.
WeightVector amse_optimal_weights(const PooledMoments& moments);

/// (w'B)^2 + w'Vw.
double amse_value(const WeightVector& w, const PooledMoments& moments);

/// Assemble a PooledEstimate from estimates, weights and moments.
PooledEstimate make_pooled_estimate(std::span<const double> gammas, const WeightVector& w,
                                    const PooledMoments& moments, PoolScheme scheme);

/// Subtract the estimated asymptotic bias w'B / sqrt(k) from the estimate.
PooledEstimate bias_reduced_gamma(const PooledEstimate& est, const PooledMoments& moments);

/// Weighted geometric mean of the per-sample extrapolated tail quantiles,
/// requires p < min_j k_j / n_j.
double geometric_pooled_weissman(std::span<const TailFit> fits, const WeightVector& w, double p);

/// Plain weighted sum of the per-sample extrapolated quantiles (baseline).
double arithmetic_pooled_weissman(std::span<const TailFit> fits, const WeightVector& w, double p);

/// One sample's extrapolated quantile with a shared (pooled) tail index in
/// the extrapolation exponent.
double shared_gamma_weissman(const TailFit& fit, double pooled_gamma_value, double p);

/// Euclidean projection onto the probability simplex, for callers that want
/// nonnegative weights at the cost of optimality.
WeightVector project_to_simplex(const WeightVector& w);

}  // namespace tailpool
