#pragma once

#include <string>
#include <vector>

namespace tailpool {

/// One sample's observations in their original recording order. Order matters
/// when two series are co-indexed (observation i of two series belongs to the
/// same underlying event), which is what pairwise tail dependence estimation
/// relies on.
struct Series {
  std::string id;
  std::vector<double> values;
};

/// Strictly positive observations of one sample, ascending. The invariants
/// (nonempty, positive, nondecreasing) are checked at construction so the
/// estimators can index order statistics without revalidating.
class SortedSample {
 public:
  SortedSample(std::vector<double> ascending_values, std::string origin_id);

  static SortedSample from_unsorted(std::vector<double> values, std::string origin_id);
  static SortedSample from_series(const Series& series);

  const std::vector<double>& values() const { return values_; }
  int n() const { return static_cast<int>(values_.size()); }
  const std::string& origin_id() const { return origin_id_; }

  /// X_{i:n}, 1-based.
  double order_statistic(int i) const { return values_.at(static_cast<std::size_t>(i) - 1); }

 private:
  std::vector<double> values_;
  std::string origin_id_;
};

/// Hill fit of one sample's upper tail: the estimate, the number of top
/// order statistics used, and the threshold order statistic X_{n-k:n}.
struct TailFit {
  double gamma_hat = 0.0;
  int k = 0;
  double threshold = 0.0;
  int n = 0;
};

/// Second-order tail parameters (rho <= 0, beta) controlling the speed of
/// convergence to a pure Pareto tail. `degenerate` marks samples whose
/// moment ratios carry no second-order signal (pure-Pareto-like data); both
/// parameters are zeroed in that case.
struct SecondOrderFit {
  double rho_hat = 0.0;
  double beta_hat = 0.0;
  int k_second = 0;
  bool degenerate = false;
};

}  // namespace tailpool
