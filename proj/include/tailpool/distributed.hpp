#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailpool/inference.hpp"
#include "tailpool/pooling.hpp"
#include "tailpool/sample.hpp"

namespace tailpool {

/// The complete payload one machine communicates to the aggregator. No raw
/// observations ever cross this boundary; aggregators accept summaries only.
struct MachineSummary {
  std::string machine_id;
  long long n = 0;
  int k = 0;
  double gamma_hat = 0.0;
  double threshold = 0.0;  // X_{n-k:n}
  double beta_hat = 0.0;
  double rho_hat = 0.0;
};

/// Weighting rule for pooling per-machine scalar estimates.
enum class SummaryWeighting { naive, by_n, by_k };

/// Weight choices for the three pooled scalars feeding the bias model.
/// Defaults follow the size-based refinement: effective sizes for the tail
/// index, raw sizes for the second-order parameters (which use nearly the
/// whole sample on each machine).
struct AmseOptions {
  SummaryWeighting gamma_weights = SummaryWeighting::by_k;
  SummaryWeighting beta_weights = SummaryWeighting::by_n;
  SummaryWeighting rho_weights = SummaryWeighting::by_n;
};

/// Compute one machine's summary: Hill fit at the given k plus second-order
/// parameters (tuning forwarded to the moment-ratio estimator).
MachineSummary machine_summarize(const SortedSample& sample, int k, double tuning = 0.0);

nlohmann::json machine_summary_to_json(const MachineSummary& s);
MachineSummary machine_summary_from_json(const nlohmann::json& j);

WeightVector summary_weights(std::span<const MachineSummary> summaries, SummaryWeighting rule);

/// Convex combination with weights k_j / k: the variance-optimal distributed
/// estimator. Its asymptotic standard error is gamma / sqrt(k).
PooledEstimate aggregate_variance_optimal(std::span<const MachineSummary> summaries);

/// Equal-weight average of the machine estimates (baseline).
PooledEstimate aggregate_naive(std::span<const MachineSummary> summaries);

/// Pooled bias magnitude gamma * beta * sqrt(k) * (n/k)^rho built from the
/// pooled scalar estimates under the given weighting rules.
double pooled_lambda_hat(std::span<const MachineSummary> summaries, const AmseOptions& opt = {});

/// Bias vector and (diagonal) covariance matrix estimated from summaries
/// alone, with pooled second-order parameters shared across machines.
PooledMoments distributed_moments(std::span<const MachineSummary> summaries,
                                  const AmseOptions& opt = {});

/// Distributed estimate under the closed-form AMSE-optimal weights computed
/// from the summary-based moments.
PooledEstimate aggregate_amse_optimal(std::span<const MachineSummary> summaries,
                                      const AmseOptions& opt = {});

/// Bias threshold separating the regimes where AMSE-optimal pooling beats
/// the combined-sample benchmark (|lambda| > lambda0) or not. Undefined when
/// every machine has the same sample fraction; throws std::invalid_argument
/// in that case.
double lambda0_threshold(double gamma, double rho, std::span<const int> k_list,
                         std::span<const long long> n_list);

/// Weighted geometric pooling of the machines' extrapolated quantiles,
/// computed from summaries only. Requires p < min_j k_j / n_j.
double distributed_quantile(std::span<const MachineSummary> summaries, const WeightVector& w,
                            double p);

/// First-order bias of the weighted estimate when effective sizes stay
/// small: sum_j w_j k_j^rho Gamma(k_j - rho + 1)/k_j! A_j, with the Gamma
/// ratio evaluated through log-gamma. A_j values are supplied by the caller.
double finite_k_bias_term(std::span<const MachineSummary> summaries, const WeightVector& w,
                          double rho, std::span<const double> a_values);

struct AggregationDiagnostics {
  /// max_j | (k_j/n_j) / (k/n) - 1 |, the sample-fraction spread that must
  /// stay small for the variance-optimal aggregate to match the benchmark.
  double fraction_spread = 0.0;
  int min_k = 0;
  int max_k = 0;
  /// Set when max k_j / min k_j > 20: strongly unbalanced effective sizes.
  bool unbalanced_warning = false;
};

struct QuantileReport {
  double p = 0.0;
  double extrapolation_log = 0.0;  // log(k / (n p))
  std::map<std::string, double> estimate;           // per scheme
  std::map<std::string, IntervalEstimate> interval; // per scheme
};

struct AggregationReport {
  PooledEstimate gamma_naive;
  PooledEstimate gamma_var_opt;
  PooledEstimate gamma_amse_opt;
  PooledEstimate gamma_bias_reduced_var;
  PooledEstimate gamma_bias_reduced_amse;
  double lambda_hat_pooled = 0.0;
  std::optional<double> lambda0;
  std::vector<QuantileReport> quantiles;
  AggregationDiagnostics diagnostics;
  long long n_total = 0;
  long long k_total = 0;
  int machine_count = 0;
};

/// Full aggregation pass over machine summaries. Machines are processed in
/// machine_id order so reports do not depend on arrival order.
AggregationReport aggregate(std::vector<MachineSummary> summaries, std::span<const double> p_list,
                            double ci_level = 0.95, const AmseOptions& opt = {});

}  // namespace tailpool
