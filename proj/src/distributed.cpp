#include "tailpool/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tailpool/errors.hpp"
#include "tailpool/numerics.hpp"
#include "tailpool/tail_core.hpp"

namespace tailpool {

namespace {

void require_nonempty(std::span<const MachineSummary> summaries, const char* who) {
  if (summaries.empty()) {
    throw std::invalid_argument(std::string(who) + ": no machine summaries");
  }
}

long long total_k(std::span<const MachineSummary> summaries) {
  long long k = 0;
  for (const auto& s : summaries) k += s.k;
  return k;
}

long long total_n(std::span<const MachineSummary> summaries) {
  long long n = 0;
  for (const auto& s : summaries) n += s.n;
  return n;
}

std::vector<double> gammas_of(std::span<const MachineSummary> summaries) {
  std::vector<double> g;
  g.reserve(summaries.size());
  for (const auto& s : summaries) g.push_back(s.gamma_hat);
  return g;
}

double pooled_scalar(std::span<const MachineSummary> summaries, const WeightVector& w,
                     double MachineSummary::* field) {
  double acc = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    acc += w[j] * summaries[static_cast<std::size_t>(j)].*field;
  }
  return acc;
}

}  // namespace

MachineSummary machine_summarize(const SortedSample& sample, int k, double tuning) {
  TailFit fit = hill_estimate(sample, k);
  SecondOrderFit so;
  if (sample.n() >= 50) {
    so = second_order_estimate(sample, tuning);
  } else {
    // Too short for the moment-ratio construction; report a zero bias model.
    so.degenerate = true;
    so.k_second = 0;
  }
  MachineSummary s;
  s.machine_id = sample.origin_id();
  s.n = fit.n;
  s.k = fit.k;
  s.gamma_hat = fit.gamma_hat;
  s.threshold = fit.threshold;
  s.beta_hat = so.beta_hat;
  s.rho_hat = so.rho_hat;
  return s;
}

nlohmann::json machine_summary_to_json(const MachineSummary& s) {
  return nlohmann::json{{"machine_id", s.machine_id}, {"n", s.n},
                        {"k", s.k},                   {"gamma_hat", s.gamma_hat},
                        {"threshold", s.threshold},   {"beta_hat", s.beta_hat},
                        {"rho_hat", s.rho_hat}};
}

MachineSummary machine_summary_from_json(const nlohmann::json& j) {
  MachineSummary s;
  s.machine_id = j.at("machine_id").get<std::string>();
  s.n = j.at("n").get<long long>();
  s.k = j.at("k").get<int>();
  s.gamma_hat = j.at("gamma_hat").get<double>();
  s.threshold = j.at("threshold").get<double>();
  s.beta_hat = j.at("beta_hat").get<double>();
  s.rho_hat = j.at("rho_hat").get<double>();
  if (s.k < 1 || s.k > s.n - 1) {
    throw std::invalid_argument("machine summary '" + s.machine_id + "': k out of [1, n-1]");
  }
  if (!(s.threshold > 0.0)) {
    throw std::invalid_argument("machine summary '" + s.machine_id + "': threshold must be positive");
  }
  return s;
}

WeightVector summary_weights(std::span<const MachineSummary> summaries, SummaryWeighting rule) {
  require_nonempty(summaries, "summary_weights");
  const int m = static_cast<int>(summaries.size());
  std::vector<double> w(static_cast<std::size_t>(m));
  switch (rule) {
    case SummaryWeighting::naive:
      std::fill(w.begin(), w.end(), 1.0 / m);
      break;
    case SummaryWeighting::by_n: {
      const double n = static_cast<double>(total_n(summaries));
      for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = summaries[static_cast<std::size_t>(j)].n / n;
      break;
    }
    case SummaryWeighting::by_k: {
      const double k = static_cast<double>(total_k(summaries));
      for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = summaries[static_cast<std::size_t>(j)].k / k;
      break;
    }
  }
  return WeightVector(std::move(w));
}

PooledEstimate aggregate_variance_optimal(std::span<const MachineSummary> summaries) {
  require_nonempty(summaries, "aggregate_variance_optimal");
  WeightVector w = summary_weights(summaries, SummaryWeighting::by_k);
  const auto g = gammas_of(summaries);
  PooledEstimate est{pooled_gamma(g, w), w, 0.0, 0.0, PoolScheme::variance_optimal, false};
  est.std_error = est.gamma / std::sqrt(static_cast<double>(total_k(summaries)));
  return est;
}

PooledEstimate aggregate_naive(std::span<const MachineSummary> summaries) {
  require_nonempty(summaries, "aggregate_naive");
  WeightVector w = WeightVector::naive(static_cast<int>(summaries.size()));
  const auto g = gammas_of(summaries);
  PooledEstimate est{pooled_gamma(g, w), w, 0.0, 0.0, PoolScheme::naive, false};
  // Asymptotic variance of the equal-weight combination: gamma^2 k sum w_j^2/k_j.
  double inflation = 0.0;
  for (const auto& s : summaries) {
    inflation += 1.0 / (static_cast<double>(summaries.size()) * summaries.size() * s.k);
  }
  est.std_error = est.gamma * std::sqrt(inflation);
  return est;
}

double pooled_lambda_hat(std::span<const MachineSummary> summaries, const AmseOptions& opt) {
  require_nonempty(summaries, "pooled_lambda_hat");
  const double gamma = pooled_scalar(summaries, summary_weights(summaries, opt.gamma_weights),
                                     &MachineSummary::gamma_hat);
  const double beta = pooled_scalar(summaries, summary_weights(summaries, opt.beta_weights),
                                    &MachineSummary::beta_hat);
  const double rho = pooled_scalar(summaries, summary_weights(summaries, opt.rho_weights),
                                   &MachineSummary::rho_hat);
  const double k = static_cast<double>(total_k(summaries));
  const double n = static_cast<double>(total_n(summaries));
  return gamma * beta * std::sqrt(k) * std::pow(n / k, rho);
}

PooledMoments distributed_moments(std::span<const MachineSummary> summaries,
                                  const AmseOptions& opt) {
  require_nonempty(summaries, "distributed_moments");
  const int m = static_cast<int>(summaries.size());
  const double gamma = pooled_scalar(summaries, summary_weights(summaries, opt.gamma_weights),
                                     &MachineSummary::gamma_hat);
  const double beta = pooled_scalar(summaries, summary_weights(summaries, opt.beta_weights),
                                    &MachineSummary::beta_hat);
  const double rho = pooled_scalar(summaries, summary_weights(summaries, opt.rho_weights),
                                   &MachineSummary::rho_hat);
  const long long k_total = total_k(summaries);
  const double sqrt_k = std::sqrt(static_cast<double>(k_total));

  PooledMoments mo;
  mo.k_total = k_total;
  mo.bias.resize(m);
  const double shared = sqrt_k * gamma * beta / (1.0 - rho);
  for (int j = 0; j < m; ++j) {
    const auto& s = summaries[static_cast<std::size_t>(j)];
    mo.bias[j] = shared * std::pow(static_cast<double>(s.n) / s.k, rho);
  }
  mo.covariance = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    mo.covariance(j, j) = static_cast<double>(k_total) * gamma * gamma /
                          summaries[static_cast<std::size_t>(j)].k;
  }
  return mo;
}

PooledEstimate aggregate_amse_optimal(std::span<const MachineSummary> summaries,
                                      const AmseOptions& opt) {
  require_nonempty(summaries, "aggregate_amse_optimal");
  if (summaries.size() < 2) {
    throw std::invalid_argument("aggregate_amse_optimal: need at least two machines");
  }
  PooledMoments mo = distributed_moments(summaries, opt);
  WeightVector w = amse_optimal_weights(mo);
  const auto g = gammas_of(summaries);
  PooledEstimate est = make_pooled_estimate(g, w, mo, PoolScheme::amse_optimal);
  return est;
}

double lambda0_threshold(double gamma, double rho, std::span<const int> k_list,
                         std::span<const long long> n_list) {
  if (!(gamma > 0.0)) throw std::invalid_argument("lambda0_threshold: gamma must be positive");
  if (!(rho < 0.0)) throw std::invalid_argument("lambda0_threshold: rho must be negative");
  const std::size_t m = k_list.size();
  if (m < 2 || n_list.size() != m) {
    throw std::invalid_argument("lambda0_threshold: need matching k and n lists, m >= 2");
  }
  // c_j = k_1/k_j and b_j = n_1/n_j, so d_j reduces to (n_j k) / (n k_j).
  long long k = 0, n = 0;
  for (std::size_t j = 0; j < m; ++j) {
    k += k_list[j];
    n += n_list[j];
  }
  std::vector<double> d(m);
  bool any_off_one = false;
  for (std::size_t j = 0; j < m; ++j) {
    d[j] = (static_cast<double>(n_list[j]) * k) / (static_cast<double>(n) * k_list[j]);
    if (std::fabs(d[j] - 1.0) > 1e-9) any_off_one = true;
  }
  if (!any_off_one) {
    throw std::invalid_argument(
        "lambda0_threshold: undefined when every machine has the same sample fraction");
  }
  auto s_of = [&](double alpha) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += std::pow(d[j], alpha) * k_list[j] / static_cast<double>(k_list[0]);
    }
    return acc;
  };
  const double s0 = s_of(0.0);
  const double s_rho = s_of(rho);
  const double s_2rho = s_of(2.0 * rho);
  const double num = s_rho * s_rho - s0 * s0;
  const double den = s0 * s_2rho - s_rho * s_rho;
  if (!(num > 0.0) || !(den > 0.0)) {
    throw numerical_error("lambda0_threshold: degenerate moment sums");
  }
  return gamma * (1.0 - rho) * std::sqrt(num / den);
}

double distributed_quantile(std::span<const MachineSummary> summaries, const WeightVector& w,
                            double p) {
  require_nonempty(summaries, "distributed_quantile");
  if (static_cast<int>(summaries.size()) != w.size()) {
    throw std::invalid_argument("distributed_quantile: weight length mismatch");
  }
  double log_q = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    const auto& s = summaries[static_cast<std::size_t>(j)];
    const double frac = static_cast<double>(s.k) / s.n;
    if (!(p > 0.0 && p < frac)) {
      throw std::invalid_argument("distributed_quantile: p outside (0, k_j/n_j) for machine '" +
                                  s.machine_id + "'");
    }
    log_q += w[j] * (s.gamma_hat * std::log(s.k / (s.n * p)) + std::log(s.threshold));
  }
  return std::exp(log_q);
}

double finite_k_bias_term(std::span<const MachineSummary> summaries, const WeightVector& w,
                          double rho, std::span<const double> a_values) {
  require_nonempty(summaries, "finite_k_bias_term");
  if (static_cast<int>(summaries.size()) != w.size() || a_values.size() != summaries.size()) {
    throw std::invalid_argument("finite_k_bias_term: length mismatch");
  }
  double acc = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    const double kj = summaries[static_cast<std::size_t>(j)].k;
    if (kj < 1) throw std::invalid_argument("finite_k_bias_term: k_j must be >= 1");
    const double log_ratio =
        numerics::log_gamma(kj - rho + 1.0) - numerics::log_gamma(kj + 1.0);
    acc += w[j] * std::pow(kj, rho) * std::exp(log_ratio) * a_values[static_cast<std::size_t>(j)];
  }
  return acc;
}

AggregationReport aggregate(std::vector<MachineSummary> summaries, std::span<const double> p_list,
                            double ci_level, const AmseOptions& opt) {
  require_nonempty(summaries, "aggregate");
  std::sort(summaries.begin(), summaries.end(),
            [](const MachineSummary& a, const MachineSummary& b) {
              return a.machine_id < b.machine_id;
            });
  const int m = static_cast<int>(summaries.size());
  const long long k_total = total_k(summaries);
  const long long n_total = total_n(summaries);

  AggregationReport rep;
  rep.machine_count = m;
  rep.k_total = k_total;
  rep.n_total = n_total;

  PooledMoments mo = distributed_moments(summaries, opt);
  const auto g = gammas_of(summaries);

  rep.gamma_naive = make_pooled_estimate(g, WeightVector::naive(m), mo, PoolScheme::naive);
  rep.gamma_var_opt =
      make_pooled_estimate(g, summary_weights(summaries, SummaryWeighting::by_k), mo,
                           PoolScheme::variance_optimal);
  rep.gamma_amse_opt = m >= 2 ? aggregate_amse_optimal(summaries, opt)
                              : rep.gamma_var_opt;
  rep.gamma_bias_reduced_var = bias_reduced_gamma(rep.gamma_var_opt, mo);
  rep.gamma_bias_reduced_amse = bias_reduced_gamma(rep.gamma_amse_opt, mo);
  rep.lambda_hat_pooled = pooled_lambda_hat(summaries, opt);

  const double rho_pooled = pooled_scalar(summaries, summary_weights(summaries, opt.rho_weights),
                                          &MachineSummary::rho_hat);
  if (m >= 2 && rho_pooled < 0.0) {
    std::vector<int> ks;
    std::vector<long long> ns;
    for (const auto& s : summaries) {
      ks.push_back(s.k);
      ns.push_back(s.n);
    }
    try {
      rep.lambda0 = lambda0_threshold(rep.gamma_var_opt.gamma, rho_pooled, ks, ns);
    } catch (const std::invalid_argument&) {
      rep.lambda0 = std::nullopt;  // equal sample fractions: threshold vacuous
    }
  }

  for (double p : p_list) {
    QuantileReport qr;
    qr.p = p;
    qr.extrapolation_log = std::log(static_cast<double>(k_total) / (static_cast<double>(n_total) * p));
    struct SchemeRow {
      const char* name;
      const PooledEstimate* est;
    };
    const SchemeRow rows[] = {{"naive", &rep.gamma_naive},
                              {"variance_optimal", &rep.gamma_var_opt},
                              {"amse_optimal", &rep.gamma_amse_opt}};
    for (const auto& row : rows) {
      const double q = distributed_quantile(summaries, row.est->weights, p);
      qr.estimate[row.name] = q;
      qr.interval[row.name] = quantile_confidence_interval(
          q, row.est->weights, mo.covariance, k_total, qr.extrapolation_log, ci_level);
    }
    rep.quantiles.push_back(std::move(qr));
  }

  auto [min_it, max_it] = std::minmax_element(
      summaries.begin(), summaries.end(),
      [](const MachineSummary& a, const MachineSummary& b) { return a.k < b.k; });
  rep.diagnostics.min_k = min_it->k;
  rep.diagnostics.max_k = max_it->k;
  rep.diagnostics.unbalanced_warning =
      max_it->k > 20LL * min_it->k;
  const double global_frac = static_cast<double>(k_total) / n_total;
  double spread = 0.0;
  for (const auto& s : summaries) {
    const double frac = static_cast<double>(s.k) / s.n;
    spread = std::max(spread, std::fabs(frac / global_frac - 1.0));
  }
  rep.diagnostics.fraction_spread = spread;
  return rep;
}

}  // namespace tailpool
