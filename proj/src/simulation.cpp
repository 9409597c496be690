#include "tailpool/simulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "tailpool/distributed.hpp"
#include "tailpool/inference.hpp"
#include "tailpool/numerics.hpp"
#include "tailpool/pooling.hpp"
#include "tailpool/tail_core.hpp"
#include "tailpool/tail_dependence.hpp"

namespace tailpool {

MarginalSpec MarginalSpec::pareto(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("pareto marginal: gamma must be positive");
  MarginalSpec s;
  s.family = MarginalFamily::pareto;
  s.gamma = gamma;
  return s;
}

MarginalSpec MarginalSpec::frechet(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("frechet marginal: gamma must be positive");
  MarginalSpec s;
  s.family = MarginalFamily::frechet;
  s.gamma = gamma;
  return s;
}

MarginalSpec MarginalSpec::burr(double gamma, double rho) {
  if (!(gamma > 0.0)) throw std::invalid_argument("burr marginal: gamma must be positive");
  if (!(rho < 0.0)) throw std::invalid_argument("burr marginal: rho must be negative");
  MarginalSpec s;
  s.family = MarginalFamily::burr;
  s.gamma = gamma;
  s.rho = rho;
  return s;
}

MarginalSpec MarginalSpec::abs_student_t(double df) {
  if (!(df > 0.0)) throw std::invalid_argument("abs_student_t marginal: df must be positive");
  MarginalSpec s;
  s.family = MarginalFamily::abs_student_t;
  s.df = df;
  return s;
}

double marginal_quantile(const MarginalSpec& spec, double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::invalid_argument("marginal_quantile: u must lie in (0, 1)");
  }
  switch (spec.family) {
    case MarginalFamily::pareto:
      return std::pow(1.0 - u, -spec.gamma);
    case MarginalFamily::frechet:
      return std::pow(-std::log(u), -spec.gamma);
    case MarginalFamily::burr:
      return std::pow(std::pow(1.0 - u, spec.rho) - 1.0, -spec.gamma / spec.rho);
    case MarginalFamily::abs_student_t:
      return numerics::student_t_quantile(0.5 * (1.0 + u), spec.df);
  }
  throw std::logic_error("marginal_quantile: unknown family");
}

double true_tail_index(const MarginalSpec& spec) {
  return spec.family == MarginalFamily::abs_student_t ? 1.0 / spec.df : spec.gamma;
}

double true_rho(const MarginalSpec& spec) {
  switch (spec.family) {
    case MarginalFamily::pareto:
      return 0.0;
    case MarginalFamily::frechet:
      return -1.0;
    case MarginalFamily::burr:
      return spec.rho;
    case MarginalFamily::abs_student_t:
      return -2.0 / spec.df;
  }
  throw std::logic_error("true_rho: unknown family");
}

CopulaSpec CopulaSpec::independence() { return CopulaSpec{}; }

CopulaSpec CopulaSpec::clayton(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("clayton copula: theta must be positive");
  CopulaSpec s;
  s.family = CopulaFamily::clayton;
  s.theta = theta;
  return s;
}

CopulaSpec CopulaSpec::gumbel(double theta) {
  if (!(theta >= 1.0)) throw std::invalid_argument("gumbel copula: theta must be >= 1");
  CopulaSpec s;
  s.family = CopulaFamily::gumbel;
  s.theta = theta;
  return s;
}

CopulaSpec CopulaSpec::gaussian(double r) {
  CopulaSpec s;
  s.family = CopulaFamily::gaussian;
  s.r = r;
  return s;
}

CopulaSpec CopulaSpec::student(double r, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student copula: df must be positive");
  CopulaSpec s;
  s.family = CopulaFamily::student;
  s.r = r;
  s.df = df;
  return s;
}

CopulaSampler::CopulaSampler(const CopulaSpec& spec, int m) : spec_(spec), m_(m) {
  if (m < 1) throw std::invalid_argument("CopulaSampler: dimension must be >= 1");
  if (spec.family == CopulaFamily::gaussian || spec.family == CopulaFamily::student) {
    if (!(spec.r < 1.0) || (m > 1 && !(spec.r > -1.0 / (m - 1)))) {
      throw std::invalid_argument("CopulaSampler: correlation outside the valid equicorrelation range");
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(m, m, spec.r);
    corr.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("CopulaSampler: correlation matrix is not positive definite");
    }
    Eigen::MatrixXd l = llt.matrixL();
    chol_.assign(l.data(), l.data() + static_cast<std::size_t>(m) * m);
  }
}

void CopulaSampler::draw(RngStream& rng, std::vector<double>& u) const {
  u.resize(static_cast<std::size_t>(m_));
  switch (spec_.family) {
    case CopulaFamily::independence: {
      for (auto& x : u) x = rng.uniform();
      return;
    }
    case CopulaFamily::clayton: {
      // Frailty: U_j = (1 + E_j / W)^{-1/theta} with W ~ Gamma(1/theta, 1).
      const double w = numerics::gamma_quantile(rng.uniform(), 1.0 / spec_.theta);
      for (auto& x : u) {
        x = std::exp(-std::log1p(rng.exponential() / w) / spec_.theta);
      }
      return;
    }
    case CopulaFamily::gumbel: {
      if (spec_.theta == 1.0) {
        for (auto& x : u) x = rng.uniform();
        return;
      }
      // Frailty with a positive alpha-stable factor, alpha = 1/theta,
      // simulated by the Kanter representation.
      const double alpha = 1.0 / spec_.theta;
      const double v = 3.14159265358979323846 * rng.uniform();
      const double w = rng.exponential();
      const double log_a = (alpha * std::log(std::sin(alpha * v)) +
                            (1.0 - alpha) * std::log(std::sin((1.0 - alpha) * v)) -
                            std::log(std::sin(v))) /
                           (1.0 - alpha);
      const double log_s = (1.0 - alpha) / alpha * (log_a - std::log(w));
      for (auto& x : u) {
        x = std::exp(-std::exp(alpha * (std::log(rng.exponential()) - log_s)));
      }
      return;
    }
    case CopulaFamily::gaussian:
    case CopulaFamily::student: {
      std::vector<double> z(static_cast<std::size_t>(m_));
      for (auto& x : z) x = numerics::normal_quantile(rng.uniform());
      std::vector<double> y(static_cast<std::size_t>(m_), 0.0);
      for (int i = 0; i < m_; ++i) {
        double acc = 0.0;
        for (int l = 0; l <= i; ++l) {
          acc += chol_[static_cast<std::size_t>(i) + static_cast<std::size_t>(l) * m_] *
                 z[static_cast<std::size_t>(l)];
        }
        y[static_cast<std::size_t>(i)] = acc;
      }
      if (spec_.family == CopulaFamily::gaussian) {
        for (int i = 0; i < m_; ++i) {
          u[static_cast<std::size_t>(i)] = numerics::normal_cdf(y[static_cast<std::size_t>(i)]);
        }
      } else {
        const double chi2 = 2.0 * numerics::gamma_quantile(rng.uniform(), 0.5 * spec_.df);
        const double scale = std::sqrt(chi2 / spec_.df);
        for (int i = 0; i < m_; ++i) {
          u[static_cast<std::size_t>(i)] =
              numerics::student_t_cdf(y[static_cast<std::size_t>(i)] / scale, spec_.df);
        }
      }
      return;
    }
  }
  throw std::logic_error("CopulaSampler: unknown family");
}

std::vector<Series> sample_model(const ModelSpec& spec, std::uint64_t seed) {
  const int m = spec.m();
  if (m < 1) throw std::invalid_argument("sample_model: need at least one sample size");
  int n_max = 0;
  for (int s : spec.sizes) {
    if (s < 1) throw std::invalid_argument("sample_model: sample sizes must be >= 1");
    n_max = std::max(n_max, s);
  }
  CopulaSampler copula(spec.copula, m);
  RngStream rng(seed);

  std::vector<Series> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", j + 1);
    out[static_cast<std::size_t>(j)].id = id;
    out[static_cast<std::size_t>(j)].values.reserve(static_cast<std::size_t>(spec.sizes[static_cast<std::size_t>(j)]));
  }
  std::vector<double> u;
  for (int i = 0; i < n_max; ++i) {
    copula.draw(rng, u);
    for (int j = 0; j < m; ++j) {
      if (i < spec.sizes[static_cast<std::size_t>(j)]) {
        out[static_cast<std::size_t>(j)].values.push_back(
            marginal_quantile(spec.marginal, u[static_cast<std::size_t>(j)]));
      }
    }
  }
  return out;
}

namespace {

struct RepOutcome {
  bool failed = false;
  std::map<std::string, double> gamma_err;
  std::map<std::string, bool> gamma_cov;
  std::map<std::string, double> quantile_err;
  std::map<std::string, bool> quantile_cov;
  std::map<std::string, bool> rejected;
};

std::string p_key(const std::string& name, double p) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s@%g", name.c_str(), p);
  return buf;
}

std::uint64_t replication_seed(std::uint64_t master, int rep) {
  return mix64(master) ^ mix64(static_cast<std::uint64_t>(rep) * 0x9e3779b97f4a7c15ULL +
                               0x853c49e6748fea9bULL);
}

// Effective sizes from the fraction list (single entry recycled) or the
// default rule.
std::vector<int> effective_sizes(const ExperimentConfig& cfg) {
  const int m = cfg.model.m();
  std::vector<int> ks(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const int n = cfg.model.sizes[static_cast<std::size_t>(j)];
    if (cfg.k_fractions.empty()) {
      ks[static_cast<std::size_t>(j)] = default_k(n);
    } else {
      const double f = cfg.k_fractions.size() == 1
                           ? cfg.k_fractions[0]
                           : cfg.k_fractions[static_cast<std::size_t>(j)];
      if (!(f > 0.0 && f < 1.0)) {
        throw std::invalid_argument("run_experiment: k fraction must lie in (0, 1)");
      }
      int k = static_cast<int>(std::floor(f * n));
      ks[static_cast<std::size_t>(j)] = std::clamp(k, 1, n - 1);
    }
  }
  return ks;
}

MarginalSpec marginal_for(const ExperimentConfig& cfg, int j) {
  MarginalSpec spec = cfg.model.marginal;
  if (!cfg.per_sample_gamma.empty()) {
    if (spec.family == MarginalFamily::abs_student_t) {
      throw std::invalid_argument("run_experiment: per-sample gamma needs a parametric gamma marginal");
    }
    spec.gamma = cfg.per_sample_gamma[static_cast<std::size_t>(j)];
  }
  return spec;
}

RepOutcome run_one_replication(const ExperimentConfig& cfg, const std::vector<int>& ks, int rep) {
  RepOutcome out;
  const int m = cfg.model.m();
  const bool homogeneous_gamma = cfg.per_sample_gamma.empty();
  const bool homoskedastic = homogeneous_gamma && cfg.per_sample_scale.empty();
  const double gamma_true = true_tail_index(cfg.model.marginal);

  std::vector<Series> series = sample_model(cfg.model, replication_seed(cfg.seed, rep));
  for (int j = 0; j < m; ++j) {
    if (!cfg.per_sample_gamma.empty()) {
      // Adjust sample j's tail index while keeping the joint uniforms: for
      // the pareto/frechet/burr quantile functions, changing gamma raises
      // the draw to the power gamma_j / gamma.
      const MarginalSpec mj = marginal_for(cfg, j);
      const double exponent = mj.gamma / cfg.model.marginal.gamma;
      if (exponent != 1.0) {
        for (auto& v : series[static_cast<std::size_t>(j)].values) {
          v = std::pow(v, exponent);
        }
      }
    }
    if (!cfg.per_sample_scale.empty()) {
      const double c = cfg.per_sample_scale.size() == 1
                           ? cfg.per_sample_scale[0]
                           : cfg.per_sample_scale[static_cast<std::size_t>(j)];
      for (auto& v : series[static_cast<std::size_t>(j)].values) v *= c;
    }
  }

  std::vector<SortedSample> sorted;
  sorted.reserve(static_cast<std::size_t>(m));
  std::vector<TailFit> fits(static_cast<std::size_t>(m));
  std::vector<double> gammas(static_cast<std::size_t>(m));
  long long k_total = 0, n_total = 0;
  for (int j = 0; j < m; ++j) {
    sorted.push_back(SortedSample::from_series(series[static_cast<std::size_t>(j)]));
    fits[static_cast<std::size_t>(j)] = hill_estimate(sorted.back(), ks[static_cast<std::size_t>(j)]);
    gammas[static_cast<std::size_t>(j)] = fits[static_cast<std::size_t>(j)].gamma_hat;
    k_total += ks[static_cast<std::size_t>(j)];
    n_total += cfg.model.sizes[static_cast<std::size_t>(j)];
  }

  // Combined-data benchmark (unfeasible in a genuinely distributed setting).
  std::vector<double> all_values;
  all_values.reserve(static_cast<std::size_t>(n_total));
  for (const auto& s : series) {
    all_values.insert(all_values.end(), s.values.begin(), s.values.end());
  }
  SortedSample combined = SortedSample::from_unsorted(std::move(all_values), "combined");
  TailFit combined_fit = hill_estimate(combined, static_cast<int>(k_total));

  const double z_level = numerics::normal_quantile(0.5 * (1.0 + cfg.ci_level));

  DependenceInput dep = DependenceInput::independent(m);
  if (!cfg.declare_independence && m >= 2) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l < m; ++l) {
        if (j == l) continue;
        PairedRanks pr = build_paired_ranks(series[static_cast<std::size_t>(j)],
                                            series[static_cast<std::size_t>(l)],
                                            ks[static_cast<std::size_t>(j)],
                                            ks[static_cast<std::size_t>(l)]);
        const double kj = ks[static_cast<std::size_t>(j)];
        const double kl = ks[static_cast<std::size_t>(l)];
        const double nj = cfg.model.sizes[static_cast<std::size_t>(j)];
        const double nl = cfg.model.sizes[static_cast<std::size_t>(l)];
        r(j, l) = tail_copula_clamped(pr, kj / kl, nj / nl);
      }
    }
    dep = DependenceInput::from_matrix(std::move(r));
  }

  const bool with_so = cfg.second_order &&
                       std::all_of(cfg.model.sizes.begin(), cfg.model.sizes.end(),
                                   [](int n) { return n >= 50; });
  std::vector<SecondOrderFit> so(static_cast<std::size_t>(m));
  if (with_so) {
    for (int j = 0; j < m; ++j) {
      so[static_cast<std::size_t>(j)] = second_order_estimate(sorted[static_cast<std::size_t>(j)], cfg.tuning);
    }
  }

  // Moments and weights for the three schemes.
  const double gamma_plugin = pooled_gamma(gammas, WeightVector::naive(m));
  PooledMoments moments;
  WeightVector w_naive = WeightVector::naive(m);
  WeightVector w_var = w_naive, w_amse = w_naive;
  std::vector<MachineSummary> summaries;
  if (cfg.pipeline == Pipeline::distributed) {
    summaries.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      auto& s = summaries[static_cast<std::size_t>(j)];
      s.machine_id = series[static_cast<std::size_t>(j)].id;
      s.n = fits[static_cast<std::size_t>(j)].n;
      s.k = fits[static_cast<std::size_t>(j)].k;
      s.gamma_hat = fits[static_cast<std::size_t>(j)].gamma_hat;
      s.threshold = fits[static_cast<std::size_t>(j)].threshold;
      s.beta_hat = so[static_cast<std::size_t>(j)].beta_hat;
      s.rho_hat = so[static_cast<std::size_t>(j)].rho_hat;
    }
    moments = distributed_moments(summaries);
    w_var = summary_weights(summaries, SummaryWeighting::by_k);
    if (with_so && m >= 2) w_amse = amse_optimal_weights(moments);
  } else {
    moments = estimate_moments(fits, so, dep, gamma_plugin > 0.0 ? gamma_plugin : gamma_true);
    w_var = variance_optimal_weights(moments.covariance);
    if (with_so) w_amse = amse_optimal_weights(moments);
  }

  PooledEstimate est_naive = make_pooled_estimate(gammas, w_naive, moments, PoolScheme::naive);
  PooledEstimate est_var = make_pooled_estimate(gammas, w_var, moments, PoolScheme::variance_optimal);
  PooledEstimate est_amse =
      make_pooled_estimate(gammas, w_amse, moments, PoolScheme::amse_optimal);

  if (homogeneous_gamma) {
    out.gamma_err["hill_combined"] = combined_fit.gamma_hat - gamma_true;
    out.gamma_cov["hill_combined"] =
        std::fabs(combined_fit.gamma_hat - gamma_true) <=
        z_level * combined_fit.gamma_hat / std::sqrt(static_cast<double>(k_total));
    auto record_gamma = [&](const char* name, const PooledEstimate& est, bool with_ci) {
      out.gamma_err[name] = est.gamma - gamma_true;
      if (with_ci) {
        IntervalEstimate ci = gamma_confidence_interval(est, cfg.ci_level);
        out.gamma_cov[name] = gamma_true >= ci.lower && gamma_true <= ci.upper;
      }
    };
    record_gamma("pool_naive", est_naive, true);
    record_gamma("pool_var_opt", est_var, true);
    if (with_so) {
      record_gamma("pool_amse_opt", est_amse, true);
      record_gamma("pool_var_opt_br", bias_reduced_gamma(est_var, moments), false);
      record_gamma("pool_amse_opt_br", bias_reduced_gamma(est_amse, moments), false);
    }
  }

  if (homoskedastic) {
    for (double p : cfg.p_levels) {
      const double q_true = marginal_quantile(cfg.model.marginal, 1.0 - p);
      const double log_extrap =
          std::log(static_cast<double>(k_total) / (static_cast<double>(n_total) * p));
      const double q_hill = weissman_quantile(combined_fit, p);
      out.quantile_err[p_key("weissman_combined", p)] = q_hill / q_true - 1.0;
      {
        const double h = z_level * log_extrap * combined_fit.gamma_hat /
                         std::sqrt(static_cast<double>(k_total));
        out.quantile_cov[p_key("weissman_combined", p)] =
            q_true >= q_hill * std::exp(-h) && q_true <= q_hill * std::exp(h);
      }
      auto record_quantile = [&](const char* name, const WeightVector& w) {
        const double q = geometric_pooled_weissman(fits, w, p);
        out.quantile_err[p_key(name, p)] = q / q_true - 1.0;
        IntervalEstimate ci = quantile_confidence_interval(q, w, moments.covariance, k_total,
                                                           log_extrap, cfg.ci_level);
        out.quantile_cov[p_key(name, p)] = q_true >= ci.lower && q_true <= ci.upper;
      };
      record_quantile("geom_naive", w_naive);
      record_quantile("geom_var_opt", w_var);
      if (with_so) record_quantile("geom_amse_opt", w_amse);
      out.quantile_err[p_key("arith_naive", p)] =
          arithmetic_pooled_weissman(fits, w_naive, p) / q_true - 1.0;
    }
  }

  if (cfg.run_tests && m >= 2) {
    Eigen::MatrixXd v_bar = test_covariance(fits, dep);
    TestResult hom = homogeneity_test(gammas, v_bar, k_total);
    out.rejected["homogeneity"] = hom.p_value < cfg.test_alpha;
    for (double p : cfg.p_levels) {
      std::vector<double> log_q(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        log_q[static_cast<std::size_t>(j)] =
            std::log(weissman_quantile(fits[static_cast<std::size_t>(j)], p));
      }
      const double log_extrap =
          std::log(static_cast<double>(k_total) / (static_cast<double>(n_total) * p));
      TestResult hsk = homoskedasticity_test(log_q, v_bar, k_total, log_extrap);
      out.rejected[p_key("homoskedasticity", p)] = hsk.p_value < cfg.test_alpha;
    }
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) {
    throw std::invalid_argument("run_experiment: need at least one replication");
  }
  const int m = cfg.model.m();
  if (m < 1) throw std::invalid_argument("run_experiment: empty model");
  if (!cfg.k_fractions.empty() && cfg.k_fractions.size() != 1 &&
      static_cast<int>(cfg.k_fractions.size()) != m) {
    throw std::invalid_argument("run_experiment: k fraction list must have one entry or one per sample");
  }
  if (!cfg.per_sample_gamma.empty() && static_cast<int>(cfg.per_sample_gamma.size()) != m) {
    throw std::invalid_argument("run_experiment: per-sample gamma list must have one entry per sample");
  }
  if (!cfg.per_sample_scale.empty() && cfg.per_sample_scale.size() != 1 &&
      static_cast<int>(cfg.per_sample_scale.size()) != m) {
    throw std::invalid_argument("run_experiment: scale list must have one entry or one per sample");
  }
  const std::vector<int> ks = effective_sizes(cfg);
  // Extrapolation levels must stay below every sample fraction; this is a
  // configuration error, not a per-replication failure.
  for (double p : cfg.p_levels) {
    for (int j = 0; j < m; ++j) {
      const double frac = static_cast<double>(ks[static_cast<std::size_t>(j)]) /
                          cfg.model.sizes[static_cast<std::size_t>(j)];
      if (!(p > 0.0 && p < frac)) {
        throw std::invalid_argument("run_experiment: p level outside (0, k_j/n_j)");
      }
    }
  }

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.replications));
  int threads = cfg.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min(threads, cfg.replications);

  auto worker = [&](int begin, int end) {
    for (int rep = begin; rep < end; ++rep) {
      try {
        outcomes[static_cast<std::size_t>(rep)] = run_one_replication(cfg, ks, rep);
      } catch (const std::exception&) {
        outcomes[static_cast<std::size_t>(rep)].failed = true;
      }
    }
  };
  if (threads == 1) {
    worker(0, cfg.replications);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.replications + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(cfg.replications, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Sequential reduction in replication order: identical result for any
  // thread count.
  ExperimentResult result;
  result.replications = cfg.replications;
  result.seed = cfg.seed;

  int failed = 0;
  struct Acc {
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    int covered = 0, cov_n = 0;
  };
  std::map<std::string, Acc> gamma_acc, quantile_acc;
  std::map<std::string, std::pair<int, int>> reject_acc;

  for (const auto& o : outcomes) {
    if (o.failed) {
      ++failed;
      continue;
    }
    for (const auto& [name, err] : o.gamma_err) {
      auto& a = gamma_acc[name];
      a.sum += err;
      a.sum_sq += err * err;
      ++a.n;
      if (cfg.keep_errors) result.gamma_errors[name].push_back(err);
    }
    for (const auto& [name, cov] : o.gamma_cov) {
      auto& a = gamma_acc[name];
      a.covered += cov ? 1 : 0;
      ++a.cov_n;
    }
    for (const auto& [name, err] : o.quantile_err) {
      auto& a = quantile_acc[name];
      a.sum += err;
      a.sum_sq += err * err;
      ++a.n;
      if (cfg.keep_errors) result.quantile_errors[name].push_back(err);
    }
    for (const auto& [name, cov] : o.quantile_cov) {
      auto& a = quantile_acc[name];
      a.covered += cov ? 1 : 0;
      ++a.cov_n;
    }
    for (const auto& [name, rej] : o.rejected) {
      auto& [rejections, total] = reject_acc[name];
      rejections += rej ? 1 : 0;
      ++total;
    }
  }
  result.failed_fraction = static_cast<double>(failed) / cfg.replications;

  auto finalize = [](const Acc& a) {
    EstimatorMetrics mtr;
    mtr.count = a.n;
    if (a.n > 0) {
      mtr.mse = a.sum_sq / a.n;
      mtr.bias = a.sum / a.n;
      mtr.variance = std::max(0.0, mtr.mse - mtr.bias * mtr.bias);
    }
    if (a.cov_n > 0) mtr.coverage = static_cast<double>(a.covered) / a.cov_n;
    return mtr;
  };
  for (const auto& [name, a] : gamma_acc) result.gamma_metrics[name] = finalize(a);
  for (const auto& [name, a] : quantile_acc) result.quantile_metrics[name] = finalize(a);
  for (const auto& [name, rt] : reject_acc) {
    result.rejection_rates[name] = rt.second > 0 ? static_cast<double>(rt.first) / rt.second : 0.0;
  }
  return result;
}

}  // namespace tailpool
