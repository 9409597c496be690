#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tailpool/distributed.hpp"
#include "tailpool/errors.hpp"
#include "tailpool/filtering.hpp"
#include "tailpool/inference.hpp"
#include "tailpool/io.hpp"
#include "tailpool/pooling.hpp"
#include "tailpool/simulation.hpp"
#include "tailpool/tail_core.hpp"
#include "tailpool/tail_dependence.hpp"

namespace {

using nlohmann::json;
using namespace tailpool;

constexpr int kSchemaVersion = 1;

struct KSpec {
  double fraction = -1.0;                // --k-frac
  std::map<std::string, int> explicit_k; // --k id=value
};

int k_for(const KSpec& spec, const std::string& id, int n) {
  if (auto it = spec.explicit_k.find(id); it != spec.explicit_k.end()) {
    return it->second;
  }
  if (spec.fraction > 0.0) {
    int k = static_cast<int>(std::floor(spec.fraction * n));
    return std::clamp(k, 1, n - 1);
  }
  return default_k(n);
}

KSpec parse_k_spec(double k_frac, const std::vector<std::string>& k_pairs) {
  KSpec spec;
  spec.fraction = k_frac;
  for (const auto& pair_list : k_pairs) {
    std::stringstream ss(pair_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("--k expects id=value pairs, got '" + item + "'");
      }
      spec.explicit_k[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
    }
  }
  return spec;
}

std::vector<Series> read_series_file(const std::string& path, bool residual_mode) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open input file '" + path + "'");
  }
  return residual_mode ? read_residual_csv(in) : read_long_csv(in);
}

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty() || output_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(output_path);
  if (!out) {
    throw std::invalid_argument("cannot open output file '" + output_path + "'");
  }
  out << text;
}

json interval_json(const IntervalEstimate& ci) {
  return json{{"lower", ci.lower}, {"upper", ci.upper}, {"level", ci.level}};
}

json estimate_json(const PooledEstimate& est, std::optional<IntervalEstimate> ci) {
  json j{{"gamma", est.gamma},
         {"std_error", est.std_error},
         {"bias_estimate", est.bias_estimate},
         {"bias_reduced", est.bias_reduced},
         {"weights", est.weights.values()}};
  if (ci) j["ci"] = interval_json(*ci);
  return j;
}

// Estimation state shared by pool-estimate and pool-test.
struct PooledContext {
  std::vector<Series> series;
  std::vector<TailFit> fits;
  std::vector<SecondOrderFit> second_order;
  std::vector<double> gammas;
  DependenceInput dependence = DependenceInput::independent(1);
  long long k_total = 0;
  long long n_total = 0;
  bool has_second_order = false;
};

PooledContext build_context(const std::string& input, const KSpec& kspec, bool independence,
                            bool residual_mode, double tuning) {
  PooledContext ctx;
  ctx.series = read_series_file(input, residual_mode);
  const int m = static_cast<int>(ctx.series.size());

  std::vector<int> ks(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& s = ctx.series[static_cast<std::size_t>(j)];
    const int n = static_cast<int>(s.values.size());
    if (n < 2) {
      throw std::invalid_argument("sample '" + s.id + "' has fewer than two observations");
    }
    ks[static_cast<std::size_t>(j)] = k_for(kspec, s.id, n);
  }

  ctx.fits.resize(static_cast<std::size_t>(m));
  ctx.second_order.resize(static_cast<std::size_t>(m));
  ctx.has_second_order = true;
  for (int j = 0; j < m; ++j) {
    const auto& s = ctx.series[static_cast<std::size_t>(j)];
    if (residual_mode) {
      ResidualSample rs;
      rs.residuals = s.values;
      ctx.fits[static_cast<std::size_t>(j)] = residual_hill(rs, ks[static_cast<std::size_t>(j)]);
      // The second-order moment construction needs the full positive sample;
      // residual tails fall back to a zero bias model.
      ctx.second_order[static_cast<std::size_t>(j)].degenerate = true;
      ctx.has_second_order = false;
    } else {
      SortedSample sorted = SortedSample::from_series(s);
      ctx.fits[static_cast<std::size_t>(j)] = hill_estimate(sorted, ks[static_cast<std::size_t>(j)]);
      if (sorted.n() >= 50) {
        ctx.second_order[static_cast<std::size_t>(j)] = second_order_estimate(sorted, tuning);
      } else {
        ctx.second_order[static_cast<std::size_t>(j)].degenerate = true;
        ctx.has_second_order = false;
      }
    }
    ctx.gammas.push_back(ctx.fits[static_cast<std::size_t>(j)].gamma_hat);
    ctx.k_total += ks[static_cast<std::size_t>(j)];
    ctx.n_total += static_cast<long long>(s.values.size());
  }

  if (independence || m < 2) {
    ctx.dependence = DependenceInput::independent(m);
  } else {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l < m; ++l) {
        if (j == l) continue;
        PairedRanks pr = build_paired_ranks(ctx.series[static_cast<std::size_t>(j)],
                                            ctx.series[static_cast<std::size_t>(l)],
                                            ks[static_cast<std::size_t>(j)],
                                            ks[static_cast<std::size_t>(l)]);
        const auto& fj = ctx.fits[static_cast<std::size_t>(j)];
        const auto& fl = ctx.fits[static_cast<std::size_t>(l)];
        r(j, l) = tail_copula_clamped(pr, static_cast<double>(fj.k) / fl.k,
                                      static_cast<double>(fj.n) / fl.n);
      }
    }
    ctx.dependence = DependenceInput::from_matrix(std::move(r));
  }
  return ctx;
}

json samples_json(const PooledContext& ctx) {
  json arr = json::array();
  for (std::size_t j = 0; j < ctx.fits.size(); ++j) {
    const auto& f = ctx.fits[j];
    json s{{"id", ctx.series[j].id}, {"n", f.n},        {"k", f.k},
           {"gamma_hat", f.gamma_hat}, {"threshold", f.threshold}};
    const auto& so = ctx.second_order[j];
    s["beta_hat"] = so.beta_hat;
    s["rho_hat"] = so.rho_hat;
    s["second_order_degenerate"] = so.degenerate;
    arr.push_back(std::move(s));
  }
  return arr;
}

int cmd_pool_estimate(const std::string& input, const KSpec& kspec, bool independence,
                      double level, const std::vector<double>& p_levels, bool residual_mode,
                      bool project_simplex, double gamma_plugin_override, double tuning,
                      const std::vector<double>& cond_location,
                      const std::vector<double>& cond_scale, const std::string& output) {
  PooledContext ctx = build_context(input, kspec, independence, residual_mode, tuning);
  const int m = static_cast<int>(ctx.fits.size());

  const double gamma_plugin =
      gamma_plugin_override > 0.0
          ? gamma_plugin_override
          : pooled_gamma(ctx.gammas, WeightVector::naive(m));
  if (!(gamma_plugin > 0.0)) {
    throw numerical_error("pooled tail index plug-in is not positive; supply --gamma-plugin");
  }
  PooledMoments moments =
      estimate_moments(ctx.fits, ctx.second_order, ctx.dependence, gamma_plugin);

  WeightVector w_naive = WeightVector::naive(m);
  WeightVector w_var = variance_optimal_weights(moments.covariance);
  WeightVector w_amse = amse_optimal_weights(moments);
  bool projected = false;
  if (project_simplex) {
    w_amse = project_to_simplex(w_amse);
    projected = true;
  }

  PooledEstimate est_naive = make_pooled_estimate(ctx.gammas, w_naive, moments, PoolScheme::naive);
  PooledEstimate est_var =
      make_pooled_estimate(ctx.gammas, w_var, moments, PoolScheme::variance_optimal);
  PooledEstimate est_amse =
      make_pooled_estimate(ctx.gammas, w_amse, moments, PoolScheme::amse_optimal);

  json estimates;
  estimates["naive"] = estimate_json(est_naive, gamma_confidence_interval(est_naive, level));
  estimates["variance_optimal"] = estimate_json(est_var, gamma_confidence_interval(est_var, level));
  estimates["amse_optimal"] = estimate_json(est_amse, gamma_confidence_interval(est_amse, level));
  estimates["bias_reduced_variance_optimal"] =
      estimate_json(bias_reduced_gamma(est_var, moments), std::nullopt);
  estimates["bias_reduced_amse_optimal"] =
      estimate_json(bias_reduced_gamma(est_amse, moments), std::nullopt);

  json report{{"schema_version", kSchemaVersion},
              {"command", "pool-estimate"},
              {"residual_input", residual_mode},
              {"independence", ctx.dependence.is_independent()},
              {"gamma_plugin", gamma_plugin},
              {"n_total", ctx.n_total},
              {"k_total", ctx.k_total},
              {"samples", samples_json(ctx)},
              {"estimates", estimates}};
  if (projected) report["amse_weights_projected_to_simplex"] = true;

  if (!cond_location.empty() || !cond_scale.empty()) {
    if (static_cast<int>(cond_location.size()) != m || static_cast<int>(cond_scale.size()) != m) {
      throw std::invalid_argument("--location and --scale need one entry per sample");
    }
  }

  json quantile_blocks = json::array();
  for (double p : p_levels) {
    json block{{"p", p}};
    const double log_extrap =
        std::log(static_cast<double>(ctx.k_total) / (static_cast<double>(ctx.n_total) * p));
    block["extrapolation_log"] = log_extrap;

    json geometric;
    struct Row {
      const char* name;
      const PooledEstimate* est;
    };
    for (const Row& row : {Row{"naive", &est_naive}, Row{"variance_optimal", &est_var},
                           Row{"amse_optimal", &est_amse}}) {
      const double q = geometric_pooled_weissman(ctx.fits, row.est->weights, p);
      json entry{{"estimate", q}};
      entry["ci"] = interval_json(quantile_confidence_interval(
          q, row.est->weights, moments.covariance, ctx.k_total, log_extrap, level));
      geometric[row.name] = std::move(entry);
    }
    block["geometric"] = std::move(geometric);
    block["arithmetic_naive"] = arithmetic_pooled_weissman(ctx.fits, w_naive, p);

    json marginal, shared;
    for (int j = 0; j < m; ++j) {
      const auto& id = ctx.series[static_cast<std::size_t>(j)].id;
      marginal[id] = weissman_quantile(ctx.fits[static_cast<std::size_t>(j)], p);
      shared[id] = shared_gamma_weissman(ctx.fits[static_cast<std::size_t>(j)], est_var.gamma, p);
    }
    block["marginal"] = std::move(marginal);
    block["shared_gamma"] = std::move(shared);

    if (!cond_location.empty()) {
      json conditional;
      const double q_pooled = geometric_pooled_weissman(ctx.fits, w_var, p);
      for (int j = 0; j < m; ++j) {
        ResidualSample rs;
        rs.location_at_z = cond_location[static_cast<std::size_t>(j)];
        rs.scale_at_z = cond_scale[static_cast<std::size_t>(j)];
        conditional[ctx.series[static_cast<std::size_t>(j)].id] = conditional_quantile(rs, q_pooled);
      }
      block["conditional"] = std::move(conditional);
    }
    quantile_blocks.push_back(std::move(block));
  }
  report["quantiles"] = std::move(quantile_blocks);

  emit(report_to_string(report), output);
  return 0;
}

int cmd_pool_test(const std::string& input, const KSpec& kspec, const std::string& test,
                  bool independence, double p, double tuning, const std::string& output) {
  PooledContext ctx = build_context(input, kspec, independence, false, tuning);
  const int m = static_cast<int>(ctx.fits.size());
  if (m < 2) {
    throw std::invalid_argument("pool-test: need at least two samples");
  }
  Eigen::MatrixXd v_bar = test_covariance(ctx.fits, ctx.dependence);

  TestResult res;
  json report{{"schema_version", kSchemaVersion},
              {"command", "pool-test"},
              {"test", test},
              {"independence", ctx.dependence.is_independent()},
              {"n_total", ctx.n_total},
              {"k_total", ctx.k_total},
              {"samples", samples_json(ctx)}};
  if (test == "homogeneity") {
    res = homogeneity_test(ctx.gammas, v_bar, ctx.k_total);
  } else if (test == "homoskedasticity") {
    if (!(p > 0.0)) {
      throw std::invalid_argument("pool-test homoskedasticity requires --p");
    }
    std::vector<double> log_q(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      log_q[static_cast<std::size_t>(j)] =
          std::log(weissman_quantile(ctx.fits[static_cast<std::size_t>(j)], p));
    }
    const double log_extrap =
        std::log(static_cast<double>(ctx.k_total) / (static_cast<double>(ctx.n_total) * p));
    res = homoskedasticity_test(log_q, v_bar, ctx.k_total, log_extrap);
    report["p"] = p;
  } else {
    throw std::invalid_argument("pool-test: unknown test '" + test + "'");
  }

  report["statistic"] = res.statistic;
  report["dof"] = res.dof;
  report["p_value"] = res.p_value;
  json reject;
  for (const auto& [alpha, rejected] : res.reject_at) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", alpha);
    reject[key] = rejected;
  }
  report["reject_at"] = std::move(reject);

  emit(report_to_string(report), output);
  return 0;
}

int cmd_machine_summarize(const std::string& input, const KSpec& kspec, double tuning,
                          const std::string& output) {
  std::vector<Series> series = read_series_file(input, false);
  json arr = json::array();
  for (const auto& s : series) {
    SortedSample sorted = SortedSample::from_series(s);
    const int k = k_for(kspec, s.id, sorted.n());
    arr.push_back(machine_summary_to_json(machine_summarize(sorted, k, tuning)));
  }
  emit(report_to_string(arr.size() == 1 ? arr[0] : arr), output);
  return 0;
}

int cmd_aggregate(const std::vector<std::string>& summary_files, const std::vector<double>& p_levels,
                  double level, const std::string& output) {
  std::vector<MachineSummary> summaries;
  for (const auto& path : summary_files) {
    std::ifstream in(path);
    if (!in) {
      throw std::invalid_argument("cannot open summary file '" + path + "'");
    }
    json doc;
    try {
      in >> doc;
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("summary file '" + path + "': " + e.what());
    }
    if (doc.is_array()) {
      for (const auto& item : doc) summaries.push_back(machine_summary_from_json(item));
    } else {
      summaries.push_back(machine_summary_from_json(doc));
    }
  }
  if (summaries.empty()) {
    throw std::invalid_argument("aggregate: no machine summaries found");
  }

  AggregationReport rep = aggregate(std::move(summaries), p_levels, level);

  json estimates;
  estimates["naive"] =
      estimate_json(rep.gamma_naive, gamma_confidence_interval(rep.gamma_naive, level));
  estimates["variance_optimal"] =
      estimate_json(rep.gamma_var_opt, gamma_confidence_interval(rep.gamma_var_opt, level));
  estimates["amse_optimal"] =
      estimate_json(rep.gamma_amse_opt, gamma_confidence_interval(rep.gamma_amse_opt, level));
  estimates["bias_reduced_variance_optimal"] =
      estimate_json(rep.gamma_bias_reduced_var, std::nullopt);
  estimates["bias_reduced_amse_optimal"] = estimate_json(rep.gamma_bias_reduced_amse, std::nullopt);

  json quantiles = json::array();
  for (const auto& qr : rep.quantiles) {
    json block{{"p", qr.p}, {"extrapolation_log", qr.extrapolation_log}};
    json per_scheme;
    for (const auto& [scheme, value] : qr.estimate) {
      per_scheme[scheme] = json{{"estimate", value}, {"ci", interval_json(qr.interval.at(scheme))}};
    }
    block["estimates"] = std::move(per_scheme);
    quantiles.push_back(std::move(block));
  }

  json report{{"schema_version", kSchemaVersion},
              {"command", "aggregate"},
              {"machines", rep.machine_count},
              {"n_total", rep.n_total},
              {"k_total", rep.k_total},
              {"estimates", std::move(estimates)},
              {"lambda_hat", rep.lambda_hat_pooled},
              {"lambda0", rep.lambda0 ? json(*rep.lambda0) : json(nullptr)},
              {"quantiles", std::move(quantiles)},
              {"diagnostics",
               json{{"fraction_spread", rep.diagnostics.fraction_spread},
                    {"min_k", rep.diagnostics.min_k},
                    {"max_k", rep.diagnostics.max_k},
                    {"unbalanced_warning", rep.diagnostics.unbalanced_warning}}}};

  emit(report_to_string(report), output);
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, bool seed_given,
                 const std::string& output) {
  std::ifstream in(config_path);
  if (!in) {
    throw std::invalid_argument("cannot open config file '" + config_path + "'");
  }
  ExperimentConfig cfg = parse_experiment_config(in);
  if (seed_given) cfg.seed = seed;
  if (const char* env_seed = std::getenv("TAILPOOL_SEED")) {
    cfg.seed = static_cast<std::uint64_t>(std::stoull(env_seed));
  }
  ExperimentResult result = run_experiment(cfg);
  std::ostringstream csv;
  write_experiment_csv(result, csv);
  emit(csv.str(), output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pooled and distributed estimation of tail indices and extreme quantiles"};
  app.require_subcommand(1);

  // pool-estimate
  auto* est = app.add_subcommand("pool-estimate", "Pooled tail index and extreme quantile estimates");
  std::string est_input, est_output;
  double est_k_frac = -1.0, est_level = 0.95, est_gamma_plugin = -1.0, est_tau = 0.0;
  std::vector<std::string> est_k_pairs;
  std::vector<double> est_p, est_loc, est_scale;
  bool est_indep = false, est_residuals = false, est_project = false;
  est->add_option("-i,--input", est_input, "Long-format CSV (sample_id,value)")->required();
  est->add_option("--k-frac", est_k_frac, "Effective sizes k_j = floor(f * n_j)");
  est->add_option("--k", est_k_pairs, "Explicit k per sample: id=value[,id=value...]");
  est->add_option("--level", est_level, "Confidence level (default 0.95)");
  est->add_option("-p,--p", est_p, "Exceedance probabilities for quantile extrapolation");
  est->add_flag("--independence", est_indep, "Declare samples independent in the tails");
  est->add_flag("--residual-input", est_residuals, "Input CSV holds residuals (sample_id,residual)");
  est->add_flag("--project-simplex", est_project,
                "Project AMSE-optimal weights onto nonnegative weights");
  est->add_option("--gamma-plugin", est_gamma_plugin,
                  "Override the pooled tail index plug-in used in the covariance model");
  est->add_option("--tau", est_tau, "Second-order moment-ratio tuning exponent (0 or 1)");
  est->add_option("--location", est_loc, "Fitted locations g(z), one per sample (residual mode)");
  est->add_option("--scale", est_scale, "Fitted scales sigma(z), one per sample (residual mode)");
  est->add_option("-o,--output", est_output, "Report path (default stdout)");

  // pool-test
  auto* tst = app.add_subcommand("pool-test", "Deviance tests for tail homogeneity/homoskedasticity");
  std::string tst_input, tst_test, tst_output;
  double tst_k_frac = -1.0, tst_p = -1.0, tst_tau = 0.0;
  std::vector<std::string> tst_k_pairs;
  bool tst_indep = false;
  tst->add_option("-i,--input", tst_input, "Long-format CSV (sample_id,value)")->required();
  tst->add_option("--test", tst_test, "homogeneity | homoskedasticity")->required();
  tst->add_option("--k-frac", tst_k_frac, "Effective sizes k_j = floor(f * n_j)");
  tst->add_option("--k", tst_k_pairs, "Explicit k per sample: id=value[,...]");
  tst->add_option("-p,--p", tst_p, "Exceedance probability (homoskedasticity)");
  tst->add_flag("--independence", tst_indep, "Declare samples independent in the tails");
  tst->add_option("--tau", tst_tau, "Second-order tuning exponent");
  tst->add_option("-o,--output", tst_output, "Report path (default stdout)");

  // machine-summarize
  auto* ms = app.add_subcommand("machine-summarize", "Emit per-machine summaries from raw data");
  std::string ms_input, ms_output;
  double ms_k_frac = -1.0, ms_tau = 0.0;
  std::vector<std::string> ms_k_pairs;
  ms->add_option("-i,--input", ms_input, "Long-format CSV (sample_id,value)")->required();
  ms->add_option("--k-frac", ms_k_frac, "Effective sizes k_j = floor(f * n_j)");
  ms->add_option("--k", ms_k_pairs, "Explicit k per sample: id=value[,...]");
  ms->add_option("--tau", ms_tau, "Second-order tuning exponent");
  ms->add_option("-o,--output", ms_output, "Summary path (default stdout)");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Aggregate machine summaries into pooled estimates");
  std::vector<std::string> agg_files;
  std::vector<double> agg_p;
  double agg_level = 0.95;
  std::string agg_output;
  agg->add_option("summaries", agg_files, "Machine summary JSON files")->required();
  agg->add_option("-p,--p", agg_p, "Exceedance probabilities for quantile extrapolation");
  agg->add_option("--level", agg_level, "Confidence level (default 0.95)");
  agg->add_option("-o,--output", agg_output, "Report path (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a seeded Monte Carlo experiment");
  std::string sim_config, sim_output;
  std::uint64_t sim_seed = 0;
  sim->add_option("-c,--config", sim_config, "Experiment config (key = value lines)")->required();
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Master seed (TAILPOOL_SEED overrides)");
  sim->add_option("-o,--output", sim_output, "Result CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (est->parsed()) {
      return cmd_pool_estimate(est_input, parse_k_spec(est_k_frac, est_k_pairs), est_indep,
                               est_level, est_p, est_residuals, est_project, est_gamma_plugin,
                               est_tau, est_loc, est_scale, est_output);
    }
    if (tst->parsed()) {
      return cmd_pool_test(tst_input, parse_k_spec(tst_k_frac, tst_k_pairs), tst_test, tst_indep,
                           tst_p, tst_tau, tst_output);
    }
    if (ms->parsed()) {
      return cmd_machine_summarize(ms_input, parse_k_spec(ms_k_frac, ms_k_pairs), ms_tau, ms_output);
    }
    if (agg->parsed()) {
      return cmd_aggregate(agg_files, agg_p, agg_level, agg_output);
    }
    if (sim->parsed()) {
      return cmd_simulate(sim_config, sim_seed, sim_seed_opt->count() > 0, sim_output);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
