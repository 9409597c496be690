#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailpool/simulation.hpp"

namespace tailpool {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' has a malformed number '" + s + "'");
  }
}

long long to_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' has a malformed integer '" + s + "'");
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: key '" + key + "' expects true/false, got '" + s + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(key, item));
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string marginal = "pareto";
  double gamma = 1.0, rho = -1.0, df = 1.0;
  std::string copula = "independence";
  double theta = 1.0, r = 0.0, copula_df = 4.0;
  bool saw_sizes = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (value.empty()) {
      throw std::invalid_argument("config: key '" + key + "' has no value");
    }

    if (key == "marginal") {
      marginal = value;
    } else if (key == "gamma") {
      gamma = to_double(key, value);
    } else if (key == "rho") {
      rho = to_double(key, value);
    } else if (key == "df") {
      df = to_double(key, value);
    } else if (key == "copula") {
      copula = value;
    } else if (key == "theta") {
      theta = to_double(key, value);
    } else if (key == "r") {
      r = to_double(key, value);
    } else if (key == "copula_df") {
      copula_df = to_double(key, value);
    } else if (key == "sizes") {
      cfg.model.sizes.clear();
      for (const auto& item : split_list(value)) {
        cfg.model.sizes.push_back(static_cast<int>(to_int(key, item)));
      }
      saw_sizes = true;
    } else if (key == "k_frac") {
      cfg.k_fractions = to_double_list(key, value);
    } else if (key == "p") {
      cfg.p_levels = to_double_list(key, value);
    } else if (key == "gammas") {
      cfg.per_sample_gamma = to_double_list(key, value);
    } else if (key == "scales") {
      cfg.per_sample_scale = to_double_list(key, value);
    } else if (key == "replications") {
      cfg.replications = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "level") {
      cfg.ci_level = to_double(key, value);
    } else if (key == "alpha") {
      cfg.test_alpha = to_double(key, value);
    } else if (key == "pipeline") {
      if (value == "pooled") {
        cfg.pipeline = Pipeline::pooled;
      } else if (value == "distributed") {
        cfg.pipeline = Pipeline::distributed;
      } else {
        throw std::invalid_argument("config: pipeline must be 'pooled' or 'distributed'");
      }
    } else if (key == "independence") {
      cfg.declare_independence = to_bool(key, value);
    } else if (key == "tests") {
      cfg.run_tests = to_bool(key, value);
    } else if (key == "second_order") {
      cfg.second_order = to_bool(key, value);
    } else if (key == "tau") {
      cfg.tuning = to_double(key, value);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(to_int(key, value));
    } else if (key == "keep_errors") {
      cfg.keep_errors = to_bool(key, value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  if (!saw_sizes || cfg.model.sizes.empty()) {
    throw std::invalid_argument("config: 'sizes' is required");
  }

  if (marginal == "pareto") {
    cfg.model.marginal = MarginalSpec::pareto(gamma);
  } else if (marginal == "frechet") {
    cfg.model.marginal = MarginalSpec::frechet(gamma);
  } else if (marginal == "burr") {
    cfg.model.marginal = MarginalSpec::burr(gamma, rho);
  } else if (marginal == "abs_student_t") {
    cfg.model.marginal = MarginalSpec::abs_student_t(df);
  } else {
    throw std::invalid_argument("config: unknown marginal '" + marginal + "'");
  }

  if (copula == "independence") {
    cfg.model.copula = CopulaSpec::independence();
  } else if (copula == "clayton") {
    cfg.model.copula = CopulaSpec::clayton(theta);
  } else if (copula == "gumbel") {
    cfg.model.copula = CopulaSpec::gumbel(theta);
  } else if (copula == "gaussian") {
    cfg.model.copula = CopulaSpec::gaussian(r);
  } else if (copula == "student") {
    cfg.model.copula = CopulaSpec::student(r, copula_df);
  } else {
    throw std::invalid_argument("config: unknown copula '" + copula + "'");
  }
  return cfg;
}

void write_experiment_csv(const ExperimentResult& result, std::ostream& out) {
  out << "kind,name,p,mse,bias,variance,coverage,rejection_rate,count,replications,seed,failed_fraction\n";
  char buf[512];
  auto split_p = [](const std::string& key) -> std::pair<std::string, std::string> {
    auto at = key.rfind('@');
    if (at == std::string::npos) return {key, ""};
    return {key.substr(0, at), key.substr(at + 1)};
  };
  auto row_metrics = [&](const char* kind, const std::string& key, const EstimatorMetrics& m) {
    auto [name, p] = split_p(key);
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.10g,%.10g,%.10g,", kind, name.c_str(), p.c_str(),
                  m.mse, m.bias, m.variance);
    out << buf;
    if (m.coverage >= 0.0) {
      std::snprintf(buf, sizeof buf, "%.10g", m.coverage);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",,%d,%d,%llu,%.10g\n", m.count, result.replications,
                  static_cast<unsigned long long>(result.seed), result.failed_fraction);
    out << buf;
  };
  for (const auto& [key, m] : result.gamma_metrics) row_metrics("gamma", key, m);
  for (const auto& [key, m] : result.quantile_metrics) row_metrics("quantile", key, m);
  for (const auto& [key, rate] : result.rejection_rates) {
    auto [name, p] = split_p(key);
    std::snprintf(buf, sizeof buf, "test,%s,%s,,,,,%.10g,,%d,%llu,%.10g\n", name.c_str(), p.c_str(),
                  rate, result.replications, static_cast<unsigned long long>(result.seed),
                  result.failed_fraction);
    out << buf;
  }
}

}  // namespace tailpool
