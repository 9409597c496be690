#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tailpool/rng.hpp"
#include "tailpool/sample.hpp"

namespace tailpool {

enum class MarginalFamily { pareto, frechet, burr, abs_student_t };

/// Heavy-tailed marginal. Burr uses the survival function
/// (1 + x^{-rho/gamma})^{1/rho}, so gamma and rho are directly the first-
/// and second-order tail parameters.
struct MarginalSpec {
  MarginalFamily family = MarginalFamily::pareto;
  double gamma = 1.0;
  double rho = -1.0;  // burr only
  double df = 1.0;    // abs_student_t only

  static MarginalSpec pareto(double gamma);
  static MarginalSpec frechet(double gamma);
  static MarginalSpec burr(double gamma, double rho);
  static MarginalSpec abs_student_t(double df);
};

/// Quantile function at level u in (0, 1). The folded Student-t is inverted
/// numerically to |error| < 1e-10; the others are closed-form.
double marginal_quantile(const MarginalSpec& spec, double u);

/// Tail index of the marginal (1/df for the folded Student-t).
double true_tail_index(const MarginalSpec& spec);

/// Known second-order parameter: rho for Burr, -1 for Frechet, -2/df for
/// the folded Student-t, 0 for the pure Pareto (no second-order term).
double true_rho(const MarginalSpec& spec);

enum class CopulaFamily { independence, clayton, gumbel, gaussian, student };

struct CopulaSpec {
  CopulaFamily family = CopulaFamily::independence;
  double theta = 1.0;  // clayton (> 0) / gumbel (>= 1)
  double r = 0.0;      // gaussian / student correlation
  double df = 4.0;     // student copula degrees of freedom

  static CopulaSpec independence();
  static CopulaSpec clayton(double theta);
  static CopulaSpec gumbel(double theta);
  static CopulaSpec gaussian(double r);
  static CopulaSpec student(double r, double df);
};

/// Draws joint uniform vectors with the requested copula. Clayton and Gumbel
/// go through their frailty constructions, Gaussian and Student through
/// correlated normals; everything is inverse-transform based so a seed fixes
/// the output exactly.
class CopulaSampler {
 public:
  CopulaSampler(const CopulaSpec& spec, int m);
  void draw(RngStream& rng, std::vector<double>& u) const;
  int dimension() const { return m_; }

 private:
  CopulaSpec spec_;
  int m_;
  std::vector<double> chol_;  // packed lower-triangular factor, gaussian/student
};

/// Generative model: common marginal family, copula across samples, and the
/// per-sample sizes (their count is the number of samples m).
struct ModelSpec {
  MarginalSpec marginal;
  CopulaSpec copula;
  std::vector<int> sizes;

  int m() const { return static_cast<int>(sizes.size()); }
};

/// Draw the model: sample j holds the first sizes[j] entries of the joint
/// stream, so samples are co-indexed up to the shortest length. Series ids
/// are "s001", "s002", ... Deterministic given the seed.
std::vector<Series> sample_model(const ModelSpec& spec, std::uint64_t seed);

enum class Pipeline { pooled, distributed };

struct ExperimentConfig {
  ModelSpec model;
  /// Per-sample effective-size fractions k_j = max(1, floor(f_j n_j)); a
  /// single entry is recycled, an empty list means the default k rule.
  std::vector<double> k_fractions;
  std::vector<double> p_levels;
  /// Per-sample tail index overrides (test alternatives); empty = the
  /// common model value. Only meaningful for pareto/frechet/burr marginals.
  std::vector<double> per_sample_gamma;
  /// Per-sample scale multipliers (homoskedasticity alternatives).
  std::vector<double> per_sample_scale;
  int replications = 100;
  std::uint64_t seed = 1;
  double ci_level = 0.95;
  double test_alpha = 0.05;
  /// Use the summary-based aggregation path instead of full-data pooling.
  Pipeline pipeline = Pipeline::pooled;
  /// Treat samples as independent in moment/test plug-ins instead of
  /// estimating the pairwise tail copulas.
  bool declare_independence = true;
  bool run_tests = true;
  /// Second-order estimation drives the AMSE-optimal and bias-reduced
  /// estimators; switched off automatically when any sample is too short.
  bool second_order = true;
  double tuning = 0.0;
  int threads = 1;  // 0 = hardware concurrency
  /// Retain per-replication error series (for bootstrap post-processing).
  bool keep_errors = false;
};

struct EstimatorMetrics {
  double mse = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double coverage = -1.0;  // -1 when no interval is attached
  int count = 0;
};

struct ExperimentResult {
  /// Tail-index estimators, error scale gamma_hat - gamma.
  std::map<std::string, EstimatorMetrics> gamma_metrics;
  /// Quantile estimators keyed "name@p", error scale q_hat/q - 1.
  std::map<std::string, EstimatorMetrics> quantile_metrics;
  std::map<std::string, double> rejection_rates;
  std::map<std::string, std::vector<double>> gamma_errors;     // keep_errors only
  std::map<std::string, std::vector<double>> quantile_errors;  // keep_errors only
  int replications = 0;
  std::uint64_t seed = 0;
  double failed_fraction = 0.0;
};

/// Run the full Monte Carlo comparison: combined-data Hill/Weissman
/// benchmarks, the pooled/distributed estimators under naive, variance-
/// optimal and AMSE-optimal weights with their bias-reduced versions,
/// confidence-interval coverage, and the two deviance tests. Replications
/// use counter-based seed substreams, so results are identical for any
/// thread count. Failed replications are recorded, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Parse the key = value experiment description (see README for keys).
ExperimentConfig parse_experiment_config(std::istream& in);

/// One CSV row per estimator/test, plot-ready.
void write_experiment_csv(const ExperimentResult& result, std::ostream& out);

}  // namespace tailpool
