#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tailpool/errors.hpp"
#include "tailpool/pooling.hpp"
#include "tailpool/rng.hpp"
#include "tailpool/sample.hpp"
#include "tailpool/simulation.hpp"
#include "tailpool/tail_core.hpp"

using namespace tailpool;

namespace {

// Random symmetric positive definite matrix A'A + eps I.
Eigen::MatrixXd random_pd(int m, RngStream& rng) {
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = 2.0 * rng.uniform() - 1.0;
  }
  return a.transpose() * a + 0.05 * Eigen::MatrixXd::Identity(m, m);
}

Eigen::VectorXd random_vec(int m, RngStream& rng, double scale) {
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) b(i) = scale * (2.0 * rng.uniform() - 1.0);
  return b;
}

// Independent constrained minimizer of (w'B)^2 + w'Vw subject to sum w = 1:
// projected gradient on the affine constraint with exact line search.
Eigen::VectorXd projected_gradient_minimizer(const Eigen::VectorXd& b, const Eigen::MatrixXd& v) {
  const int m = static_cast<int>(b.size());
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / m);
  const Eigen::MatrixXd h = 2.0 * (v + b * b.transpose());  // Hessian, constant
  for (int iter = 0; iter < 20000; ++iter) {
    Eigen::VectorXd grad = h * w;
    // Project the gradient onto the sum-zero subspace, then take the exact
    // line-search step t = -g'd / d'Hd along the descent direction d = -Pg.
    Eigen::VectorXd dir = -(grad.array() - grad.mean()).matrix();
    if (dir.norm() < 1e-14) break;
    const double curvature = dir.dot(h * dir);
    if (curvature <= 0.0) break;
    w += (-grad.dot(dir) / curvature) * dir;
  }
  return w;
}

double amse_of(const Eigen::VectorXd& w, const Eigen::VectorXd& b, const Eigen::MatrixXd& v) {
  const double wb = w.dot(b);
  return wb * wb + w.dot(v * w);
}

WeightVector to_weights(const Eigen::VectorXd& w) {
  return WeightVector(std::vector<double>(w.data(), w.data() + w.size()));
}

std::vector<TailFit> fits_with_weissman_values(double q1, double q2, int n, int k) {
  // gamma = 0 makes each marginal extrapolated quantile equal its threshold.
  return {TailFit{0.0, k, q1, n}, TailFit{0.0, k, q2, n}};
}

}  // namespace

TEST_CASE("weight vector validates the unit-sum invariant") {
  CHECK_THROWS_AS(WeightVector({0.2, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(WeightVector(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(WeightVector({0.5, std::numeric_limits<double>::quiet_NaN()}),
                  std::invalid_argument);
  WeightVector w({0.25, 0.75});
  CHECK(w.size() == 2);
  double sum = 0.0;
  for (double x : WeightVector::naive(7).values()) sum += x;
  CHECK(std::fabs(sum - 1.0) <= 1e-12);
  CHECK(WeightVector::one_hot(3, 1).values() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("pooled gamma is an exact weighted sum") {
  std::vector<double> g{1.0, 2.0, 3.0};
  CHECK(pooled_gamma(g, WeightVector::one_hot(3, 2)) == 3.0);
  CHECK(std::fabs(pooled_gamma(g, WeightVector::naive(3)) - 2.0) <= 1e-14);
  std::vector<double> equal{1.7, 1.7, 1.7};
  CHECK(std::fabs(pooled_gamma(equal, WeightVector({0.9, -0.3, 0.4})) - 1.7) <= 1e-12);
  CHECK_THROWS_AS(pooled_gamma(std::vector<double>{1.0}, WeightVector::naive(3)),
                  std::invalid_argument);
}

TEST_CASE("moment estimates under declared independence are exactly diagonal") {
  std::vector<TailFit> fits{TailFit{1.0, 100, 2.0, 1000}, TailFit{1.0, 100, 2.0, 1000}};
  std::vector<SecondOrderFit> so(2);  // beta = 0: zero bias vector
  PooledMoments mo = estimate_moments(fits, so, DependenceInput::independent(2), 1.0);
  CHECK(mo.k_total == 200);
  CHECK(mo.covariance(0, 0) == 2.0);
  CHECK(mo.covariance(1, 1) == 2.0);
  CHECK(mo.covariance(0, 1) == 0.0);
  CHECK(mo.bias(0) == 0.0);
  CHECK(mo.bias(1) == 0.0);
}

TEST_CASE("moment estimates follow the covariance display with dependence") {
  // m = 2, k = (100, 300), pooled gamma plug-in 2, off-diagonal entries
  // chosen so both orientations agree: V12 = V21 = 1.6.
  std::vector<TailFit> fits{TailFit{2.0, 100, 5.0, 1000}, TailFit{2.0, 300, 5.0, 3000}};
  std::vector<SecondOrderFit> so(2);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
  r(0, 1) = 0.1;
  r(1, 0) = 0.3;
  PooledMoments mo = estimate_moments(fits, so, DependenceInput::from_matrix(r), 2.0);
  CHECK(mo.covariance(0, 0)) - (16.0).epsilon(1e-13));
  CHECK(mo.covariance(1, 1) == doctest::Approx(16.0 / 3.0).epsilon(1e-13));
  CHECK(mo.covariance(0, 1) == doctest::Approx(1.6).epsilon(1e-13));
  CHECK(mo.covariance(1, 0) == doctest::Approx(1.6).epsilon(1e-13));
}

TEST_CASE("bias vector scales per the lambda plug-in") {
  std::vector<TailFit> fits{TailFit{1.0, 100, 2.0, 10000}, TailFit{1.0, 100, 2.0, 10000}};
  std::vector<SecondOrderFit> so(2);
  so[0].beta_hat = 1.0;
  so[0].rho_hat = -1.0;
  so[1].beta_hat = 0.0;
  so[1].rho_hat = -1.0;
  PooledMoments mo = estimate_moments(fits, so, DependenceInput::independent(2), 1.0);
  // lambda_1 = sqrt(100) * 1 * 1 * (10000/100)^{-1} = 0.1;
  // B_1 = sqrt(200) * (0.1 / 10) / 2.
  CHECK(mo.bias(0) == doctest::Approx(std::sqrt(200.0) * 0.005).epsilon(1e-13));
  CHECK(mo.bias(1) == 0.0);
}

TEST_CASE("variance-optimal weights on diagonal covariance are inverse variances") {
  Eigen::VectorXd diag(3);
  diag << 2.0, 4.0, 8.0;
  WeightVector w = variance_optimal_weights(diag.asDiagonal());
  const double norm = 1.0 / 2.0 + 1.0 / 4.0 + 1.0 / 8.0;
  CHECK(w[0] == doctest::Approx(0.5 / norm).epsilon(1e-13));
  CHECK(w[1] == doctest::Approx(0.25 / norm).epsilon(1e-13));
  CHECK(w[2] == doctest::Approx(0.125 / norm).epsilon(1e-13));
}

TEST_CASE("two samples with equal variances always pool half-and-half") {
  RngStream rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const double v = 0.5 + 4.0 * rng.uniform();
    const double off = v * (2.0 * rng.uniform() - 1.0) * 0.99;
    Eigen::MatrixXd m(2, 2);
    m << v, off, off, v;
    WeightVector w = variance_optimal_weights(m);
    CHECK(std::fabs(w[0] - 0.5) < 1e-10);
    CHECK(std::fabs(w[1] - 0.5) < 1e-10);
  }
}

TEST_CASE("variance-optimal weights reject singular matrices") {
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(variance_optimal_weights(singular), numerical_error);
}

TEST_CASE("variance-optimal weights beat a refined grid search") {
  RngStream rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd v = random_pd(3, rng);
    WeightVector w = variance_optimal_weights(v);
    Eigen::VectorXd we = w.as_eigen();
    const double opt = we.dot(v * we);

    // Two-stage grid over (w1, w2), w3 = 1 - w1 - w2, extended past the simplex.
    double best = 1e300, b1 = 0, b2 = 0;
    for (double w1 = -1.0; w1 <= 2.0; w1 += 0.01) {
      for (double w2 = -1.0; w2 <= 2.0; w2 += 0.01) {
        Eigen::Vector3d u(w1, w2, 1.0 - w1 - w2);
        const double val = u.dot(v * u);
        if (val < best) {
          best = val;
          b1 = w1;
          b2 = w2;
        }
      }
    }
    for (double w1 = b1 - 0.012; w1 <= b1 + 0.012; w1 += 2e-4) {
      for (double w2 = b2 - 0.012; w2 <= b2 + 0.012; w2 += 2e-4) {
        Eigen::Vector3d u(w1, w2, 1.0 - w1 - w2);
        best = std::min(best, u.dot(v * u));
      }
    }
    CHECK(opt <= best + 1e-9);
    CHECK(opt == doctest::Approx(best).epsilon(1e-3));
  }
}

TEST_CASE("AMSE-optimal weights reduce to variance-optimal when bias vanishes") {
  RngStream rng(79);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform() * 4.999);
    PooledMoments mo;
    mo.covariance = random_pd(m, rng);
    mo.bias = Eigen::VectorXd::Zero(m);
    mo.k_total = 100;
    WeightVector wa = amse_optimal_weights(mo);
    WeightVector wv = variance_optimal_weights(mo.covariance);
    for (int j = 0; j < m; ++j) {
      CHECK(std::fabs(wa[j] - wv[j]) < 1e-10);
    }

    // A bias shared by every sample cannot be weighted away either.
    mo.bias = Eigen::VectorXd::Constant(m, 0.8);
    WeightVector wc = amse_optimal_weights(mo);
    for (int j = 0; j < m; ++j) {
      CHECK(std::fabs(wc[j] - wv[j]) < 1e-10);
    }
  }
}

TEST_CASE("AMSE-optimal weights match an independent constrained minimizer") {
  RngStream rng(83);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 3;
    PooledMoments mo;
    mo.covariance = random_pd(m, rng);
    mo.bias = random_vec(m, rng, 2.0);
    mo.k_total = 50;
    WeightVector w = amse_optimal_weights(mo);
    Eigen::VectorXd oracle = projected_gradient_minimizer(mo.bias, mo.covariance);
    for (int j = 0; j < m; ++j) {
      CHECK(std::fabs(w[j] - oracle(j)) < 1e-3);
    }
    CHECK(amse_value(w, mo) ==
          doctest::Approx(amse_of(oracle, mo.bias, mo.covariance)).epsilon(1e-6));

    // Closed-form optimum value identity.
    Eigen::LLT<Eigen::MatrixXd> llt(mo.covariance);
    const double s_bb = mo.bias.dot(llt.solve(mo.bias));
    const double s_1b = llt.solve(mo.bias).sum();
    const double s_11 = llt.solve(Eigen::VectorXd::Ones(m)).sum();
    const double closed = (1.0 + s_bb) / ((1.0 + s_bb) * s_11 - s_1b * s_1b);
    CHECK(amse_value(w, mo) == doctest::Approx(closed).epsilon(1e-10));

    // No unit-sum competitor does better.
    for (int c = 0; c < 100; ++c) {
      Eigen::VectorXd u = random_vec(m, rng, 1.5);
      u.array() += (1.0 - u.sum()) / m;
      CHECK(amse_value(w, mo) <= amse_of(u, mo.bias, mo.covariance) + 1e-12);
    }
  }
}

TEST_CASE("amse_value arithmetic and expansion oracle") {
  PooledMoments mo;
  mo.covariance = Eigen::MatrixXd::Identity(2, 2);
  mo.bias = Eigen::VectorXd::Zero(2);
  mo.k_total = 10;
  CHECK(amse_value(WeightVector::one_hot(2, 0), mo) == 1.0);

  mo.bias = Eigen::VectorXd::Ones(2);
  CHECK(amse_value(WeightVector::naive(2), mo) == doctest::Approx(1.5).epsilon(1e-14));

  RngStream rng(89);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 4;
    mo.covariance = random_pd(m, rng);
    mo.bias = random_vec(m, rng, 1.0);
    Eigen::VectorXd u = random_vec(m, rng, 1.0);
    u.array() += (1.0 - u.sum()) / m;
    WeightVector w = to_weights(u);
    long double brute = 0.0L;
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l < m; ++l) brute += u(j) * u(l) * mo.covariance(j, l);
    }
    long double wb = 0.0L;
    for (int j = 0; j < m; ++j) wb += u(j) * mo.bias(j);
    brute += wb * wb;
    CHECK(amse_value(w, mo) == doctest::Approx(static_cast<double>(brute)).epsilon(1e-12));
  }
}

TEST_CASE("bias-reduced estimate subtracts exactly the estimated bias") {
  PooledMoments mo;
  mo.covariance = Eigen::MatrixXd::Identity(2, 2);
  mo.bias = Eigen::VectorXd::Constant(2, 0.5);
  mo.k_total = 100;
  std::vector<double> gammas{1.2, 1.2};
  PooledEstimate est = make_pooled_estimate(gammas, WeightVector::naive(2), mo, PoolScheme::naive);
  PooledEstimate reduced = bias_reduced_gamma(est, mo);
  CHECK(reduced.gamma == doctest::Approx(1.15).epsilon(1e-14));
  CHECK(reduced.bias_reduced);

  mo.bias = Eigen::VectorXd::Zero(2);
  PooledEstimate unchanged = bias_reduced_gamma(est, mo);
  CHECK(unchanged.gamma == est.gamma);
}

TEST_CASE("bias reduction shrinks the Burr mean bias") {
  // Simulation oracle: with strong second-order bias the corrected pooled
  // estimate is closer to the truth on average than the raw one.
  ExperimentConfig cfg;
  cfg.model.marginal = MarginalSpec::burr(1.0, -0.5);
  cfg.model.copula = CopulaSpec::independence();
  cfg.model.sizes = {2000, 2000};
  cfg.k_fractions = {0.2};
  cfg.replications = 150;
  cfg.seed = 424242;
  cfg.run_tests = false;
  cfg.threads = 0;
  ExperimentResult res = run_experiment(cfg);
  const double raw = std::fabs(res.gamma_metrics.at("pool_var_opt").bias);
  const double reduced = std::fabs(res.gamma_metrics.at("pool_var_opt_br").bias);
  CHECK(reduced < raw);
}

TEST_CASE("geometric pooling collapses to marginals in the degenerate cases") {
  auto fits = fits_with_weissman_values(100.0, 400.0, 1000, 100);
  const double p = 0.01;
  CHECK(geometric_pooled_weissman(fits, WeightVector::one_hot(2, 1), p) ==
        doctest::Approx(400.0).epsilon(1e-13));
  auto equal = fits_with_weissman_values(64.0, 64.0, 1000, 100);
  CHECK(geometric_pooled_weissman(equal, WeightVector({0.3, 0.7}), p) ==
        doctest::Approx(64.0).epsilon(1e-13));
  CHECK(arithmetic_pooled_weissman(equal, WeightVector({0.3, 0.7}), p) ==
        doctest::Approx(64.0).epsilon(1e-13));
}

TEST_CASE("geometric and arithmetic pooling match the 100/400 example") {
  auto fits = fits_with_weissman_values(100.0, 400.0, 1000, 100);
  const double p = 0.01;
  WeightVector w = WeightVector::naive(2);
  CHECK(geometric_pooled_weissman(fits, w, p) == doctest::Approx(200.0).epsilon(1e-13));
  CHECK(arithmetic_pooled_weissman(fits, w, p) == doctest::Approx(250.0).epsilon(1e-13));
}

TEST_CASE("arithmetic pooling dominates geometric under nonnegative weights") {
  RngStream rng(97);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TailFit> fits;
    const int m = 2 + static_cast<int>(rng.uniform() * 3.999);
    std::vector<double> w(static_cast<std::size_t>(m));
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      fits.push_back(TailFit{2.0 * rng.uniform(), 100, 0.5 + 10.0 * rng.uniform(), 1000});
      w[static_cast<std::size_t>(j)] = rng.uniform();
      sum += w[static_cast<std::size_t>(j)];
    }
    for (auto& x : w) x /= sum;
    WeightVector wv(w);
    const double p = 0.01;
    CHECK(arithmetic_pooled_weissman(fits, wv, p) >=
          geometric_pooled_weissman(fits, wv, p) - 1e-12);
  }
}

TEST_CASE("geometric pooling is scale equivariant") {
  RngStream rng(101);
  std::vector<double> raw(800);
  for (auto& v : raw) v = std::pow(1.0 - rng.uniform(), -0.9);
  SortedSample s1 = SortedSample::from_unsorted(raw, "a");
  for (auto& v : raw) v *= 11.0;
  SortedSample s2 = SortedSample::from_unsorted(raw, "b");
  std::vector<TailFit> f1{hill_estimate(s1, 80), hill_estimate(s1, 40)};
  std::vector<TailFit> f2{hill_estimate(s2, 80), hill_estimate(s2, 40)};
  WeightVector w({0.6, 0.4});
  CHECK(geometric_pooled_weissman(f2, w, 1e-3) ==
        doctest::Approx(11.0 * geometric_pooled_weissman(f1, w, 1e-3)).epsilon(1e-11));
}

TEST_CASE("shared-index extrapolation") {
  TailFit fit{0.7, 100, 2.0, 1000};
  // pooled index 1 at k/(np) = 100 -> 100^1 * 2.
  CHECK(shared_gamma_weissman(fit, 1.0, 0.001) == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(shared_gamma_weissman(fit, 0.0, 0.001) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(shared_gamma_weissman(fit, fit.gamma_hat, 0.001) ==
        doctest::Approx(weissman_quantile(fit, 0.001)).epsilon(1e-14));
}

TEST_CASE("pooled Weissman rejects p beyond any sample fraction") {
  std::vector<TailFit> fits{TailFit{1.0, 100, 1.0, 1000}, TailFit{1.0, 10, 1.0, 1000}};
  WeightVector w = WeightVector::naive(2);
  CHECK_THROWS_AS(geometric_pooled_weissman(fits, w, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(arithmetic_pooled_weissman(fits, w, 0.05), std::invalid_argument);
}

TEST_CASE("simplex projection returns nonnegative unit-sum weights") {
  WeightVector w({1.4, -0.3, -0.1});
  WeightVector p = project_to_simplex(w);
  double sum = 0.0;
  for (double x : p.values()) {
    CHECK(x >= 0.0);
    sum += x;
  }
  CHECK(std::fabs(sum - 1.0) <= 1e-12);
  WeightVector q({0.2, 0.3, 0.5});
  WeightVector qp = project_to_simplex(q);
  for (int j = 0; j < 3; ++j) CHECK(std::fabs(qp[j] - q[j]) <= 1e-12);
}

TEST_CASE("PSD repair floors negative eigenvalues and keeps PD matrices intact") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  Eigen::MatrixXd fixed = repair_psd(bad);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fixed);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  Eigen::MatrixXd good(2, 2);
  good << 2.0, 0.3, 0.3, 1.0;
  Eigen::MatrixXd same = repair_psd(good);
  CHECK(same(0, 1) == 0.3);
  CHECK(same(0, 0) == 2.0);

  CHECK_THROWS_AS(repair_psd(-Eigen::MatrixXd::Identity(2, 2)), numerical_error);
}
