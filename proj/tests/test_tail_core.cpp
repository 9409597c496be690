#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tailpool/rng.hpp"
#include "tailpool/sample.hpp"
#include "tailpool/simulation.hpp"
#include "tailpool/tail_core.hpp"

using namespace tailpool;

namespace {

const double kE = std::exp(1.0);

SortedSample geometric_four() {
  return SortedSample({1.0, kE, kE * kE, kE * kE * kE}, "geo");
}

std::vector<double> pareto_sample(double gamma, int n, RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = std::pow(1.0 - rng.uniform(), -gamma);
  return v;
}

}  // namespace

TEST_CASE("Hill estimate is exact on log-spaced tails") {
  SortedSample s = geometric_four();
  CHECK(std::fabs(hill_estimate(s, 2).gamma_hat - 1.5) <= 1e-14);
  CHECK(std::fabs(hill_estimate(s, 2).threshold - kE) <= 1e-14);
  CHECK(std::fabs(hill_estimate(s, 1).gamma_hat - 1.0) <= 1e-14);
}

TEST_CASE("Hill estimate is zero on constant samples") {
  SortedSample s({2.5, 2.5, 2.5, 2.5, 2.5}, "flat");
  for (int k = 1; k <= 4; ++k) {
    CHECK(hill_estimate(s, k).gamma_hat == 0.0);
  }
}

TEST_CASE("Hill estimate preconditions") {
  SortedSample s = geometric_four();
  CHECK_THROWS_AS(hill_estimate(s, 0), std::invalid_argument);
  CHECK_THROWS_AS(hill_estimate(s, 4), std::invalid_argument);
  CHECK_THROWS_AS(SortedSample({0.0, 1.0}, "bad"), std::invalid_argument);
  CHECK_THROWS_AS(SortedSample({-1.0, 1.0}, "bad"), std::invalid_argument);
  CHECK_THROWS_AS(SortedSample({2.0, 1.0}, "bad"), std::invalid_argument);
  CHECK_THROWS_AS(SortedSample({}, "bad"), std::invalid_argument);
}

TEST_CASE("Hill estimate is scale invariant") {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto values = pareto_sample(0.8, 200, rng);
    SortedSample s = SortedSample::from_unsorted(values, "a");
    for (auto& v : values) v *= 37.5;
    SortedSample sc = SortedSample::from_unsorted(values, "b");
    const int k = default_k(200);
    CHECK(std::fabs(hill_estimate(s, k).gamma_hat - hill_estimate(sc, k).gamma_hat) <= 1e-12);
  }
}

TEST_CASE("Hill estimate equals the mean of exact log-spacings on Pareto tails") {
  // Independent route: accumulate the k log-excesses in long double.
  RngStream rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto values = pareto_sample(1.3, 500, rng);
    SortedSample s = SortedSample::from_unsorted(values, "p");
    const int k = 60;
    long double acc = 0.0L;
    for (int i = 0; i < k; ++i) {
      acc += std::log(static_cast<long double>(s.order_statistic(500 - i))) -
             std::log(static_cast<long double>(s.order_statistic(500 - k)));
    }
    CHECK(std::fabs(hill_estimate(s, k).gamma_hat - static_cast<double>(acc / k)) <= 1e-13);
  }
}

TEST_CASE("Hill estimate concentrates at the Frechet tail index") {
  // Monte Carlo oracle: replication mean within 0.05 of gamma = 1.
  const MarginalSpec frechet = MarginalSpec::frechet(1.0);
  RngStream rng(101);
  double mean = 0.0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> v(10000);
    for (auto& x : v) x = marginal_quantile(frechet, rng.uniform());
    SortedSample s = SortedSample::from_unsorted(std::move(v), "f");
    mean += hill_estimate(s, 500).gamma_hat;
  }
  mean /= reps;
  CHECK(std::fabs(mean - 1.0) < 0.05);
}

TEST_CASE("Weissman quantile with zero index returns the threshold") {
  TailFit fit{0.0, 10, 7.25, 1000};
  for (double p : {1e-6, 1e-4, 0.009}) {
    CHECK(std::fabs(weissman_quantile(fit, p) - 7.25) <= 1e-14);
  }
}

TEST_CASE("Weissman quantile extrapolation arithmetic") {
  // k/(np) = 100, gamma = 0.5, threshold = 3 -> sqrt(100) * 3 = 30.
  TailFit fit{0.5, 100, 3.0, 1000};
  CHECK(weissman_quantile(fit, 0.001) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(weissman_quantile(fit, 0.001, 0.0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("Weissman quantile is strictly decreasing in p") {
  TailFit fit{0.7, 50, 2.0, 2000};
  double prev = std::numeric_limits<double>::infinity();
  for (double p = 1e-6; p < 0.025; p *= 2.7) {
    double q = weissman_quantile(fit, p);
    CHECK(q < prev);
    prev = q;
  }
}

TEST_CASE("Weissman quantile rejects p outside the extrapolation range") {
  TailFit fit{1.0, 10, 1.0, 100};
  CHECK_THROWS_AS(weissman_quantile(fit, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(weissman_quantile(fit, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(weissman_quantile(fit, 0.5), std::invalid_argument);
}

TEST_CASE("Weissman quantile is scale equivariant") {
  RngStream rng(13);
  auto values = pareto_sample(1.1, 400, rng);
  SortedSample s = SortedSample::from_unsorted(values, "a");
  for (auto& v : values) v *= 4.0;
  SortedSample sc = SortedSample::from_unsorted(values, "b");
  TailFit f = hill_estimate(s, 40);
  TailFit fc = hill_estimate(sc, 40);
  CHECK(weissman_quantile(fc, 1e-3) ==
        doctest::Approx(4.0 * weissman_quantile(f, 1e-3)).epsilon(1e-11));
}

TEST_CASE("Weissman median tracks the true Pareto quantile") {
  // Monte Carlo oracle at p = 1/n: replication median within 15% of 1/p.
  RngStream rng(55);
  const int n = 2000, reps = 401;
  const double p = 1.0 / n;
  std::vector<double> estimates;
  for (int r = 0; r < reps; ++r) {
    auto values = pareto_sample(1.0, n, rng);
    SortedSample s = SortedSample::from_unsorted(std::move(values), "p");
    estimates.push_back(weissman_quantile(hill_estimate(s, default_k(n)), p));
  }
  std::nth_element(estimates.begin(), estimates.begin() + reps / 2, estimates.end());
  const double median = estimates[reps / 2];
  CHECK(std::fabs(median / static_cast<double>(n) - 1.0) < 0.15);
}

TEST_CASE("second-order fit flags pure Pareto data as degenerate") {
  RngStream rng(17);
  auto values = pareto_sample(1.0, 10000, rng);
  SortedSample s = SortedSample::from_unsorted(std::move(values), "pareto");
  SecondOrderFit fit = second_order_estimate(s);
  CHECK(fit.degenerate);
  CHECK(fit.rho_hat == 0.0);
  CHECK(fit.beta_hat == 0.0);
}

TEST_CASE("second-order fit flags constant tails as degenerate") {
  std::vector<double> values(200, 3.0);
  SortedSample s(values, "flat");
  SecondOrderFit fit = second_order_estimate(s);
  CHECK(fit.degenerate);
}

TEST_CASE("second-order fit requires a minimum sample size") {
  RngStream rng(19);
  auto values = pareto_sample(1.0, 49, rng);
  SortedSample s = SortedSample::from_unsorted(std::move(values), "short");
  CHECK_THROWS_AS(second_order_estimate(s), std::invalid_argument);
}

TEST_CASE("second-order rho recovers the Burr parameter") {
  // Monte Carlo oracle: true rho = -1 by construction; replication median
  // of rho_hat within [-1.4, -0.7].
  const MarginalSpec burr = MarginalSpec::burr(1.0, -1.0);
  RngStream rng(23);
  const int reps = 101;
  std::vector<double> rhos;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> v(10000);
    for (auto& x : v) x = marginal_quantile(burr, rng.uniform());
    SortedSample s = SortedSample::from_unsorted(std::move(v), "b");
    SecondOrderFit fit = second_order_estimate(s);
    CHECK_FALSE(fit.degenerate);
    rhos.push_back(fit.rho_hat);
  }
  std::nth_element(rhos.begin(), rhos.begin() + reps / 2, rhos.end());
  const double median = rhos[reps / 2];
  CHECK(median >= -1.4);
  CHECK(median <= -0.7);
}

TEST_CASE("second-order fit matches a direct evaluation of its moment ratios") {
  // Fixed deterministic reference array: Burr(1, -0.5) quantiles on a
  // uniform grid, evaluated independently below in long double.
  const MarginalSpec burr = MarginalSpec::burr(1.0, -0.5);
  std::vector<double> values(100);
  for (int i = 0; i < 100; ++i) {
    values[static_cast<std::size_t>(i)] = marginal_quantile(burr, (i + 1) / 101.0);
  }
  SortedSample s = SortedSample::from_unsorted(values, "ref");
  SecondOrderFit fit = second_order_estimate(s, 0.0);
  REQUIRE_FALSE(fit.degenerate);

  const int n = 100;
  const int k = fit.k_second;
  REQUIRE(k == std::min(n - 1, static_cast<int>(std::floor(std::pow(100.0, 0.995)))));
  std::sort(values.begin(), values.end());
  long double m1 = 0, m2 = 0, m3 = 0;
  for (int i = 1; i <= k; ++i) {
    long double e = std::log(static_cast<long double>(values[static_cast<std::size_t>(n - i)])) -
                    std::log(static_cast<long double>(values[static_cast<std::size_t>(n - k - 1)]));
    m1 += e;
    m2 += e * e;
    m3 += e * e * e;
  }
  m1 /= k;
  m2 /= k;
  m3 /= k;
  const long double num = std::log(m1) - 0.5L * std::log(m2 / 2.0L);
  const long double den = 0.5L * std::log(m2 / 2.0L) - std::log(m3 / 6.0L) / 3.0L;
  const long double t = num / den;
  long double rho = -std::fabs(3.0L * (t - 1.0L) / (t - 3.0L));
  if (rho < -20.0L) rho = -20.0L;
  CHECK(fit.rho_hat == doctest::Approx(static_cast<double>(rho)).epsilon(1e-12));

  long double d_rho = 0, s0 = 0, s_rho = 0, s_2rho = 0;
  for (int i = 1; i <= k; ++i) {
    long double u =
        i * (std::log(static_cast<long double>(values[static_cast<std::size_t>(n - i)])) -
             std::log(static_cast<long double>(values[static_cast<std::size_t>(n - i - 1)])));
    long double w = std::pow(static_cast<long double>(i) / k, -rho);
    d_rho += w;
    s0 += u;
    s_rho += w * u;
    s_2rho += w * w * u;
  }
  d_rho /= k;
  s0 /= k;
  s_rho /= k;
  s_2rho /= k;
  const long double beta = std::pow(static_cast<long double>(k) / n, rho) *
                           (d_rho * s0 - s_rho) / (d_rho * s_rho - s_2rho);
  CHECK(fit.beta_hat == doctest::Approx(static_cast<double>(beta)).epsilon(1e-10));
}

TEST_CASE("lambda_hat arithmetic") {
  SecondOrderFit so;
  so.beta_hat = 0.0;
  so.rho_hat = -1.0;
  CHECK(lambda_hat(1.0, so, 1000, 100) == 0.0);

  so.beta_hat = 0.2;
  so.rho_hat = 0.0;
  CHECK(lambda_hat(1.0, so, 1000, 100) == doctest::Approx(2.0).epsilon(1e-14));

  so.beta_hat = 1.0;
  so.rho_hat = -1.0;
  CHECK(lambda_hat(1.0, so, 10000, 100) == doctest::Approx(0.1).epsilon(1e-14));

  CHECK_THROWS_AS(lambda_hat(1.0, so, 100, 100), std::invalid_argument);
  CHECK_THROWS_AS(lambda_hat(1.0, so, 100, 0), std::invalid_argument);
}

TEST_CASE("default k rule") {
  CHECK(default_k(100) == 25);  // floor(100^0.7)
  CHECK(default_k(2) == 1);
  CHECK(default_k(10000) == 630);
  CHECK_THROWS_AS(default_k(1), std::invalid_argument);
}
