#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tailpool/rng.hpp"
#include "tailpool/tail_dependence.hpp"

using namespace tailpool;

namespace {

Series uniform_series(const char* id, int n, RngStream& rng) {
  Series s{id, {}};
  s.values.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.values.push_back(rng.uniform());
  return s;
}

}  // namespace

TEST_CASE("paired ranks follow the shorter-sample convention") {
  RngStream rng(3);
  Series a = uniform_series("a", 100, rng);
  Series b = uniform_series("b", 300, rng);
  PairedRanks pr = build_paired_ranks(a, b, 10, 30);
  CHECK(pr.n_overlap == 100);
  CHECK(pr.k_pair == 10);

  // Equal lengths take the second sample's effective size.
  Series c = uniform_series("c", 100, rng);
  PairedRanks pr2 = build_paired_ranks(a, c, 10, 17);
  CHECK(pr2.k_pair == 17);

  Series empty{"e", {}};
  CHECK_THROWS_AS(build_paired_ranks(empty, b, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_paired_ranks(a, b, 512, 512), std::invalid_argument);
}

TEST_CASE("ranks match a hand-sorted five-point oracle") {
  Series a{"a", {3.0, 1.0, 4.0, 1.0, 5.0}};
  Series b{"b", {10.0, 20.0, 30.0, 40.0, 50.0}};
  PairedRanks pr = build_paired_ranks(a, b, 2, 2);
  // Sorted a: 1, 1, 3, 4, 5 -> the two ties share rank (1+2)/2.
  CHECK(pr.ranks_a == std::vector<double>{3.0, 1.5, 4.0, 1.5, 5.0});
  CHECK(pr.ranks_b == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
}

TEST_CASE("tail copula vanishes when either argument is zero") {
  RngStream rng(5);
  Series a = uniform_series("a", 500, rng);
  Series b = uniform_series("b", 500, rng);
  PairedRanks pr = build_paired_ranks(a, b, 50, 50);
  CHECK(empirical_tail_copula(pr, 0.0, 1.0) == 0.0);
  CHECK(empirical_tail_copula(pr, 1.0, 0.0) == 0.0);
  CHECK(empirical_tail_copula(pr, 0.0, 0.0) == 0.0);
}

TEST_CASE("tail copula rejects doubly infinite arguments but allows one") {
  RngStream rng(6);
  Series a = uniform_series("a", 200, rng);
  Series b = uniform_series("b", 200, rng);
  PairedRanks pr = build_paired_ranks(a, b, 20, 20);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(empirical_tail_copula(pr, inf, inf), std::invalid_argument);
  CHECK_THROWS_AS(empirical_tail_copula(pr, -0.5, 1.0), std::invalid_argument);
  CHECK(empirical_tail_copula(pr, inf, 1.0) >= 0.0);
}

TEST_CASE("comonotone series give a tail copula near one at (1,1)") {
  RngStream rng(7);
  Series a = uniform_series("a", 10000, rng);
  Series b{"b", a.values};  // identical ranks
  PairedRanks pr = build_paired_ranks(a, b, 200, 200);
  const double r11 = empirical_tail_copula(pr, 1.0, 1.0);
  CHECK(std::fabs(r11 - 1.0) < 0.05);

  // Direct count oracle: comonotone pairs reduce to one marginal condition.
  const double n = pr.n_overlap, k = pr.k_pair;
  int count = 0;
  for (double rank : pr.ranks_a) {
    if (n + 1.0 - rank <= k * (n + 1.0) / n) ++count;
  }
  CHECK(r11 == count / k);
}

TEST_CASE("independent series give a tail copula near zero at (1,1)") {
  RngStream rng(8);
  double total = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    Series a = uniform_series("a", 10000, rng);
    Series b = uniform_series("b", 10000, rng);
    PairedRanks pr = build_paired_ranks(a, b, 200, 200);
    total += empirical_tail_copula(pr, 1.0, 1.0);
  }
  CHECK(total / reps < 0.06);
}

TEST_CASE("tail copula is nondecreasing in each argument") {
  RngStream rng(9);
  Series a = uniform_series("a", 400, rng);
  Series b{"b", {}};
  // Mix of common and idiosyncratic structure.
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    b.values.push_back(0.6 * a.values[i] + 0.4 * rng.uniform());
  }
  PairedRanks pr = build_paired_ranks(a, b, 40, 40);
  for (double v : {0.2, 0.7, 1.3, 2.0}) {
    double prev_u = -1.0, prev_v = -1.0;
    for (double u = 0.0; u <= 3.0; u += 0.25) {
      double val_u = empirical_tail_copula(pr, u, v);
      double val_v = empirical_tail_copula(pr, v, u);
      CHECK(val_u >= prev_u);
      CHECK(val_v >= prev_v);
      prev_u = val_u;
      prev_v = val_v;
    }
  }
}

TEST_CASE("tail copula respects the marginal bound") {
  RngStream rng(10);
  Series a = uniform_series("a", 600, rng);
  Series b = uniform_series("b", 600, rng);
  PairedRanks pr = build_paired_ranks(a, b, 60, 60);
  const double cap = (pr.n_overlap / static_cast<double>(pr.k_pair)) *
                         (pr.n_overlap / (pr.n_overlap + 1.0)) +
                     1.0;
  for (double u : {0.3, 0.8, 1.0, 2.5}) {
    for (double v : {0.4, 1.0, 1.9}) {
      const double r = empirical_tail_copula(pr, u, v);
      CHECK(r <= empirical_tail_copula(pr, u, cap) + 1e-15);
      CHECK(r <= empirical_tail_copula(pr, cap, v) + 1e-15);
    }
  }
}

TEST_CASE("tail copula is invariant under increasing transforms") {
  RngStream rng(11);
  Series a = uniform_series("a", 300, rng);
  Series b = uniform_series("b", 300, rng);
  Series a_t{"a", a.values};
  for (auto& v : a_t.values) v = std::exp(3.0 * v);
  Series b_t{"b", b.values};
  for (auto& v : b_t.values) v = std::atan(v) + 10.0;
  PairedRanks pr = build_paired_ranks(a, b, 30, 30);
  PairedRanks pr_t = build_paired_ranks(a_t, b_t, 30, 30);
  for (double u : {0.2, 1.0, 1.7}) {
    for (double v : {0.5, 1.0, 2.2}) {
      CHECK(empirical_tail_copula(pr, u, v) == empirical_tail_copula(pr_t, u, v));
    }
  }
}

TEST_CASE("clamped evaluation stays finite at extreme ratio arguments") {
  RngStream rng(12);
  Series a = uniform_series("a", 500, rng);
  Series b = uniform_series("b", 500, rng);
  PairedRanks pr = build_paired_ranks(a, b, 25, 25);
  CHECK(tail_copula_clamped(pr, 1e9, 0.5) == empirical_tail_copula(pr, 25.0, 0.5));
  CHECK(tail_copula_clamped(pr, 1e-9, 0.5) == empirical_tail_copula(pr, 1.0 / 25.0, 0.5));
}
