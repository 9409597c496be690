#include "tailpool/tail_dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tailpool {

namespace {

// Average ranks (1-based) of the first n entries; ties share the mean of
// the positions they occupy.
std::vector<double> average_ranks(const std::vector<double>& values, int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return values[static_cast<std::size_t>(i)] <
                                              values[static_cast<std::size_t>(j)]; });
  std::vector<double> ranks(static_cast<std::size_t>(n));
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && values[static_cast<std::size_t>(order[static_cast<std::size_t>(j + 1)])] ==
                            values[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]) {
      ++j;
    }
    double shared = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t) {
      ranks[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = shared;
    }
    i = j + 1;
  }
  return ranks;
}

}  // namespace

PairedRanks build_paired_ranks(const Series& a, const Series& b, int k_a, int k_b) {
  const int n_a = static_cast<int>(a.values.size());
  const int n_b = static_cast<int>(b.values.size());
  const int n = std::min(n_a, n_b);
  if (n < 1) {
    throw std::invalid_argument("build_paired_ranks: empty overlap between '" + a.id +
                                "' and '" + b.id + "'");
  }
  PairedRanks pr;
  pr.n_overlap = n;
  pr.k_pair = (n_a < n_b) ? k_a : k_b;
  if (pr.k_pair < 1 || pr.k_pair > n) {
    throw std::invalid_argument("build_paired_ranks: k_pair out of [1, n_overlap]");
  }
  pr.ranks_a = average_ranks(a.values, n);
  pr.ranks_b = average_ranks(b.values, n);
  return pr;
}

double empirical_tail_copula(const PairedRanks& pr, double u, double v) {
  if (!(u >= 0.0) || !(v >= 0.0)) {
    throw std::invalid_argument("empirical_tail_copula: arguments must be nonnegative");
  }
  if (std::isinf(u) && std::isinf(v)) {
    throw std::invalid_argument("empirical_tail_copula: at most one argument may be infinite");
  }
  const double n = pr.n_overlap;
  const double k = pr.k_pair;
  const double scale = k * (n + 1.0) / n;
  const double cut_a = u * scale;
  const double cut_b = v * scale;
  int count = 0;
  for (std::size_t i = 0; i < pr.ranks_a.size(); ++i) {
    if (n + 1.0 - pr.ranks_a[i] <= cut_a && n + 1.0 - pr.ranks_b[i] <= cut_b) {
      ++count;
    }
  }
  return count / k;
}

double tail_copula_clamped(const PairedRanks& pr, double u, double v) {
  const double lo = 1.0 / pr.k_pair;
  const double hi = static_cast<double>(pr.k_pair);
  return empirical_tail_copula(pr, std::clamp(u, lo, hi), std::clamp(v, lo, hi));
}

}  // namespace tailpool
