#pragma once

#include <vector>

#include "tailpool/sample.hpp"

namespace tailpool {

/// Within-sample ranks of two co-indexed series restricted to their common
/// index range, plus the effective size k_pair governing the tail window.
/// Ties get average ranks, so ranks are reals in [1, n_overlap].
struct PairedRanks {
  int n_overlap = 0;
  std::vector<double> ranks_a;
  std::vector<double> ranks_b;
  int k_pair = 0;
};

/// Pair two series over their first min(n_a, n_b) co-indexed observations.
/// The shorter series contributes its own effective size: k_pair = k_a if
/// n_a < n_b, else k_b.
PairedRanks build_paired_ranks(const Series& a, const Series& b, int k_a, int k_b);

/// Rank-based estimate of the upper tail copula R(u, v): the normalized
/// count of observations whose ranks fall in the joint top window scaled by
/// k_pair. Nondecreasing in each argument; at most one argument may be
/// infinite.
double empirical_tail_copula(const PairedRanks& pr, double u, double v);

/// empirical_tail_copula with both arguments clamped to [1/k_pair, k_pair],
/// the window outside which the estimator saturates. Used when plugging
/// ratio arguments into covariance estimates.
double tail_copula_clamped(const PairedRanks& pr, double u, double v);

}  // namespace tailpool
