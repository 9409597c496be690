#pragma once

#include <vector>

#include "tailpool/sample.hpp"

namespace tailpool {

/// Externally produced residuals of a location-scale fit, together with the
/// fitted location and scale at the covariate value of interest. Model
/// fitting itself stays outside this library; the tail theory only needs
/// the residuals.
struct ResidualSample {
  std::vector<double> residuals;  // original order, may contain negatives
  double location_at_z = 0.0;     // fitted location g(z)
  double scale_at_z = 1.0;        // fitted scale sigma(z), > 0
};

/// Hill estimator on the residual order statistics. Only the top k+1
/// residuals must be positive; the body of the sample may be negative.
TailFit residual_hill(const ResidualSample& rs, int k);

/// Conditional quantile recomposition g(z) + sigma(z) * q, where q is a
/// pooled extrapolated quantile of the residual distribution.
double conditional_quantile(const ResidualSample& rs, double pooled_residual_quantile);

}  // namespace tailpool
