#include "tailpool/filtering.hpp"

#include <algorithm>
#include <stdexcept>

#include "tailpool/tail_core.hpp"

namespace tailpool {

TailFit residual_hill(const ResidualSample& rs, int k) {
  if (rs.residuals.empty()) {
    throw std::invalid_argument("residual_hill: empty residual sample");
  }
  std::vector<double> ascending(rs.residuals);
  std::stable_sort(ascending.begin(), ascending.end());
  return detail::hill_on_sorted(ascending, k);
}

double conditional_quantile(const ResidualSample& rs, double pooled_residual_quantile) {
  if (!(rs.scale_at_z > 0.0)) {
    throw std::invalid_argument("conditional_quantile: scale must be positive");
  }
  if (!(pooled_residual_quantile > 0.0)) {
    throw std::invalid_argument("conditional_quantile: residual quantile must be positive");
  }
  return rs.location_at_z + rs.scale_at_z * pooled_residual_quantile;
}

}  // namespace tailpool
