#include "tailpool/sample.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace tailpool {

SortedSample::SortedSample(std::vector<double> ascending_values, std::string origin_id)
    : values_(std::move(ascending_values)), origin_id_(std::move(origin_id)) {
  if (values_.empty()) {
    throw std::invalid_argument("SortedSample: sample '" + origin_id_ + "' is empty");
  }
  double prev = 0.0;
  for (double v : values_) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("SortedSample: sample '" + origin_id_ +
                                  "' contains a nonpositive value");
    }
    if (v < prev) {
      throw std::invalid_argument("SortedSample: sample '" + origin_id_ +
                                  "' is not in ascending order");
    }
    prev = v;
  }
}

SortedSample SortedSample::from_unsorted(std::vector<double> values, std::string origin_id) {
  std::stable_sort(values.begin(), values.end());
  return SortedSample(std::move(values), std::move(origin_id));
}

SortedSample SortedSample::from_series(const Series& series) {
  return from_unsorted(series.values, series.id);
}

}  // namespace tailpool
