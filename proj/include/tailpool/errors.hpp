#pragma once

#include <stdexcept>

namespace tailpool {

/// Linear-algebra or root-finding breakdown (singular covariance, degenerate
/// design). Distinct from std::invalid_argument so callers can map the two
/// classes to different exit codes.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tailpool
