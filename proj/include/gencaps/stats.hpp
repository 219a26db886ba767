#pragma once

#include <span>

namespace gencaps {

struct TTestResult {
  double mean_difference = 0.0;
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Two-sided paired t-test on aligned samples. Identical samples give
/// p = 1; a constant nonzero difference gives p = 0. Throws
/// std::invalid_argument on length mismatch or fewer than 2 pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace gencaps
