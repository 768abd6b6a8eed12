#pragma once

#include <cstddef>
#include <span>

namespace benford::stats {

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> values);

struct MannWhitney {
  /// U statistic of the first sample.
  double u = 0.0;
  double z = 0.0;
  /// One-sided p-value for "first sample tends to be larger".
  double p_greater = 1.0;
};

/// Normal approximation with tie-corrected variance and continuity correction.
/// When every value is tied the variance vanishes and p_greater is 1.
/// Throws std::invalid_argument if either sample is empty.
MannWhitney mann_whitney_greater(std::span<const double> first, std::span<const double> second);

}  // namespace benford::stats
