#pragma once

#include <span>
#include <vector>

namespace kelvinlab {

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Pairwise summation in fixed order; independent of thread scheduling.
double pairwise_sum(std::span<const double> v);

struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
  double stderr_mean = 0.0;
  std::size_t n = 0;
};

SampleStats sample_stats(std::span<const double> v);

/// Pearson correlation coefficient.
double correlation(std::span<const double> a, std::span<const double> b);

}  // namespace kelvinlab
