#include "kelvinlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "kelvinlab/error.hpp"

namespace kelvinlab {

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need matching series of length >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw InvalidArgument("loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

SampleStats sample_stats(std::span<const double> v) {
  SampleStats s;
  s.n = v.size();
  if (v.empty()) return s;
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    s.mean = v.front();
    return s;
  }
  s.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() > 1) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - s.mean) * (v[i] - s.mean);
    s.stddev = std::sqrt(pairwise_sum(d) / static_cast<double>(v.size() - 1));
    s.stderr_mean = s.stddev / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("correlation: need matching series");
  const auto sa = sample_stats(a), sb = sample_stats(b);
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = (a[i] - sa.mean) * (b[i] - sb.mean);
  const double cov = pairwise_sum(p) / static_cast<double>(a.size() - 1);
  if (sa.stddev == 0.0 || sb.stddev == 0.0) return 0.0;
  return cov / (sa.stddev * sb.stddev);
}

}  // namespace kelvinlab
