#pragma once

// Small summary statistics used by the experiment harness.

#include <vector>

namespace mirror_sinkhorn {

// Linearly interpolated quantile of the sorted sample: position
// q (N - 1) between order statistics. q in [0, 1]; throws on an empty
// sample.
double percentile(std::vector<double> values, double q);

double median(std::vector<double> values);

// Least-squares slope of log y against log x. Throws DomainError on a
// non-positive value or fewer than two points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mirror_sinkhorn
