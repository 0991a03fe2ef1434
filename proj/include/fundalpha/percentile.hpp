#pragma once

#include <span>

namespace fundalpha {

/// Linear interpolation between order statistics of an ascending vector:
/// h = (n-1) * p / 100, value = v[floor h] + frac(h) * (v[floor h + 1] - v[floor h]).
/// Throws std::invalid_argument on an empty vector or p outside [0, 100].
double percentile(std::span<const double> sorted, double p);

} // namespace fundalpha
