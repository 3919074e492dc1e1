#pragma once

#include <span>

namespace transfit {

/// Linear-interpolation ("type 7") empirical quantile of an ascending sample.
/// p in [0,1]; sample must be non-empty.
double empirical_quantile(std::span<const double> sorted, double p);

double normal_cdf(double x);

/// Inverse standard normal CDF (Wichura AS241, ~1e-16 relative accuracy).
double normal_quantile(double p);

}  // namespace transfit
