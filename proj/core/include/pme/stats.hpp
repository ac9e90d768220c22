#pragma once

namespace pme {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, computed by a monotone Newton/bisection solve on
/// the CDF rather than a hard-coded table. Accurate to a few ulp for
/// p in (1e-300, 1 - 1e-16).
double normal_quantile(double p);

}  // namespace pme
