#include "pme/stats.hpp"

#include <cmath>

#include "pme/errors.hpp"

namespace pme {

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

namespace {

double normal_pdf(double x) {
  return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0,1)");
  // Symmetry keeps the solve in the lower tail where erfc is accurate.
  if (p > 0.5) return -normal_quantile(1.0 - p);
  double lo = -40.0, hi = 0.0;
  double x = -std::sqrt(-2.0 * std::log(p));  // crude lower-tail start
  if (!(x > lo && x < hi)) x = -1.0;
  for (int it = 0; it < 200; ++it) {
    double f = normal_cdf(x) - p;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    double d = normal_pdf(x);
    double step = d > 0.0 ? f / d : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
    if (std::abs(next - x) <= 1e-16 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace pme
