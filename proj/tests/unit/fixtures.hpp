#pragma once

#include <cmath>

#include "pme/dataset.hpp"
#include "pme/gluing.hpp"

namespace fixtures {

// Noiseless sphere-band sample shared by the ring-fit tests.
inline const pme::PointCloud& sphere_cloud() {
  static const pme::PointCloud cloud =
      pme::generate({pme::Setting::PunchedSphereNoiseless, 2000, 11});
  return cloud;
}

// Six-piece ring fit of the sphere band. Building it dominates the runtime
// of the tests that need one, so it is computed once per test binary.
inline const pme::ClosedFit& sphere_ring_fit() {
  static const pme::ClosedFit cf = [] {
    pme::FitClosedOptions opts;
    // A near-zero fixed penalty converges in a couple of alternations (it is
    // also what per-piece selection picks on this data), keeping the fixture
    // quick and every piece's convergence flag set.
    opts.lambda = std::exp(-15.0);
    opts.fit.reduction.n0 = 10;
    return pme::fit_closed(sphere_cloud().points, 6, opts);
  }();
  return cf;
}

}  // namespace fixtures
