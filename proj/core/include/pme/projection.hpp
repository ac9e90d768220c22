#pragma once

#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace pme {

struct ProjectOptions {
  /// Search box, d x 2 (columns: lo, hi). Empty means the knot bounding box
  /// inflated by 50% per axis.
  Matrix box;
  /// Coarse starts per axis; 0 picks the default 30/15/8 for d = 1/2/3.
  int coarse_per_axis = 0;
  /// Local refinement stops when the step drops below this fraction of the
  /// box diameter.
  double refine_tol_factor = 1e-8;
  /// Two minima tie when their distances differ by less than this fraction
  /// of the best distance.
  double tie_tol_factor = 1e-6;
  int max_iter = 200;
};

struct Projection {
  Vector t;        // arg min parameter after the tie-break
  double dist2;    // squared distance at t
  int n_minima;    // distinct local minima found across starts
};

/// Default search box for a fitted map: knot bounding box inflated by 50%.
Matrix default_box(const SplineMap& f);

/// Projection index: nearest-parameter search by multi-start descent from
/// every coarse-grid node. All local minima within the distance tie tolerance
/// of the best are collected and the lexicographically largest parameter wins
/// (sup rule; deterministic for identical inputs).
Projection project(const SplineMap& f, const Vector& x,
                   const ProjectOptions& opts = {});

struct BatchProjection {
  Matrix t;      // one row per input point
  Vector dist2;  // squared distances
};

/// Shares the coarse-grid evaluations of f across all points; rows are
/// processed in parallel and each row agrees with the single-point result to
/// floating-point roundoff (the vectorized block arithmetic is not bitwise
/// identical to the scalar path). Output is independent of the thread count.
BatchProjection project_batch(const SplineMap& f, const Matrix& X,
                              const ProjectOptions& opts = {});

}  // namespace pme
