#pragma once

#include <vector>

#include "pme/gluing.hpp"
#include "pme/projection.hpp"
#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace pme {

/// Analytic normal at f(t): the rotated tangent (-f2', f1') for curves in
/// the plane, the jacobian-column cross product for surfaces in 3-space.
/// Only (d, D) = (1, 2) and (2, 3) are supported. May return the zero
/// vector at degenerate parameters.
Vector normal(const SplineMap& f, const Eigen::Ref<const Vector>& t);

/// Which side of the fitted manifold a point falls on.
struct OrientationResult {
  int sign = 0;   // sgn((f(t) - xi)' n(t)); 0 when on-manifold or degenerate
  Vector t;       // projection foot parameter
  Vector normal;  // unnormalized normal at the foot
};

/// Projects xi onto f and reports the sign of the inner product between the
/// foot-to-point offset and the normal there. Sign 0 (no side claim) when
/// the offset norm is below 1e-6 * max(||f(t)||, ||xi||) or |inner| is below
/// 1e-9 * ||offset|| * ||normal||.
OrientationResult orientation(const SplineMap& f, const Vector& xi,
                              const ProjectOptions& opts = {});

/// Per-point interior/exterior decisions over an evaluation grid.
struct GridLabels {
  Matrix points;                      // M x D
  std::vector<Label> label;           // valid where labeled
  std::vector<Provenance> provenance;
  std::vector<char> labeled;          // 0/1; unlabeled rows carry no claim
  int n_unresolved = 0;               // points no rule could decide
  int n_degenerate_lines = 0;         // slice scans with persistent odd crossings

  int count() const { return static_cast<int>(points.rows()); }
};

/// Labels grid points against a closed fit and a reference point marking the
/// interior side. A point outside every junction's data box is exterior
/// (box-reject). Otherwise the junction with the nearest containing box
/// center supplies the piece pair (f_k, f_k+1): agreeing with the reference
/// under both pieces is interior, disagreeing under both is exterior, and
/// mixed cases take a 10-nearest-neighbor vote among the decided points of
/// the same box (ties vote exterior). Mixed points in a box with no decided
/// points stay unlabeled and are counted in n_unresolved.
GridLabels classify_grid(const ClosedFit& cf, const Vector& c_star,
                         const Matrix& grid, const ProjectOptions& opts = {});

/// Slice-scan interior labeling of a 3-D lattice from slice-tagged boundary
/// points: per z-plane, the tagged points are ordered by angle around their
/// centroid into a closed polygon, and lattice points between odd-even
/// crossing pairs of each vertical line are interior. Lines whose crossing
/// count stays odd after one perturbed retry are skipped and counted in
/// n_degenerate_lines; planes with fewer than 3 tagged points stay unlabeled.
GridLabels naive_slice_interior(const PointCloud& cloud, const GridSpec& grid);

/// Share of matching labels among points labeled by both sides.
/// Throws when the grids differ.
double agreement(const GridLabels& a, const GridLabels& b);

/// Comparison of labels against ground truth.
struct ErrorRateReport {
  int n_compared = 0;   // labeled points that entered the rate
  int n_errors = 0;
  int n_box_rejected = 0;
  int n_unlabeled = 0;
  double rate = 0.0;    // n_errors / n_compared (0 when nothing compared)
};

/// Error rate of labels against truth. Box-rejected points are excluded
/// from the rate by default, mirroring how evaluation grids are reported
/// (points outside every data box carry no surface information).
ErrorRateReport error_rate(const GridLabels& labels, const std::vector<Label>& truth,
                           bool exclude_box_rejects = true);

}  // namespace pme
