#pragma once

#include <vector>

#include "pme/fit.hpp"
#include "pme/projection.hpp"
#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace pme {

/// Smooth step-down weight: 1 for z <= 0, 0 for z >= 1, and the cubic
/// 1 - 3z^2 + 2z^3 between. Continuously differentiable with zero slope at
/// both ends.
double kappa(double z);

/// Everything needed to blend two adjacent pieces over their shared data.
///
/// R rotates ambient space so the overlap lies flattest along its trailing
/// axes; the leading d rotated coordinates form the blend chart zeta. The
/// weight on the first piece decays from 1 to 0 across the middle third of
/// [B_L, B_U] along rotated axis g.
struct GlueJunction {
  Matrix R;          // D x D rotation (orthogonal, rows = principal axes)
  int g = 0;         // blend axis, 0-based index into rotated coordinates
  Matrix box;        // D x 2 rotated-coordinate bounds of the overlap (lo, hi)
  double B_L = 0.0;  // box(g, 0)
  double B_U = 0.0;  // box(g, 1)
  Vector xi1, xi2;   // orientation anchors, original coordinates
  Vector rot_mean;   // mean of the rotated overlap; tail entries lift charts
  Matrix data_box;   // D x 2 original-coordinate bounds of the overlap

  int dim() const { return static_cast<int>(R.rows()); }
};

/// Builds the junction over overlap points Z (rows): R from the principal
/// axes of centered Z (descending variance, first-significant-entry-positive
/// sign rule), then row g is negated if (R xi1)_g > (R xi2)_g so that xi1
/// always sits at the low end of the blend axis. Boxes are recomputed after
/// the flip.
///
/// Throws ValidationError for fewer than D+1 points or coincident anchors,
/// and NumericalError when the overlap carries no variance along axis g
/// (degenerate gluing region).
GlueJunction build_junction(const Matrix& Z, const Vector& xi1, const Vector& xi2,
                            int g);

/// Inverts the chart zeta = P_d(R f(t)) for t by damped Newton on the
/// analytic jacobian, starting from the projection of the lifted point
/// (zeta padded with the junction's rotated tail mean). Accepts when the
/// residual drops below 1e-8 times the chart-box diameter.
///
/// Throws NumericalError when the jacobian degenerates or the iteration
/// stagnates, which signals that the piece is not a graph over the rotated
/// gluing plane near zeta.
Vector invert_chart(const SplineMap& f, const GlueJunction& junction,
                    const Vector& zeta, const ProjectOptions& opts = {});

/// Blended evaluation at chart coordinates zeta:
///   G(zeta) = K * f1(chart1(zeta)) + (1 - K) * f2(chart2(zeta)),
/// where K = kappa applied to the affine rescaling that maps the middle
/// third of [B_L, B_U] onto [0, 1]. Outside the middle third only the
/// active branch is evaluated, so G matches f1 exactly on the first third
/// and f2 exactly on the last.
Vector glue_eval(const SplineMap& f1, const SplineMap& f2,
                 const GlueJunction& junction, const Vector& zeta,
                 const ProjectOptions& opts = {});

/// Chooses the blend axis and orientation anchors for an overlap, then builds
/// the junction. The axis is the narrowest of the first d rotated overlap
/// axes (or axis_override when >= 0); the anchors are the overlap points
/// extremal along it, with the one nearer the centroid of pred (the data
/// glued under the first piece only) taken as xi1.
GlueJunction make_junction(const Matrix& Z, const Matrix& pred, int d,
                           int axis_override = -1);

/// Per-piece fitting summary kept for reporting and serialization.
struct PieceInfo {
  double lambda = 0.0;
  double msd = 0.0;    // mean squared projection distance over the piece data
  int n_iter = 0;
  bool converged = false;
};

/// A closed manifold estimate: an ordered ring of fitted pieces plus the
/// junctions that blend each consecutive pair. Piece k is fit to sectors
/// k and k+1 (mod P); junction k blends pieces k and k+1 over sector k+1,
/// whose axis-aligned bounds are the junction's data_box.
struct ClosedFit {
  int d = 0;
  int D = 0;
  std::vector<SplineMap> pieces;
  std::vector<GlueJunction> junctions;
  std::vector<PieceInfo> info;
  std::vector<int> sector;  // per input point, 0 .. P-1

  int piece_count() const { return static_cast<int>(pieces.size()); }
};

struct FitClosedOptions {
  int d = 2;               // 2: surfaces in 3-space; 1: closed curves
  double lambda = 0.0;     // > 0: fixed smoothing; 0: per-piece auto-selection
  Vector lambda_grid;      // candidates for auto mode; empty -> coarse default
  int score_subsample = 1000;  // data points scored per candidate
  int glue_axis = -1;      // -1: narrowest rotated overlap axis; else fixed
  int knn = 0;             // neighbors for the global parameterization; 0 auto
  FitOptions fit;          // per-piece fitting options
};

/// Closed-manifold pipeline: parameterize all of X, split the parameter
/// angle into n_pieces equal sectors, fit one piece per consecutive sector
/// pair, and build one junction per overlap. For d = 2 the angle is the
/// polar angle of the 2-D parameterization; for d = 1 the rank of the 1-D
/// parameter mapped onto [0, 2pi). Pieces are independent subproblems; the
/// loop is sequential because the stages inside each fit already parallelize.
ClosedFit fit_closed(const Matrix& X, int n_pieces, const FitClosedOptions& opts = {});

}  // namespace pme
