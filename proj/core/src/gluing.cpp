#include "pme/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "pme/errors.hpp"
#include "pme/isomap.hpp"

namespace pme {

double kappa(double z) {
  if (z <= 0.0) return 1.0;
  if (z >= 1.0) return 0.0;
  return 1.0 - 3.0 * z * z + 2.0 * z * z * z;
}

namespace {

struct PrincipalAxes {
  Matrix R;            // D x D, rows = axes by descending variance
  Vector variances;    // descending
};

// Rows of R get a deterministic sign: first entry whose magnitude clears
// 1e-12 of the row maximum is made positive.
void fix_row_signs(Matrix& R) {
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    double mx = R.row(i).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < R.cols(); ++j) {
      double v = R(i, j);
      if (std::abs(v) > 1e-12 * mx) {
        if (v < 0.0) R.row(i) = -R.row(i);
        break;
      }
    }
  }
}

PrincipalAxes principal_axes(const Matrix& Z) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index D = Z.cols();
  Eigen::RowVectorXd mean = Z.colwise().mean();
  Matrix centered = Z.rowwise() - mean;
  Matrix cov = centered.adjoint() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericalError("principal axes: eigendecomposition failed");
  PrincipalAxes out;
  out.R.resize(D, D);
  out.variances.resize(D);
  for (Eigen::Index i = 0; i < D; ++i) {
    out.R.row(i) = es.eigenvectors().col(D - 1 - i).transpose();
    out.variances[i] = es.eigenvalues()[D - 1 - i];
  }
  fix_row_signs(out.R);
  return out;
}

Matrix column_bounds(const Matrix& rows) {
  Matrix box(rows.cols(), 2);
  box.col(0) = rows.colwise().minCoeff().transpose();
  box.col(1) = rows.colwise().maxCoeff().transpose();
  return box;
}

}  // namespace

GlueJunction build_junction(const Matrix& Z, const Vector& xi1, const Vector& xi2,
                            int g) {
  const Eigen::Index D = Z.cols();
  if (Z.rows() < D + 1)
    throw ValidationError("build_junction: need at least D+1 overlap points, got " +
                          std::to_string(Z.rows()));
  if (xi1.size() != D || xi2.size() != D)
    throw ValidationError("build_junction: anchor dimension mismatch");
  if ((xi1 - xi2).norm() == 0.0)
    throw ValidationError("build_junction: orientation anchors coincide");
  if (g < 0 || g >= D)
    throw ValidationError("build_junction: blend axis out of range");
  if (!Z.allFinite() || !xi1.allFinite() || !xi2.allFinite())
    throw ValidationError("build_junction: non-finite input");

  PrincipalAxes axes = principal_axes(Z);
  if (!(axes.variances[0] > 0.0))
    throw NumericalError("build_junction: degenerate gluing region (no variance)");
  if (axes.variances[g] <= 1e-12 * axes.variances[0])
    throw NumericalError(
        "build_junction: degenerate gluing region (no spread along the blend axis)");

  GlueJunction J;
  J.R = axes.R;
  J.g = g;
  if ((J.R * xi1)(g) > (J.R * xi2)(g)) J.R.row(g) = -J.R.row(g);
  Matrix rotated = Z * J.R.transpose();
  J.box = column_bounds(rotated);
  J.B_L = J.box(g, 0);
  J.B_U = J.box(g, 1);
  if (!(J.B_L < J.B_U))
    throw NumericalError("build_junction: degenerate blend interval");
  J.xi1 = xi1;
  J.xi2 = xi2;
  J.rot_mean = rotated.colwise().mean().transpose();
  J.data_box = column_bounds(Z);
  return J;
}

Vector invert_chart(const SplineMap& f, const GlueJunction& junction,
                    const Vector& zeta, const ProjectOptions& opts) {
  const int d = f.d;
  const int D = f.D;
  if (junction.dim() != D)
    throw ValidationError("invert_chart: junction dimension mismatch");
  if (zeta.size() != d)
    throw ValidationError("invert_chart: chart point must have d coordinates");

  Vector lifted_rot(D);
  lifted_rot.head(d) = zeta;
  if (D > d) lifted_rot.tail(D - d) = junction.rot_mean.tail(D - d);
  Vector x_lift = junction.R.transpose() * lifted_rot;
  Vector t = project(f, x_lift, opts).t;

  Vector chart_span = (junction.box.col(1) - junction.box.col(0)).head(d);
  const double tol = 1e-8 * chart_span.norm();

  auto residual = [&](const Vector& at) -> Vector {
    return (junction.R * f.eval(at)).head(d) - zeta;
  };

  Vector r = residual(t);
  const char* stuck_msg =
      "invert_chart: the piece is not a graph over the rotated gluing plane "
      "near the requested coordinates";
  for (int it = 0; it < 100; ++it) {
    if (r.norm() <= tol) return t;
    Matrix A = (junction.R * f.jacobian(t)).topRows(d);
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) throw NumericalError(stuck_msg);
    Vector step = lu.solve(r);
    if (!step.allFinite()) throw NumericalError(stuck_msg);
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-12) {
      Vector t_try = t - alpha * step;
      Vector r_try = residual(t_try);
      if (r_try.allFinite() && r_try.norm() < r.norm()) {
        t = std::move(t_try);
        r = std::move(r_try);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) throw NumericalError(stuck_msg);
  }
  if (r.norm() <= tol) return t;
  throw NumericalError(stuck_msg);
}

Vector glue_eval(const SplineMap& f1, const SplineMap& f2,
                 const GlueJunction& junction, const Vector& zeta,
                 const ProjectOptions& opts) {
  const int d = f1.d;
  if (f2.d != d || f1.D != f2.D)
    throw ValidationError("glue_eval: piece dimensions disagree");
  if (zeta.size() != d)
    throw ValidationError("glue_eval: chart point must have d coordinates");
  if (junction.g >= d)
    throw ValidationError("glue_eval: blend axis outside the chart");
  Vector span = (junction.box.col(1) - junction.box.col(0)).head(d);
  const double slack = 1e-9 * span.norm();
  for (int l = 0; l < d; ++l)
    if (zeta[l] < junction.box(l, 0) - slack || zeta[l] > junction.box(l, 1) + slack)
      throw ValidationError("glue_eval: chart point outside the gluing box");

  const double denom = (junction.B_U - junction.B_L) / 3.0;
  const double arg = (zeta[junction.g] -
                      (2.0 / 3.0 * junction.B_L + 1.0 / 3.0 * junction.B_U)) /
                     denom;
  const double K = kappa(arg);
  if (K >= 1.0) return f1.eval(invert_chart(f1, junction, zeta, opts));
  if (K <= 0.0) return f2.eval(invert_chart(f2, junction, zeta, opts));
  Vector a = f1.eval(invert_chart(f1, junction, zeta, opts));
  Vector b = f2.eval(invert_chart(f2, junction, zeta, opts));
  return K * a + (1.0 - K) * b;
}

namespace {

// Blend axis (narrowest of the first d rotated overlap axes, unless
// overridden) and orientation anchors (extremal along it; the one nearer the
// predecessor side becomes xi1, so the first piece keeps full weight at its
// own edge of the overlap).
GlueJunction junction_for_overlap(const Matrix& overlap, const Matrix& pred, int d,
                                  int axis_override) {
  const Eigen::Index D = overlap.cols();
  if (pred.rows() == 0)
    throw ValidationError("junction: empty predecessor side");
  if (d < 1 || d > D)
    throw ValidationError("junction: chart dimension out of range");
  if (axis_override >= d)
    throw ValidationError("junction: blend axis outside the chart");
  if (overlap.rows() < D + 1)
    throw ValidationError("junction: overlap needs at least D+1 points, got " +
                          std::to_string(overlap.rows()));

  PrincipalAxes axes = principal_axes(overlap);
  Matrix rotated = overlap * axes.R.transpose();
  int g = axis_override;
  if (g < 0) {
    g = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l < d; ++l) {
      double width = rotated.col(l).maxCoeff() - rotated.col(l).minCoeff();
      if (width < best) {
        best = width;
        g = l;
      }
    }
  }

  Eigen::Index imin = 0, imax = 0;
  rotated.col(g).minCoeff(&imin);
  rotated.col(g).maxCoeff(&imax);
  Vector lo = overlap.row(imin).transpose();
  Vector hi = overlap.row(imax).transpose();
  Vector centroid = pred.colwise().mean().transpose();
  bool lo_first = (lo - centroid).squaredNorm() <= (hi - centroid).squaredNorm();
  const Vector& xi1 = lo_first ? lo : hi;
  const Vector& xi2 = lo_first ? hi : lo;
  return build_junction(overlap, xi1, xi2, g);
}

}  // namespace

GlueJunction make_junction(const Matrix& Z, const Matrix& pred, int d,
                           int axis_override) {
  return junction_for_overlap(Z, pred, d, axis_override);
}

namespace {

Matrix select_rows(const Matrix& X, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

Vector coarse_lambda_grid() {
  Vector grid(7);
  int i = 0;
  for (int k = -15; k <= 3; k += 3) grid[i++] = std::exp(static_cast<double>(k));
  return grid;
}

Matrix stride_subsample(const Matrix& X, int target) {
  const Eigen::Index n = X.rows();
  if (target <= 0 || n <= target) return X;
  Eigen::Index stride = (n + target - 1) / target;
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < n; i += stride) idx.push_back(static_cast<int>(i));
  return select_rows(X, idx);
}

// One piece: either a fixed-smoothing full pipeline or a node-sharing sweep
// over the candidate grid scored on a deterministic subsample.
FitResult fit_piece(const Matrix& piece, int d, const FitClosedOptions& opts) {
  if (opts.lambda > 0.0) return pme_fit(piece, d, opts.lambda, opts.fit);

  Vector grid = opts.lambda_grid.size() > 0 ? opts.lambda_grid : coarse_lambda_grid();
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("fit_closed: lambda grid must be strictly increasing");
  if ((grid.array() <= 0.0).any())
    throw ValidationError("fit_closed: lambda grid must be positive");

  HdmdeResult reduced = hdmde(piece, opts.fit.reduction);
  int k = opts.fit.knn > 0 ? opts.fit.knn : default_knn(reduced.waj.size(), d);
  Matrix params = isomap(reduced.waj.nodes, d, k);
  Matrix sub = stride_subsample(piece, opts.score_subsample);

  // Candidates run on a reduced outer budget; only the winner is refit with
  // the caller's full budget.
  FitOptions scoring = opts.fit;
  scoring.max_outer = std::min(scoring.max_outer, 25);

  Vector scores(grid.size());
  for (Eigen::Index gi = 0; gi < grid.size(); ++gi) {
    FitResult fr = fit_to_waj(reduced.waj, params, grid[gi], scoring);
    scores[gi] = msd(fr.map, sub, opts.fit.projection);
  }
  double best = scores.minCoeff();
  double diam = bbox_diameter(piece);
  double tie = std::max(1e-9 * best, 1e-12 * diam * diam);
  int pick = 0;
  for (Eigen::Index gi = 0; gi < grid.size(); ++gi)
    if (scores[gi] <= best + tie) pick = static_cast<int>(gi);

  FitResult chosen = fit_to_waj(reduced.waj, params, grid[pick], opts.fit);
  chosen.msd = msd(chosen.map, piece, opts.fit.projection);
  return chosen;
}

std::vector<double> ring_angles(const Matrix& X, int d, int knn) {
  const Eigen::Index I = X.rows();
  std::vector<double> angle(static_cast<std::size_t>(I));
  if (d == 2) {
    Matrix params = isomap(X, 2, knn);
    for (Eigen::Index i = 0; i < I; ++i) {
      double a = std::atan2(params(i, 1), params(i, 0));
      if (a < 0.0) a += 2.0 * M_PI;
      angle[static_cast<std::size_t>(i)] = a;
    }
  } else {
    Matrix params = isomap(X, 1, knn);
    std::vector<int> order(static_cast<std::size_t>(I));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (params(a, 0) != params(b, 0)) return params(a, 0) < params(b, 0);
      return a < b;
    });
    for (Eigen::Index r = 0; r < I; ++r)
      angle[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
          2.0 * M_PI * static_cast<double>(r) / static_cast<double>(I);
  }
  return angle;
}

}  // namespace

ClosedFit fit_closed(const Matrix& X, int n_pieces, const FitClosedOptions& opts) {
  const Eigen::Index I = X.rows();
  const Eigen::Index D = X.cols();
  if (opts.d != 1 && opts.d != 2)
    throw ValidationError("fit_closed: d must be 1 or 2");
  if (D < opts.d + 1)
    throw ValidationError("fit_closed: ambient dimension must exceed d");
  if (n_pieces < 3) throw ValidationError("fit_closed: need at least 3 pieces");
  if (I < 2 * n_pieces)
    throw ValidationError("fit_closed: too few points for the requested pieces");

  std::vector<double> angle = ring_angles(X, opts.d, opts.knn);
  const int P = n_pieces;
  const double width = 2.0 * M_PI / P;
  std::vector<int> sector(static_cast<std::size_t>(I));
  std::vector<std::vector<int>> members(static_cast<std::size_t>(P));
  for (Eigen::Index i = 0; i < I; ++i) {
    int s = static_cast<int>(angle[static_cast<std::size_t>(i)] / width);
    s = std::clamp(s, 0, P - 1);
    sector[static_cast<std::size_t>(i)] = s;
    members[static_cast<std::size_t>(s)].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < P; ++k)
    if (static_cast<Eigen::Index>(members[static_cast<std::size_t>(k)].size()) < D + 1)
      throw ValidationError("fit_closed: angular sector " + std::to_string(k) +
                            " holds only " +
                            std::to_string(members[static_cast<std::size_t>(k)].size()) +
                            " points; reduce n_pieces");

  ClosedFit out;
  out.d = opts.d;
  out.D = static_cast<int>(D);
  out.sector = std::move(sector);
  out.pieces.reserve(static_cast<std::size_t>(P));
  out.junctions.reserve(static_cast<std::size_t>(P));
  out.info.reserve(static_cast<std::size_t>(P));

  // Pieces are disjoint subproblems; the loop stays sequential because the
  // stages inside each fit already use the worker pool.
  for (int k = 0; k < P; ++k) {
    const auto& own = members[static_cast<std::size_t>(k)];
    const auto& next = members[static_cast<std::size_t>((k + 1) % P)];
    std::vector<int> idx;
    idx.reserve(own.size() + next.size());
    idx.insert(idx.end(), own.begin(), own.end());
    idx.insert(idx.end(), next.begin(), next.end());
    Matrix piece = select_rows(X, idx);
    FitResult fr = fit_piece(piece, opts.d, opts);
    out.pieces.push_back(std::move(fr.map));
    out.info.push_back({fr.lambda, fr.msd, fr.n_iter, fr.converged});
  }
  for (int k = 0; k < P; ++k) {
    Matrix overlap = select_rows(X, members[static_cast<std::size_t>((k + 1) % P)]);
    Matrix pred = select_rows(X, members[static_cast<std::size_t>(k)]);
    out.junctions.push_back(junction_for_overlap(overlap, pred, opts.d, opts.glue_axis));
  }
  return out;
}

}  // namespace pme
