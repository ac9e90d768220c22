#include "pme/interior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "pme/errors.hpp"
#include "pme/kdtree.hpp"
#include "pme/parallel.hpp"

namespace pme {

Vector normal(const SplineMap& f, const Eigen::Ref<const Vector>& t) {
  Matrix J = f.jacobian(t);
  if (f.d == 1 && f.D == 2) {
    Vector n(2);
    n << -J(1, 0), J(0, 0);
    return n;
  }
  if (f.d == 2 && f.D == 3) {
    Vector a = J.col(0), b = J.col(1);
    Vector n(3);
    n << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0];
    return n;
  }
  throw ValidationError("normal: only curves in the plane and surfaces in 3-space");
}

OrientationResult orientation(const SplineMap& f, const Vector& xi,
                              const ProjectOptions& opts) {
  if (xi.size() != f.D) throw ValidationError("orientation: point dimension mismatch");
  Projection proj = project(f, xi, opts);
  OrientationResult out;
  out.t = proj.t;
  out.normal = normal(f, proj.t);
  Vector value = f.eval(proj.t);
  Vector diff = value - xi;
  double inner = diff.dot(out.normal);
  // No side claim when the point sits on the manifold within numerical
  // resolution (offset tiny against the point's magnitude, which absorbs the
  // projection search tolerance) or when the offset is indistinguishable
  // from a tangential one.
  double scale = std::max(value.norm(), xi.norm());
  if (diff.norm() <= 1e-6 * scale ||
      std::abs(inner) <= 1e-9 * diff.norm() * out.normal.norm())
    out.sign = 0;
  else
    out.sign = inner > 0.0 ? 1 : -1;
  return out;
}

namespace {

bool inside_box(const Matrix& box, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  for (Eigen::Index l = 0; l < box.rows(); ++l)
    if (p[l] < box(l, 0) || p[l] > box(l, 1)) return false;
  return true;
}

}  // namespace

GridLabels classify_grid(const ClosedFit& cf, const Vector& c_star,
                         const Matrix& grid, const ProjectOptions& opts) {
  const int P = cf.piece_count();
  if (P == 0) throw ValidationError("classify_grid: empty fit");
  if (static_cast<int>(cf.junctions.size()) != P)
    throw ValidationError("classify_grid: junction ring incomplete");
  if (grid.cols() != cf.D || c_star.size() != cf.D)
    throw ValidationError("classify_grid: dimension mismatch");

  // Reference orientation under every piece; the product test below only
  // compares signs computed under the same piece, so per-piece normal
  // orientation conventions cancel.
  std::vector<int> ref(static_cast<std::size_t>(P));
  for (int k = 0; k < P; ++k) {
    ref[static_cast<std::size_t>(k)] = orientation(cf.pieces[static_cast<std::size_t>(k)], c_star, opts).sign;
    if (ref[static_cast<std::size_t>(k)] == 0)
      throw NumericalError(
          "classify_grid: reference point lies on fitted piece " + std::to_string(k) +
          "; choose a reference away from the surface");
  }

  std::vector<Matrix> centers;  // data-box centers, one per junction
  centers.reserve(static_cast<std::size_t>(P));
  for (int k = 0; k < P; ++k)
    centers.push_back(0.5 * (cf.junctions[static_cast<std::size_t>(k)].data_box.col(0) +
                             cf.junctions[static_cast<std::size_t>(k)].data_box.col(1)));

  const Eigen::Index M = grid.rows();
  GridLabels out;
  out.points = grid;
  out.label.assign(static_cast<std::size_t>(M), Label::Exterior);
  out.provenance.assign(static_cast<std::size_t>(M), Provenance::None);
  out.labeled.assign(static_cast<std::size_t>(M), 0);

  std::vector<int> assigned(static_cast<std::size_t>(M), -1);

  parallel_for(M, [&](std::int64_t j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    auto p = grid.row(j);
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < P; ++k) {
      if (!inside_box(cf.junctions[static_cast<std::size_t>(k)].data_box, p)) continue;
      double dist = (p.transpose() - centers[static_cast<std::size_t>(k)]).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    if (best < 0) {
      out.label[sj] = Label::Exterior;
      out.provenance[sj] = Provenance::BoxReject;
      out.labeled[sj] = 1;
      return;
    }
    assigned[sj] = best;
  });

  // Orientation signs, batched per piece: a point in box b needs pieces b and
  // b+1, so piece k serves boxes k (first slot) and k-1 (second slot).
  std::vector<std::array<int, 2>> prod(static_cast<std::size_t>(M), {0, 0});
  for (int k = 0; k < P; ++k) {
    const SplineMap& f = cf.pieces[static_cast<std::size_t>(k)];
    std::vector<std::pair<int, int>> jobs;  // (point, slot)
    const int prev_box = (k - 1 + P) % P;
    for (Eigen::Index j = 0; j < M; ++j) {
      int b = assigned[static_cast<std::size_t>(j)];
      if (b == k) jobs.emplace_back(static_cast<int>(j), 0);
      if (b == prev_box) jobs.emplace_back(static_cast<int>(j), 1);
    }
    if (jobs.empty()) continue;
    Matrix Xk(static_cast<Eigen::Index>(jobs.size()), cf.D);
    for (std::size_t i = 0; i < jobs.size(); ++i)
      Xk.row(static_cast<Eigen::Index>(i)) = grid.row(jobs[i].first);
    BatchProjection bp = project_batch(f, Xk, opts);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      Vector t = bp.t.row(static_cast<Eigen::Index>(i)).transpose();
      Vector n = normal(f, t);
      Vector diff = f.eval(t) - Xk.row(static_cast<Eigen::Index>(i)).transpose();
      double inner = diff.dot(n);
      double tol = 1e-9 * diff.norm() * n.norm();
      int sign = std::abs(inner) <= tol ? 0 : (inner > 0.0 ? 1 : -1);
      prod[static_cast<std::size_t>(jobs[i].first)][static_cast<std::size_t>(jobs[i].second)] =
          sign * ref[static_cast<std::size_t>(k)];
    }
  }

  for (Eigen::Index j = 0; j < M; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    if (assigned[sj] < 0) continue;
    const int s1 = prod[sj][0], s2 = prod[sj][1];
    if (s1 > 0 && s2 > 0) {
      out.label[sj] = Label::Interior;
      out.provenance[sj] = Provenance::ScenarioI;
      out.labeled[sj] = 1;
    } else if (s1 <= 0 && s2 <= 0) {
      out.label[sj] = Label::Exterior;
      out.provenance[sj] = Provenance::ScenarioII;
      out.labeled[sj] = 1;
    }
    // Mixed signs wait for the neighbor vote below.
  }

  // Neighbor vote per box: training points are the decided grid points
  // geometrically inside the same data box, regardless of which box decided
  // them.
  std::vector<std::vector<int>> pending(static_cast<std::size_t>(P));
  for (Eigen::Index j = 0; j < M; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    if (!out.labeled[sj] && assigned[sj] >= 0)
      pending[static_cast<std::size_t>(assigned[sj])].push_back(static_cast<int>(j));
  }
  int unresolved = 0;
  for (int k = 0; k < P; ++k) {
    const auto& todo = pending[static_cast<std::size_t>(k)];
    if (todo.empty()) continue;
    std::vector<int> train;
    for (Eigen::Index j = 0; j < M; ++j) {
      const std::size_t sj = static_cast<std::size_t>(j);
      if (!out.labeled[sj]) continue;
      if (out.provenance[sj] != Provenance::ScenarioI &&
          out.provenance[sj] != Provenance::ScenarioII)
        continue;
      if (inside_box(cf.junctions[static_cast<std::size_t>(k)].data_box, grid.row(j)))
        train.push_back(static_cast<int>(j));
    }
    if (train.empty()) {
      unresolved += static_cast<int>(todo.size());
      continue;
    }
    Matrix train_pts(static_cast<Eigen::Index>(train.size()), grid.cols());
    for (std::size_t i = 0; i < train.size(); ++i)
      train_pts.row(static_cast<Eigen::Index>(i)) = grid.row(train[i]);
    KdTree tree(std::move(train_pts));
    parallel_for(static_cast<std::int64_t>(todo.size()), [&](std::int64_t i) {
      int j = todo[static_cast<std::size_t>(i)];
      const std::size_t sj = static_cast<std::size_t>(j);
      std::vector<int> idx;
      std::vector<double> d2;
      tree.knn(grid.row(j).transpose(), 10, idx, d2);
      int votes_in = 0;
      for (int ti : idx)
        if (out.label[static_cast<std::size_t>(train[static_cast<std::size_t>(ti)])] ==
            Label::Interior)
          ++votes_in;
      int votes_out = static_cast<int>(idx.size()) - votes_in;
      out.label[sj] = votes_in > votes_out ? Label::Interior : Label::Exterior;
      out.provenance[sj] = Provenance::KnnFallback;
      out.labeled[sj] = 1;
    });
  }
  out.n_unresolved = unresolved;
  return out;
}

namespace {

// Closed polygon from unordered section points: angular order around the
// centroid (exact for star-shaped sections), radius then index breaking ties.
std::vector<Eigen::Index> polygon_order(const Matrix& pts) {
  Eigen::RowVector2d c = pts.colwise().mean();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pts.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ang(order.size()), rad(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    double dx = pts(static_cast<Eigen::Index>(i), 0) - c[0];
    double dy = pts(static_cast<Eigen::Index>(i), 1) - c[1];
    ang[i] = std::atan2(dy, dx);
    rad[i] = dx * dx + dy * dy;
  }
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const std::size_t sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
    if (ang[sa] != ang[sb]) return ang[sa] < ang[sb];
    if (rad[sa] != rad[sb]) return rad[sa] < rad[sb];
    return a < b;
  });
  return order;
}

// Y-coordinates where the closed polygon crosses the vertical line x = a.
// Half-open straddle test, so vertex hits are not double-counted.
std::vector<double> line_crossings(const Matrix& poly, double a) {
  std::vector<double> ys;
  const Eigen::Index m = poly.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index j = (i + 1) % m;
    double px = poly(i, 0), qx = poly(j, 0);
    bool straddle = (px <= a && qx > a) || (qx <= a && px > a);
    if (!straddle) continue;
    double s = (a - px) / (qx - px);
    ys.push_back(poly(i, 1) + s * (poly(j, 1) - poly(i, 1)));
  }
  std::sort(ys.begin(), ys.end());
  return ys;
}

bool between_pairs(const std::vector<double>& ys, double y) {
  for (std::size_t l = 0; l + 1 < ys.size(); l += 2)
    if (y >= ys[l] && y <= ys[l + 1]) return true;
  return false;
}

}  // namespace

GridLabels naive_slice_interior(const PointCloud& cloud, const GridSpec& grid) {
  if (grid.dim() != 3 || cloud.dim() != 3)
    throw ValidationError("naive_slice_interior: 3-D data and grid required");
  if (!cloud.has_slices())
    throw ValidationError("naive_slice_interior: input carries no slice tags");
  const int nz = grid.n[2];
  for (int s : cloud.slice)
    if (s < 0 || s >= nz)
      throw ValidationError("naive_slice_interior: slice tag outside the grid planes");

  GridLabels out;
  out.points = make_grid(grid);
  const Eigen::Index M = out.points.rows();
  out.label.assign(static_cast<std::size_t>(M), Label::Exterior);
  out.provenance.assign(static_cast<std::size_t>(M), Provenance::None);
  out.labeled.assign(static_cast<std::size_t>(M), 0);

  const int nx = grid.n[0], ny = grid.n[1];
  auto flat = [&](int ix, int iy, int iz) -> std::size_t {
    return static_cast<std::size_t>((static_cast<std::int64_t>(ix) * ny + iy) * nz + iz);
  };
  auto axis_value = [&](int axis, int i) -> double {
    if (grid.n[static_cast<std::size_t>(axis)] == 1)
      return 0.5 * (grid.lo[axis] + grid.hi[axis]);
    return grid.lo[axis] + (grid.hi[axis] - grid.lo[axis]) * i /
                               (grid.n[static_cast<std::size_t>(axis)] - 1);
  };
  const double x_extent = grid.hi[0] - grid.lo[0];

  for (int iz = 0; iz < nz; ++iz) {
    std::vector<int> rows;
    for (int i = 0; i < cloud.count(); ++i)
      if (cloud.slice[static_cast<std::size_t>(i)] == iz) rows.push_back(i);
    if (rows.size() < 3) {
      if (!rows.empty()) out.n_unresolved += nx * ny;  // boundary too sparse to close
      continue;  // empty plane: nothing to enclose, grid points stay unlabeled
    }
    Matrix pts(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i)
      pts.row(static_cast<Eigen::Index>(i)) = cloud.points.row(rows[i]).head(2);
    std::vector<Eigen::Index> order = polygon_order(pts);
    Matrix poly(pts.rows(), 2);
    for (std::size_t i = 0; i < order.size(); ++i)
      poly.row(static_cast<Eigen::Index>(i)) = pts.row(order[i]);

    for (int ix = 0; ix < nx; ++ix) {
      double a = axis_value(0, ix);
      std::vector<double> ys = line_crossings(poly, a);
      if (ys.size() % 2 != 0) {
        ys = line_crossings(poly, a + 1e-9 * (x_extent > 0 ? x_extent : 1.0));
        if (ys.size() % 2 != 0) {
          ++out.n_degenerate_lines;
          continue;  // the whole line stays unlabeled
        }
      }
      for (int iy = 0; iy < ny; ++iy) {
        std::size_t j = flat(ix, iy, iz);
        out.label[j] = between_pairs(ys, axis_value(1, iy)) ? Label::Interior
                                                            : Label::Exterior;
        out.labeled[j] = 1;
      }
    }
  }
  return out;
}

double agreement(const GridLabels& a, const GridLabels& b) {
  if (a.points.rows() != b.points.rows() || a.points.cols() != b.points.cols() ||
      a.points != b.points)
    throw ValidationError("agreement: grids differ");
  long long both = 0, match = 0;
  for (Eigen::Index j = 0; j < a.points.rows(); ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    if (!a.labeled[sj] || !b.labeled[sj]) continue;
    ++both;
    if (a.label[sj] == b.label[sj]) ++match;
  }
  if (both == 0) throw ValidationError("agreement: no co-labeled points");
  return static_cast<double>(match) / static_cast<double>(both);
}

ErrorRateReport error_rate(const GridLabels& labels, const std::vector<Label>& truth,
                           bool exclude_box_rejects) {
  if (static_cast<Eigen::Index>(truth.size()) != labels.points.rows())
    throw ValidationError("error_rate: one truth label per grid point required");
  ErrorRateReport rep;
  for (Eigen::Index j = 0; j < labels.points.rows(); ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    if (!labels.labeled[sj]) {
      ++rep.n_unlabeled;
      continue;
    }
    if (labels.provenance[sj] == Provenance::BoxReject) {
      ++rep.n_box_rejected;
      if (exclude_box_rejects) continue;
    }
    ++rep.n_compared;
    if (labels.label[sj] != truth[sj]) ++rep.n_errors;
  }
  rep.rate = rep.n_compared > 0
                 ? static_cast<double>(rep.n_errors) / static_cast<double>(rep.n_compared)
                 : 0.0;
  return rep;
}

}  // namespace pme
