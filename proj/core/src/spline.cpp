#include "pme/spline.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "pme/errors.hpp"

namespace pme {

double eta(int nu, double r) {
  switch (nu) {
    case 1:
      return r;
    case 2:
      return r == 0.0 ? 0.0 : r * r * std::log(r);
    case 3:
      return r * r * r;
    default:
      throw ValidationError("eta: order must be 1, 2 or 3");
  }
}

Vector eta_grad(int nu, const Vector& u) {
  double r = u.norm();
  switch (nu) {
    case 1:
      if (r == 0.0) return Vector::Zero(u.size());
      return u / r;
    case 2:
      if (r == 0.0) return Vector::Zero(u.size());
      return (2.0 * std::log(r) + 1.0) * u;
    case 3:
      return 3.0 * r * u;
    default:
      throw ValidationError("eta_grad: order must be 1, 2 or 3");
  }
}

Vector SplineMap::eval(const Eigen::Ref<const Vector>& t) const {
  if (t.size() != d) throw ValidationError("SplineMap::eval: parameter dimension mismatch");
  int nu = order();
  Vector y = affine.row(0).transpose();
  for (int a = 0; a < d; ++a) y += t[a] * affine.row(1 + a).transpose();
  int N = knot_count();
  for (int j = 0; j < N; ++j) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      double u = t[a] - centers(j, a);
      r2 += u * u;
    }
    double k = eta(nu, std::sqrt(r2));
    if (k != 0.0) y += k * kernel.row(j).transpose();
  }
  return y;
}

Matrix SplineMap::eval_rows(const Matrix& t_rows) const {
  Matrix out(t_rows.rows(), D);
  for (Eigen::Index i = 0; i < t_rows.rows(); ++i)
    out.row(i) = eval(t_rows.row(i).transpose()).transpose();
  return out;
}

Matrix SplineMap::jacobian(const Eigen::Ref<const Vector>& t) const {
  if (t.size() != d) throw ValidationError("SplineMap::jacobian: parameter dimension mismatch");
  int nu = order();
  Matrix J(D, d);
  for (int a = 0; a < d; ++a) J.col(a) = affine.row(1 + a).transpose();
  int N = knot_count();
  Vector u(d);
  for (int j = 0; j < N; ++j) {
    for (int a = 0; a < d; ++a) u[a] = t[a] - centers(j, a);
    Vector g = eta_grad(nu, u);
    for (int a = 0; a < d; ++a)
      if (g[a] != 0.0) J.col(a) += g[a] * kernel.row(j).transpose();
  }
  return J;
}

namespace {

Matrix kernel_matrix(const Matrix& knots, int nu) {
  int N = static_cast<int>(knots.rows());
  Matrix E(N, N);
  for (int i = 0; i < N; ++i) {
    E(i, i) = 0.0;
    for (int j = i + 1; j < N; ++j) {
      double v = eta(nu, (knots.row(i) - knots.row(j)).norm());
      E(i, j) = v;
      E(j, i) = v;
    }
  }
  return E;
}

}  // namespace

double hessian_penalty(const SplineMap& f) {
  Matrix E = kernel_matrix(f.centers, f.order());
  return (f.kernel.transpose() * E * f.kernel).trace();
}

SplineDesign assemble(const Matrix& knots, const Matrix& targets,
                      const Vector& weights, double lambda) {
  const int N_in = static_cast<int>(knots.rows());
  const int d = static_cast<int>(knots.cols());
  const int D = static_cast<int>(targets.cols());
  if (d < 1 || d > 3) throw ValidationError("assemble: intrinsic dimension must be 1, 2 or 3");
  if (targets.rows() != N_in || weights.size() != N_in)
    throw ValidationError("assemble: knots, targets and weights must agree in length");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValidationError("assemble: lambda must be finite and >= 0");
  if ((weights.array() < 0.0).any())
    throw ValidationError("assemble: weights must be nonnegative");
  if (!knots.allFinite() || !targets.allFinite())
    throw ValidationError("assemble: non-finite knot or target");

  // Merge near-duplicate knots; greedy first-representative scan keeps the
  // result deterministic.
  double tol = 1e-9 * bbox_diameter(knots);
  std::vector<int> rep;
  std::vector<int> owner(N_in, -1);
  rep.reserve(N_in);
  for (int i = 0; i < N_in; ++i) {
    for (int r = 0; r < static_cast<int>(rep.size()); ++r) {
      if ((knots.row(i) - knots.row(rep[r])).norm() <= tol) {
        owner[i] = r;
        break;
      }
    }
    if (owner[i] < 0) {
      owner[i] = static_cast<int>(rep.size());
      rep.push_back(i);
    }
  }
  const int N = static_cast<int>(rep.size());

  Matrix m_knots(N, d);
  Matrix m_targets = Matrix::Zero(N, D);
  Vector m_weights = Vector::Zero(N);
  for (int r = 0; r < N; ++r) m_knots.row(r) = knots.row(rep[r]);
  for (int i = 0; i < N_in; ++i) {
    int r = owner[i];
    m_weights[r] += weights[i];
    m_targets.row(r) += weights[i] * targets.row(i);
  }

  // Zero-weight knots are invisible to the objective; dropping them (kernel
  // coefficient 0) is the unique stationary completion.
  SplineDesign out;
  out.d = d;
  out.D = D;
  out.lambda = lambda;
  int kept = 0;
  for (int r = 0; r < N; ++r)
    if (m_weights[r] > 0.0) ++kept;
  out.knots = Matrix(kept, d);
  out.targets = Matrix(kept, D);
  out.weights = Vector(kept);
  for (int r = 0, k = 0; r < N; ++r) {
    if (!(m_weights[r] > 0.0)) continue;
    out.knots.row(k) = m_knots.row(r);
    out.targets.row(k) = m_targets.row(r) / m_weights[r];
    out.weights[k] = m_weights[r];
    ++k;
  }

  if (kept < d + 2)
    throw ValidationError(
        "assemble: need at least d + 2 distinct knots with positive weight");

  int nu = 4 - d;
  out.E = kernel_matrix(out.knots, nu);
  out.T = Matrix(kept, d + 1);
  out.T.col(0).setOnes();
  out.T.rightCols(d) = out.knots;

  Eigen::ColPivHouseholderQR<Matrix> qr(out.T);
  if (qr.rank() < d + 1)
    throw ValidationError(
        "assemble: degenerate knot configuration (knots lie on an affine subspace "
        "of dimension < d)");
  return out;
}

SplineSolution solve(const SplineDesign& design) {
  const int N = static_cast<int>(design.knots.rows());
  const int d = design.d;
  const int D = design.D;

  // C = E + lambda * W^{-1}.
  Matrix C = design.E;
  for (int i = 0; i < N; ++i) {
    C(i, i) += design.lambda / design.weights[i];
    if (!std::isfinite(C(i, i)))
      throw NumericalError("solve: lambda / weight overflows; weights too small");
  }

  // Eliminate the side condition T's = 0: with T = Q R (column-pivoted),
  // the trailing N - d - 1 columns of Q span its null space.
  Eigen::ColPivHouseholderQR<Matrix> qr(design.T);
  Matrix Q = qr.householderQ() * Matrix::Identity(N, N);
  Matrix Z = Q.rightCols(N - d - 1);

  Matrix My = Z.transpose() * C * Z;
  My = 0.5 * (My + My.transpose()).eval();
  Matrix rhs_y = Z.transpose() * design.targets;

  Eigen::FullPivLU<Matrix> lu(My);
  if (!lu.isInvertible())
    throw NumericalError(
        "solve: singular saddle system; jitter lambda or merge coincident knots");
  Matrix y = lu.solve(rhs_y);
  // One refinement step tightens ill-conditioned solves at negligible cost.
  y += lu.solve(rhs_y - My * y);

  Matrix s = Z * y;
  Matrix Cs = C * s;

  // Affine block: T a = targets - C s, solved through the leading R block.
  Matrix qtr = Q.leftCols(d + 1).transpose() * (design.targets - Cs);
  Matrix a = qr.colsPermutation() *
             qr.matrixQR()
                 .topLeftCorner(d + 1, d + 1)
                 .template triangularView<Eigen::Upper>()
                 .solve(qtr);

  Matrix Ta = design.T * a;
  double scale = std::max({design.targets.norm(), Cs.norm(), Ta.norm(), 1e-300});
  double r_fit = (Cs + Ta - design.targets).norm() / scale;
  double r_side = (design.T.transpose() * s).norm() /
                  std::max(design.T.norm() * s.norm(), 1e-300);
  double residual = std::max(r_fit, r_side);
  if (!(residual <= 1e-8))
    throw NumericalError(
        "solve: saddle system residual above 1e-8; jitter lambda or merge knots");

  SplineSolution sol;
  sol.map.d = d;
  sol.map.D = D;
  sol.map.centers = design.knots;
  sol.map.kernel = s;
  sol.map.affine = a;
  sol.residual = residual;
  return sol;
}

double fit_objective(const SplineDesign& design, const SplineMap& f) {
  double data = 0.0;
  for (Eigen::Index j = 0; j < design.knots.rows(); ++j) {
    Vector r = design.targets.row(j).transpose() - f.eval(design.knots.row(j).transpose());
    data += design.weights[j] * r.squaredNorm();
  }
  return data + design.lambda * hessian_penalty(f);
}

}  // namespace pme
