#include "pme/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "pme/errors.hpp"
#include "pme/parallel.hpp"

namespace pme {
namespace {

int default_coarse(int d) {
  switch (d) {
    case 1: return 30;
    case 2: return 15;
    default: return 8;
  }
}

Matrix resolve_box(const SplineMap& f, const ProjectOptions& opts) {
  if (opts.box.size() != 0) {
    if (opts.box.rows() != f.d || opts.box.cols() != 2)
      throw ValidationError("project: box must be d x 2");
    if (((opts.box.col(1) - opts.box.col(0)).array() < 0.0).any())
      throw ValidationError("project: box has hi < lo");
    return opts.box;
  }
  return default_box(f);
}

Matrix coarse_nodes(const Matrix& box, int per_axis) {
  int d = static_cast<int>(box.rows());
  std::int64_t total = 1;
  for (int a = 0; a < d; ++a) total *= per_axis;
  Matrix nodes(total, d);
  std::vector<int> idx(d, 0);
  for (std::int64_t r = 0; r < total; ++r) {
    for (int a = 0; a < d; ++a) {
      double s = per_axis == 1 ? 0.5 : static_cast<double>(idx[a]) / (per_axis - 1);
      nodes(r, a) = box(a, 0) + s * (box(a, 1) - box(a, 0));
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < per_axis) break;
      idx[a] = 0;
    }
  }
  return nodes;
}

constexpr double kR2Floor = std::numeric_limits<double>::min();

/// Kernel values eta(nu, r) as a function of r^2, vectorized over a block.
/// The floor keeps log finite; the r2 = 0 entries come out exactly zero.
void kernel_values(int nu, const Eigen::ArrayXd& r2, Eigen::ArrayXd& k) {
  switch (nu) {
    case 1: k = r2.sqrt(); return;
    case 2: k = 0.5 * r2 * r2.max(kR2Floor).log(); return;
    case 3: k = r2 * r2.sqrt(); return;
    default: throw ValidationError("projection: kernel order must be 1, 2 or 3");
  }
}

/// Gradient factor g(r^2) with d(eta)/dt = g * (t - center); zero limits at
/// the center are produced by the zero difference vector (nu = 2, 3) or an
/// explicit select (nu = 1).
void kernel_grad_factor(int nu, const Eigen::ArrayXd& r2, Eigen::ArrayXd& g) {
  switch (nu) {
    case 1:
      g = (r2 < kR2Floor).select(Eigen::ArrayXd::Zero(r2.size()),
                                 r2.max(kR2Floor).rsqrt());
      return;
    case 2: g = r2.max(kR2Floor).log() + 1.0; return;
    case 3: g = 3.0 * r2.sqrt(); return;
    default: throw ValidationError("projection: kernel order must be 1, 2 or 3");
  }
}

/// dg/d(r^2), so that the kernel Hessian is g * I + 2 g' * u u^T. The same
/// zero-distance conventions apply (the u u^T factor vanishes at the center;
/// nu = 1 keeps the subgradient-zero convention).
void kernel_grad_factor_prime(int nu, const Eigen::ArrayXd& r2, Eigen::ArrayXd& gp) {
  switch (nu) {
    case 1:
      gp = (r2 < kR2Floor).select(Eigen::ArrayXd::Zero(r2.size()),
                                  -0.5 * r2.max(kR2Floor).pow(-1.5));
      return;
    case 2: gp = r2.max(kR2Floor).inverse(); return;
    case 3: gp = 1.5 * r2.max(kR2Floor).rsqrt(); return;
    default: throw ValidationError("projection: kernel order must be 1, 2 or 3");
  }
}

/// f evaluated at every row of T (M x d) -> M x D. Accumulates one rank-1
/// update per center; per-element arithmetic is independent of which other
/// rows share the block, so results do not depend on batch composition.
Matrix block_values(const SplineMap& f, const Matrix& T) {
  const Eigen::Index M = T.rows();
  Matrix V = f.affine.row(0).replicate(M, 1);
  for (int a = 0; a < f.d; ++a) V.noalias() += T.col(a) * f.affine.row(1 + a);
  const Eigen::Index N = f.centers.rows();
  Eigen::ArrayXd r2(M), k(M);
  const int nu = f.order();
  for (Eigen::Index j = 0; j < N; ++j) {
    r2 = (T.col(0).array() - f.centers(j, 0)).square();
    for (int a = 1; a < f.d; ++a)
      r2 += (T.col(a).array() - f.centers(j, a)).square();
    kernel_values(nu, r2, k);
    V.noalias() += k.matrix() * f.kernel.row(j);
  }
  return V;
}

/// Jacobian columns J[a] (M x D, df/dt_a per row) plus the residual-weighted
/// curvature sum_l r_l * Hess f_l, split as S1 * I + packed S2: for each row
/// m, sum over centers of c * (g * I + 2 g' * u u^T) with c = kernel_j . r_m.
/// R holds the current residuals f(t) - x per row.
void block_derivatives(const SplineMap& f, const Matrix& T, const Matrix& R,
                       std::array<Matrix, 3>& J, Eigen::ArrayXd& S1, Matrix& S2) {
  const Eigen::Index M = T.rows();
  const int d = f.d;
  for (int a = 0; a < d; ++a) J[a] = f.affine.row(1 + a).replicate(M, 1);
  S1 = Eigen::ArrayXd::Zero(M);
  const int n_upper = d * (d + 1) / 2;
  S2 = Matrix::Zero(M, n_upper);
  const Eigen::Index N = f.centers.rows();
  Matrix diff(M, 3);
  Eigen::ArrayXd r2(M), g(M), gp(M), c(M);
  const int nu = f.order();
  for (Eigen::Index j = 0; j < N; ++j) {
    diff.col(0) = T.col(0).array() - f.centers(j, 0);
    r2 = diff.col(0).array().square();
    for (int a = 1; a < d; ++a) {
      diff.col(a) = T.col(a).array() - f.centers(j, a);
      r2 += diff.col(a).array().square();
    }
    kernel_grad_factor(nu, r2, g);
    kernel_grad_factor_prime(nu, r2, gp);
    for (int a = 0; a < d; ++a)
      J[a].noalias() += (g * diff.col(a).array()).matrix() * f.kernel.row(j);
    c = (R * f.kernel.row(j).transpose()).array();
    S1 += c * g;
    int slot = 0;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b, ++slot)
        S2.col(slot).array() +=
            2.0 * c * gp * diff.col(a).array() * diff.col(b).array();
  }
}

struct Minimum {
  Vector t;
  double dist2;
};

void clip_row(Matrix& t, Eigen::Index row, const Matrix& box) {
  for (Eigen::Index a = 0; a < t.cols(); ++a)
    t(row, a) = std::min(std::max(t(row, a), box(a, 0)), box(a, 1));
}

/// Damped Gauss-Newton descent of ||f(t) - x||^2 clipped to the box, run
/// simultaneously for every (point, start) pair. Each row's iterates depend
/// only on that row's state, so the outcome matches one-at-a-time descent.
class DescentBlock {
 public:
  DescentBlock(const SplineMap& f, const Matrix& X, const Matrix& nodes,
               const Matrix& node_values, const Matrix& box, double refine_tol,
               int max_iter)
      : f_(f), X_(X), box_(box), refine_tol_(refine_tol), max_iter_(max_iter),
        P_(X.rows()), A_(nodes.rows()), M_(P_ * A_) {
    T_.resize(M_, f.d);
    R_.resize(M_, f.D);
    phi_.resize(M_);
    damping_.assign(static_cast<std::size_t>(M_), 1e-4);
    alive_.assign(static_cast<std::size_t>(M_), 1);
    for (Eigen::Index p = 0; p < P_; ++p)
      for (Eigen::Index s = 0; s < A_; ++s) {
        Eigen::Index m = p * A_ + s;
        T_.row(m) = nodes.row(s);
        R_.row(m) = node_values.row(s) - X.row(p);
        phi_[m] = R_.row(m).squaredNorm();
      }
  }

  void run() {
    std::vector<Eigen::Index> act;
    act.reserve(static_cast<std::size_t>(M_));
    for (int sweep = 0; sweep < max_iter_; ++sweep) {
      act.clear();
      for (Eigen::Index m = 0; m < M_; ++m)
        if (alive_[static_cast<std::size_t>(m)]) act.push_back(m);
      if (act.empty()) return;
      step_all(act);
    }
  }

  /// Final candidate for (point p, start s).
  Minimum result(Eigen::Index p, Eigen::Index s) const {
    Eigen::Index m = p * A_ + s;
    return {T_.row(m).transpose(), phi_[m]};
  }

 private:
  void step_all(const std::vector<Eigen::Index>& act) {
    const int d = f_.d;
    const Eigen::Index Ma = static_cast<Eigen::Index>(act.size());
    Matrix Ta(Ma, d), Ra(Ma, f_.D);
    for (Eigen::Index i = 0; i < Ma; ++i) {
      Ta.row(i) = T_.row(act[i]);
      Ra.row(i) = R_.row(act[i]);
    }
    std::array<Matrix, 3> Jcol;
    Eigen::ArrayXd S1;
    Matrix S2;
    block_derivatives(f_, Ta, Ra, Jcol, S1, S2);

    // Per-row gradient, Newton matrix, and stationarity test. The curvature
    // term makes narrow curved valleys converge quadratically where plain
    // Gauss-Newton crawls; the monotone line search below keeps every step
    // a descent step regardless of Hessian definiteness.
    Matrix G(Ma, d);          // gradient of phi
    Matrix H(Ma, d * d);      // packed d x d blocks
    std::vector<Eigen::Index> attempting;
    attempting.reserve(act.size());
    Matrix Jm(f_.D, d);
    for (Eigen::Index i = 0; i < Ma; ++i) {
      const Eigen::Index m = act[i];
      for (int a = 0; a < d; ++a) Jm.col(a) = Jcol[a].row(i).transpose();
      Vector g = 2.0 * Jm.transpose() * R_.row(m).transpose();
      Vector pg = g;
      for (int a = 0; a < d; ++a) {
        double w = box_(a, 1) - box_(a, 0);
        if (T_(m, a) <= box_(a, 0) + 1e-12 * w && g[a] > 0.0) pg[a] = 0.0;
        if (T_(m, a) >= box_(a, 1) - 1e-12 * w && g[a] < 0.0) pg[a] = 0.0;
      }
      double scale = 2.0 * Jm.norm() * std::sqrt(phi_[m]) + 1e-300;
      if (pg.norm() <= 1e-9 * scale) {
        alive_[static_cast<std::size_t>(m)] = 0;  // first-order stationary
        continue;
      }
      G.row(i) = g.transpose();
      Matrix Hm = 2.0 * Jm.transpose() * Jm;
      for (int a = 0; a < d; ++a) Hm(a, a) += 2.0 * S1[i];
      int slot = 0;
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b, ++slot) {
          Hm(a, b) += 2.0 * S2(i, slot);
          if (b != a) Hm(b, a) += 2.0 * S2(i, slot);
        }
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) H(i, a * d + b) = Hm(a, b);
      attempting.push_back(i);
    }

    // Shared line search: damping grows per rejected row until acceptance,
    // retirement, or attempt exhaustion.
    Matrix trial;
    for (int attempt = 0; attempt < 30 && !attempting.empty(); ++attempt) {
      const Eigen::Index Mt = static_cast<Eigen::Index>(attempting.size());
      trial.resize(Mt, d);
      Matrix Hd(d, d);
      Vector rhs(d);
      for (Eigen::Index q = 0; q < Mt; ++q) {
        const Eigen::Index i = attempting[static_cast<std::size_t>(q)];
        const Eigen::Index m = act[i];
        // Magnitude-based damping: stays effective when the Newton matrix is
        // indefinite (negative diagonal entries), turning large-damping steps
        // into short gradient steps.
        double mean_abs = 0.0;
        for (int a = 0; a < d; ++a) mean_abs += std::abs(H(i, a * d + a));
        mean_abs = mean_abs / d + 1e-300;
        double diag_floor = 1e-14 * mean_abs;
        for (int a = 0; a < d; ++a) {
          rhs[a] = -G(i, a);
          for (int b = 0; b < d; ++b) Hd(a, b) = H(i, a * d + b);
          Hd(a, a) += damping_[static_cast<std::size_t>(m)] *
                          std::max(std::abs(Hd(a, a)), mean_abs) +
                      diag_floor;
        }
        Vector step = Hd.ldlt().solve(rhs);
        trial.row(q) = T_.row(m) + step.transpose();
        clip_row(trial, q, box_);
      }
      Matrix Vt = block_values(f_, trial);

      std::vector<Eigen::Index> still;
      for (Eigen::Index q = 0; q < Mt; ++q) {
        const Eigen::Index i = attempting[static_cast<std::size_t>(q)];
        const Eigen::Index m = act[i];
        const std::size_t sm = static_cast<std::size_t>(m);
        Eigen::RowVectorXd res = Vt.row(q) - X_.row(m / A_);
        double phi_trial = res.squaredNorm();
        if (phi_trial <= phi_[m]) {
          double step_inf = (trial.row(q) - T_.row(m)).lpNorm<Eigen::Infinity>();
          double gain = phi_[m] - phi_trial;
          T_.row(m) = trial.row(q);
          R_.row(m) = res;
          phi_[m] = phi_trial;
          damping_[sm] = std::max(damping_[sm] / 3.0, 1e-12);
          // Done when the iterate stops moving, or when improvements reach
          // rounding level (flat ambiguity continua never stop moving).
          if (step_inf <= refine_tol_ || gain <= 1e-13 * phi_trial) alive_[sm] = 0;
        } else {
          damping_[sm] *= 8.0;
          if (damping_[sm] > 1e12)
            alive_[sm] = 0;  // line search exhausted; keep the current point
          else
            still.push_back(i);
        }
      }
      attempting.swap(still);
    }
    for (Eigen::Index i : attempting)
      alive_[static_cast<std::size_t>(act[i])] = 0;  // 30 attempts used up
  }

  const SplineMap& f_;
  const Matrix& X_;
  Matrix box_;
  double refine_tol_;
  int max_iter_;
  Eigen::Index P_, A_, M_;
  Matrix T_, R_;
  Vector phi_;
  std::vector<double> damping_;
  std::vector<char> alive_;
};

Projection pick_minimum(const std::vector<Minimum>& minima, double tie_tol_factor) {
  double best = minima.front().dist2;
  for (const auto& m : minima) best = std::min(best, m.dist2);
  double best_dist = std::sqrt(best);
  double tie = tie_tol_factor * best_dist;

  const Minimum* pick = nullptr;
  for (const auto& m : minima) {
    if (std::sqrt(m.dist2) > best_dist + tie) continue;
    if (pick == nullptr) {
      pick = &m;
      continue;
    }
    // Lexicographic sup rule: larger first coordinate wins, then the next.
    for (Eigen::Index a = 0; a < m.t.size(); ++a) {
      if (m.t[a] > pick->t[a]) {
        pick = &m;
        break;
      }
      if (m.t[a] < pick->t[a]) break;
    }
  }
  return {pick->t, pick->dist2, static_cast<int>(minima.size())};
}

/// Multi-start projection of each row of X; nodes/node_values are the shared
/// coarse grid and its evaluations.
void project_rows(const SplineMap& f, const Matrix& X, const Matrix& nodes,
                  const Matrix& node_values, const Matrix& box,
                  const ProjectOptions& opts, Matrix& out_t, Vector& out_dist2,
                  std::vector<int>* out_nmin) {
  const Eigen::Index P = X.rows();
  const Eigen::Index A = nodes.rows();
  double box_diam = (box.col(1) - box.col(0)).norm();
  double refine_tol = opts.refine_tol_factor * std::max(box_diam, 1e-300);
  double dedup_tol = std::max(10.0 * refine_tol, 1e-12 * box_diam);

  DescentBlock block(f, X, nodes, node_values, box, refine_tol, opts.max_iter);
  block.run();

  std::vector<Minimum> minima;
  for (Eigen::Index p = 0; p < P; ++p) {
    minima.clear();
    for (Eigen::Index s = 0; s < A; ++s) {
      Minimum m = block.result(p, s);
      bool merged = false;
      for (auto& existing : minima) {
        if ((existing.t - m.t).lpNorm<Eigen::Infinity>() <= dedup_tol) {
          if (m.dist2 < existing.dist2) existing = m;
          merged = true;
          break;
        }
      }
      if (!merged) minima.push_back(std::move(m));
    }
    Projection pr = pick_minimum(minima, opts.tie_tol_factor);
    out_t.row(p) = pr.t.transpose();
    out_dist2[p] = pr.dist2;
    if (out_nmin) (*out_nmin)[static_cast<std::size_t>(p)] = pr.n_minima;
  }
}

int resolve_per_axis(const SplineMap& f, const ProjectOptions& opts) {
  if (opts.coarse_per_axis == 0) return default_coarse(f.d);
  if (opts.coarse_per_axis < 2)
    throw ValidationError("project: coarse grid needs at least 2 nodes per axis (0 = default)");
  return opts.coarse_per_axis;
}

}  // namespace

Matrix default_box(const SplineMap& f) {
  Matrix box(f.d, 2);
  for (int a = 0; a < f.d; ++a) {
    double lo = f.centers.col(a).minCoeff();
    double hi = f.centers.col(a).maxCoeff();
    double w = hi - lo;
    if (w <= 0.0) w = 1.0;  // degenerate axis: arbitrary unit window
    box(a, 0) = lo - 0.25 * w;
    box(a, 1) = hi + 0.25 * w;
  }
  return box;
}

Projection project(const SplineMap& f, const Vector& x, const ProjectOptions& opts) {
  if (x.size() != f.D) throw ValidationError("project: point dimension mismatch");
  Matrix box = resolve_box(f, opts);
  int per_axis = resolve_per_axis(f, opts);
  Matrix nodes = coarse_nodes(box, per_axis);
  Matrix values = block_values(f, nodes);

  Matrix t(1, f.d);
  Vector dist2(1);
  std::vector<int> nmin(1);
  project_rows(f, x.transpose(), nodes, values, box, opts, t, dist2, &nmin);
  return {t.row(0).transpose(), dist2[0], nmin[0]};
}

BatchProjection project_batch(const SplineMap& f, const Matrix& X,
                              const ProjectOptions& opts) {
  if (X.cols() != f.D) throw ValidationError("project_batch: point dimension mismatch");
  Matrix box = resolve_box(f, opts);
  int per_axis = resolve_per_axis(f, opts);
  Matrix nodes = coarse_nodes(box, per_axis);
  Matrix values = block_values(f, nodes);

  BatchProjection out;
  out.t = Matrix(X.rows(), f.d);
  out.dist2 = Vector(X.rows());

  // Fixed-size chunks keep the working set bounded; per-point results do not
  // depend on the chunking, so any thread count gives identical output.
  const Eigen::Index chunk = std::max<Eigen::Index>(1, 32768 / std::max<Eigen::Index>(1, nodes.rows()));
  const Eigen::Index n_chunks = (X.rows() + chunk - 1) / chunk;
  parallel_for(n_chunks, [&](std::int64_t c) {
    Eigen::Index lo = static_cast<Eigen::Index>(c) * chunk;
    Eigen::Index hi = std::min<Eigen::Index>(lo + chunk, X.rows());
    Matrix t(hi - lo, f.d);
    Vector dist2(hi - lo);
    project_rows(f, X.middleRows(lo, hi - lo), nodes, values, box, opts, t,
                 dist2, nullptr);
    out.t.middleRows(lo, hi - lo) = t;
    out.dist2.segment(lo, hi - lo) = dist2;
  });
  return out;
}

}  // namespace pme
