#pragma once

#include "pme/types.hpp"

namespace pme {

/// Radial kernel of order nu: r^nu for odd nu, r^nu * log(r) for even nu
/// (value 0 at r = 0). Smoothing maps of intrinsic dimension d use
/// nu = 4 - d.
double eta(int nu, double r);

/// Gradient of t -> eta(nu, ||t - c||) at u = t - c. For nu >= 2 the kernel
/// is differentiable at the origin with zero gradient; for nu = 1 the
/// subgradient 0 is returned at the origin.
Vector eta_grad(int nu, const Vector& u);

/// A fitted map f: R^d -> R^D in kernel-plus-affine form:
///   f_l(t) = sum_j kernel(j,l) * eta(4-d, ||t - centers_j||)
///          + affine(0,l) + sum_a affine(1+a,l) * t_a
/// subject to the side condition T' * kernel = 0 at fit time.
struct SplineMap {
  int d = 0;
  int D = 0;
  Matrix centers;  // N x d
  Matrix kernel;   // N x D
  Matrix affine;   // (d+1) x D

  int order() const { return 4 - d; }
  int knot_count() const { return static_cast<int>(centers.rows()); }

  Vector eval(const Eigen::Ref<const Vector>& t) const;
  /// Values at many parameters, one row per row of T_in.
  Matrix eval_rows(const Matrix& t_rows) const;
  /// Jacobian df/dt, D x d.
  Matrix jacobian(const Eigen::Ref<const Vector>& t) const;
};

/// Bending energy sum_l s_l' E s_l with E rebuilt from the map's centers.
double hessian_penalty(const SplineMap& f);

/// Assembled weighted penalized least-squares problem.
///
/// Duplicate knots within 1e-9 * diam(knot bbox) are merged first (weights
/// summed, targets weight-averaged) and zero-weight knots are dropped: they
/// contribute nothing to the objective, and forcing their kernel coefficient
/// to zero is the unique choice that keeps the stationarity conditions exact.
/// The solved system is the stationarity form
///   (E + lambda * W^{-1}) s + T a = targets,   T' s = 0,
/// which keeps the conditioning of the kernel matrix itself rather than its
/// square.
struct SplineDesign {
  int d = 0;
  int D = 0;
  Matrix knots;    // N x d, post-merge, positive weight only
  Matrix targets;  // N x D
  Vector weights;  // N
  double lambda = 0.0;
  Matrix E;        // N x N kernel block
  Matrix T;        // N x (d+1) polynomial block, T(i,.) = (1, knot_i)
};

SplineDesign assemble(const Matrix& knots, const Matrix& targets,
                      const Vector& weights, double lambda);

struct SplineSolution {
  SplineMap map;
  double residual;  // worst relative residual over the two stationarity blocks
};

/// Solves the stationarity system by eliminating the side condition: with
/// T = [Q1 Q2] R, substitute s = Q2 y and solve the reduced dense system for
/// y (full-pivot LU plus one refinement step), then back out the affine part
/// through R. The side condition T' s = 0 holds to machine precision by
/// construction. Throws NumericalError when the reduced system is singular
/// or the relative residual exceeds 1e-8; the message suggests jittering
/// lambda or merging knots.
SplineSolution solve(const SplineDesign& design);

/// Fit functional evaluated for an arbitrary map against a design:
///   sum_j w_j ||target_j - f(knot_j)||^2 + lambda * hessian_penalty(f).
/// Lets callers compare maps with different centers on the same data.
double fit_objective(const SplineDesign& design, const SplineMap& f);

}  // namespace pme
