// Independent reference implementations used to check library results.
// Everything here is written the direct, slow way on purpose: dense scans,
// textbook formulas, no shared code with the library internals.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// dense-grid nearest-parameter search

struct DenseProjection {
  pme::Vector t;
  double dist2 = 0.0;
  double resolution = 0.0;  // parameter-space grid spacing (max over axes)
};

// Scans an n-per-axis lattice over box (d x 2) for the parameter whose image
// is nearest x.
inline DenseProjection dense_project(const pme::SplineMap& f, const pme::Vector& x,
                                     const pme::Matrix& box, int n) {
  const int d = f.d;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  pme::Vector t(d), best_t(d);
  double best = std::numeric_limits<double>::infinity();
  double res = 0.0;
  for (int a = 0; a < d; ++a)
    res = std::max(res, (box(a, 1) - box(a, 0)) / static_cast<double>(n - 1));
  bool done = false;
  while (!done) {
    for (int a = 0; a < d; ++a)
      t[a] = box(a, 0) + (box(a, 1) - box(a, 0)) * idx[static_cast<std::size_t>(a)] /
                             static_cast<double>(n - 1);
    double dist2 = (f.eval(t) - x).squaredNorm();
    if (dist2 < best) {
      best = dist2;
      best_t = t;
    }
    int a = d - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == n) {
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    done = a < 0;
  }
  return {best_t, best, res};
}

// ---------------------------------------------------------------------------
// weighted affine least squares (the lambda -> infinity limit)

// Minimizes sum_i w_i ||y_i - a0 - A t_i||^2 by the normal equations over the
// stacked coefficient matrix [a0; A].
inline pme::Matrix weighted_affine(const pme::Matrix& t, const pme::Matrix& y,
                                   const pme::Vector& w) {
  const Eigen::Index n = t.rows(), d = t.cols();
  pme::Matrix X(n, d + 1);
  X.col(0).setOnes();
  X.rightCols(d) = t;
  pme::Matrix XtW = X.transpose() * w.asDiagonal();
  return (XtW * X).ldlt().solve(XtW * y);  // (d+1) x D, row 0 = intercept
}

// ---------------------------------------------------------------------------
// mixture density statistics, computed naively

inline double gauss_density(const pme::Vector& x, const pme::Vector& mu, double sigma) {
  const double dd = static_cast<double>(x.size());
  double norm = std::pow(2.0 * M_PI * sigma * sigma, -0.5 * dd);
  return norm * std::exp(-(x - mu).squaredNorm() / (2.0 * sigma * sigma));
}

inline double mixture_density_at(const pme::Matrix& centers, const pme::Vector& theta,
                                 double sigma, const pme::Vector& x) {
  double p = 0.0;
  for (Eigen::Index j = 0; j < centers.rows(); ++j)
    p += theta[j] * gauss_density(x, centers.row(j).transpose(), sigma);
  return p;
}

struct BruteZ {
  double z = 0.0;
  double delta_mean = 0.0;
  double delta_sd = 0.0;
};

// sqrt(I) * mean(delta) / sd(delta) with delta_i the density difference of
// the two mixtures at sample point i and sd the population standard
// deviation.
inline BruteZ brute_z(const pme::Matrix& c_n, const pme::Vector& th_n, double sg_n,
                      const pme::Matrix& c_n1, const pme::Vector& th_n1, double sg_n1,
                      const pme::Matrix& X) {
  const Eigen::Index I = X.rows();
  double sum = 0.0, sum2 = 0.0;
  for (Eigen::Index i = 0; i < I; ++i) {
    pme::Vector x = X.row(i).transpose();
    double delta = mixture_density_at(c_n1, th_n1, sg_n1, x) -
                   mixture_density_at(c_n, th_n, sg_n, x);
    sum += delta;
    sum2 += delta * delta;
  }
  BruteZ out;
  out.delta_mean = sum / static_cast<double>(I);
  out.delta_sd =
      std::sqrt(std::max(0.0, sum2 / static_cast<double>(I) - out.delta_mean * out.delta_mean));
  out.z = std::sqrt(static_cast<double>(I)) * out.delta_mean /
          (out.delta_sd > 0.0 ? out.delta_sd : 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// plain (unconstrained) EM for mixture weights

inline pme::Vector unconstrained_em(const pme::Matrix& X, const pme::Matrix& centers,
                                    double sigma, int iters) {
  const Eigen::Index I = X.rows(), N = centers.rows();
  pme::Vector theta = pme::Vector::Constant(N, 1.0 / static_cast<double>(N));
  for (int it = 0; it < iters; ++it) {
    pme::Vector next = pme::Vector::Zero(N);
    for (Eigen::Index i = 0; i < I; ++i) {
      pme::Vector resp(N);
      for (Eigen::Index j = 0; j < N; ++j)
        resp[j] = theta[j] *
                  gauss_density(X.row(i).transpose(), centers.row(j).transpose(), sigma);
      double total = resp.sum();
      if (total > 0.0) next += resp / total;
    }
    theta = next / static_cast<double>(I);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// finite differences

inline pme::Matrix fd_jacobian(const pme::SplineMap& f, const pme::Vector& t,
                               double h = 1e-6) {
  pme::Matrix J(f.D, f.d);
  for (int a = 0; a < f.d; ++a) {
    pme::Vector tp = t, tm = t;
    tp[a] += h;
    tm[a] -= h;
    J.col(a) = (f.eval(tp) - f.eval(tm)) / (2.0 * h);
  }
  return J;
}

// ---------------------------------------------------------------------------
// even-odd ray casting for polygons (vertices in order, closed implicitly)

inline bool ray_cast_inside(const std::vector<std::array<double, 2>>& poly, double px,
                            double py) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = poly[i][0], yi = poly[i][1];
    const double xj = poly[j][0], yj = poly[j][1];
    const bool crosses = (yi > py) != (yj > py);
    if (crosses && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
  }
  return inside;
}

}  // namespace oracle
