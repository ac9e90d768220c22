#pragma once

#include "pme/hdmde.hpp"
#include "pme/projection.hpp"
#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace pme {

struct FitOptions {
  double eps_star = 1e-3;  // relative stop on the weighted-MSD sequence
  int max_outer = 100;
  int knn = 0;             // neighbors for the parameter initialization; 0 auto
  ProjectOptions projection;
  HdmdeOptions reduction;
};

struct FitResult {
  SplineMap map;
  double lambda = 0.0;
  double msd = 0.0;        // mean squared projection distance over the raw data
  int n_iter = 0;          // linear solves performed, initialization included
  bool converged = false;
  bool returned_best = false;  // final iterate replaced by the best-MSD one
  Vector trace;            // weighted MSD per iterate
  Waj waj;                 // node summary used for fitting (empty for baseline)
};

/// Mean squared projection distance of rows of X onto f.
double msd(const SplineMap& f, const Matrix& X, const ProjectOptions& opts = {});

/// Node-weighted MSD: sum_j w_j ||mu_j - f(proj(mu_j))||^2.
double weighted_msd(const SplineMap& f, const Waj& waj, const ProjectOptions& opts = {});

/// Fits a d-dimensional map to a precomputed node summary: graph-based
/// parameter initialization of the nodes, then alternating solve/reproject
/// until the weighted MSD stabilizes. If the final iterate is more than 10%
/// worse than the best seen, the best is returned and flagged. msd is not
/// filled (no raw data here).
FitResult fit_to_waj(const Waj& waj, int d, double lambda, const FitOptions& opts = {});

/// Same, but from an explicit initial node parameterization (one row per
/// node; d = its column count). Lets callers share one graph initialization
/// across several smoothing values.
FitResult fit_to_waj(const Waj& waj, const Matrix& init_params, double lambda,
                     const FitOptions& opts = {});

/// Full pipeline on raw data: node reduction, fit, and test MSD against X.
FitResult pme_fit(const Matrix& X, int d, double lambda, const FitOptions& opts = {});

/// The stock smoothing grid {e^k : k = -15..5}, ascending.
Vector default_lambda_grid();

struct SelectionResult {
  FitResult best;
  Vector grid;
  Vector msds;        // test MSD per grid value
  int best_index = 0;
};

/// Fits every grid value (node reduction and parameter initialization are
/// shared) and keeps the smallest test MSD. The test MSD is a sample mean
/// over the data, so grid values within one standard error of the minimum
/// count as ties; ties resolve toward the largest lambda, preferring the
/// smoother fit (the usual one-standard-error selection rule).
SelectionResult select_lambda(const Matrix& X, int d, const Vector& grid = Vector(),
                              const FitOptions& opts = {});

/// One-shot reference fit: every data point becomes a knot at its graph
/// parameterization with uniform weight, one linear solve, no iteration.
/// Warns to stderr for large inputs (all-pairs geodesics are quadratic).
FitResult baseline_isomap_fit(const Matrix& X, int d, double lambda, int knn = 0,
                              const ProjectOptions& opts = {});

}  // namespace pme
