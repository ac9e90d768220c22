#include "pme/fit.hpp"

#include <cmath>
#include <cstdio>

#include "pme/errors.hpp"
#include "pme/isomap.hpp"
#include "pme/parallel.hpp"

namespace pme {

double msd(const SplineMap& f, const Matrix& X, const ProjectOptions& opts) {
  if (X.rows() == 0) throw ValidationError("msd: empty point set");
  BatchProjection proj = project_batch(f, X, opts);
  return proj.dist2.mean();
}

double weighted_msd(const SplineMap& f, const Waj& waj, const ProjectOptions& opts) {
  BatchProjection proj = project_batch(f, waj.nodes, opts);
  return waj.weights.dot(proj.dist2);
}

namespace {

struct LoopResult {
  SplineMap map;
  int n_iter = 0;
  bool converged = false;
  bool returned_best = false;
  Vector trace;
};

/// Alternating solve/reproject given fixed nodes, weights and initial
/// parameters. Keeps the best-MSD iterate; returns it when the final one is
/// more than 10% worse.
LoopResult fit_loop(const Matrix& nodes, const Vector& weights, const Matrix& init_params,
                    double lambda, const FitOptions& opts) {
  std::vector<double> trace;
  SplineSolution sol = solve(assemble(init_params, nodes, weights, lambda));
  BatchProjection proj = project_batch(sol.map, nodes, opts.projection);
  double current = weights.dot(proj.dist2);
  trace.push_back(current);

  SplineMap best_map = sol.map;
  double best = current;
  bool converged = false;

  // Below this the map interpolates the nodes to machine precision; the
  // relative-change rule cannot fire (the sequence keeps shrinking
  // geometrically), so stop and report non-convergence like the exact-zero
  // case.
  const double zero_floor = 1e-28 * bbox_diameter(nodes) * bbox_diameter(nodes);

  while (static_cast<int>(trace.size()) < opts.max_outer) {
    if (current <= zero_floor) break;  // relative change undefined; flagged unconverged
    SplineSolution next = solve(assemble(proj.t, nodes, weights, lambda));
    BatchProjection next_proj = project_batch(next.map, nodes, opts.projection);
    double next_msd = weights.dot(next_proj.dist2);
    trace.push_back(next_msd);
    double rel = std::abs(next_msd - current) / current;
    sol = std::move(next);
    proj = std::move(next_proj);
    current = next_msd;
    if (current < best) {
      best = current;
      best_map = sol.map;
    }
    if (rel < opts.eps_star) {
      converged = true;
      break;
    }
  }

  LoopResult out;
  out.n_iter = static_cast<int>(trace.size());
  out.converged = converged;
  out.trace = Eigen::Map<Vector>(trace.data(), static_cast<Eigen::Index>(trace.size()));
  if (best > 0.0 && current > 1.1 * best) {
    out.map = std::move(best_map);
    out.returned_best = true;
  } else {
    out.map = std::move(sol.map);
  }
  return out;
}

Matrix initial_parameters(const Matrix& nodes, int d, int knn) {
  int k = knn > 0 ? knn : default_knn(static_cast<int>(nodes.rows()), d);
  return isomap(nodes, d, k);
}

}  // namespace

FitResult fit_to_waj(const Waj& waj, int d, double lambda, const FitOptions& opts) {
  if (waj.size() == 0) throw ValidationError("fit_to_waj: empty node summary");
  if (d < 1 || d > 3) throw ValidationError("fit_to_waj: d must be 1, 2 or 3");
  Matrix params = initial_parameters(waj.nodes, d, opts.knn);
  return fit_to_waj(waj, params, lambda, opts);
}

FitResult fit_to_waj(const Waj& waj, const Matrix& init_params, double lambda,
                     const FitOptions& opts) {
  if (waj.size() == 0) throw ValidationError("fit_to_waj: empty node summary");
  if (init_params.rows() != waj.nodes.rows())
    throw ValidationError("fit_to_waj: one parameter row per node required");
  LoopResult loop = fit_loop(waj.nodes, waj.weights, init_params, lambda, opts);
  FitResult out;
  out.map = std::move(loop.map);
  out.lambda = lambda;
  out.n_iter = loop.n_iter;
  out.converged = loop.converged;
  out.returned_best = loop.returned_best;
  out.trace = std::move(loop.trace);
  out.waj = waj;
  return out;
}

FitResult pme_fit(const Matrix& X, int d, double lambda, const FitOptions& opts) {
  HdmdeResult reduced = hdmde(X, opts.reduction);
  FitResult out = fit_to_waj(reduced.waj, d, lambda, opts);
  out.msd = msd(out.map, X, opts.projection);
  return out;
}

Vector default_lambda_grid() {
  Vector grid(21);
  for (int k = -15; k <= 5; ++k) grid[k + 15] = std::exp(static_cast<double>(k));
  return grid;
}

SelectionResult select_lambda(const Matrix& X, int d, const Vector& grid_in,
                              const FitOptions& opts) {
  Vector grid = grid_in.size() > 0 ? grid_in : default_lambda_grid();
  if ((grid.array() < 0.0).any())
    throw ValidationError("select_lambda: negative lambda in grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("select_lambda: grid must be strictly increasing");

  // The node summary and the initial parameterization depend only on the
  // data; both are shared across the grid.
  HdmdeResult reduced = hdmde(X, opts.reduction);
  Matrix params = initial_parameters(reduced.waj.nodes, d, opts.knn);

  std::vector<FitResult> fits(static_cast<std::size_t>(grid.size()));
  Vector msds(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    LoopResult loop = fit_loop(reduced.waj.nodes, reduced.waj.weights, params,
                               grid[g], opts);
    FitResult fr;
    fr.map = std::move(loop.map);
    fr.lambda = grid[g];
    fr.n_iter = loop.n_iter;
    fr.converged = loop.converged;
    fr.returned_best = loop.returned_best;
    fr.trace = std::move(loop.trace);
    fr.waj = reduced.waj;
    fr.msd = msd(fr.map, X, opts.projection);
    msds[g] = fr.msd;
    fits[static_cast<std::size_t>(g)] = std::move(fr);
  }

  // The test MSD is a sample mean over the data, so candidates within one
  // standard error of the minimum are ties; ties go to the largest lambda
  // (prefer the smoother fit).
  Eigen::Index arg_min = 0;
  double best = msds.minCoeff(&arg_min);
  BatchProjection best_proj =
      project_batch(fits[static_cast<std::size_t>(arg_min)].map, X, opts.projection);
  const double n = static_cast<double>(best_proj.dist2.size());
  double se = std::sqrt(std::max(
      0.0, (best_proj.dist2.array().square().mean() - best * best) / n));
  double diam = bbox_diameter(X);
  double tie = std::max({se, 1e-9 * best, 1e-12 * diam * diam});
  int pick = 0;
  for (Eigen::Index g = 0; g < grid.size(); ++g)
    if (msds[g] <= best + tie) pick = static_cast<int>(g);

  SelectionResult out;
  out.best = std::move(fits[static_cast<std::size_t>(pick)]);
  out.grid = std::move(grid);
  out.msds = std::move(msds);
  out.best_index = pick;
  return out;
}

FitResult baseline_isomap_fit(const Matrix& X, int d, double lambda, int knn,
                              const ProjectOptions& opts) {
  const int I = static_cast<int>(X.rows());
  if (I == 0) throw ValidationError("baseline_isomap_fit: empty point set");
  if (I > 4000)
    std::fprintf(stderr,
                 "warning: baseline_isomap_fit: all-pairs geodesics over %d points "
                 "are quadratic in memory and worse in time\n",
                 I);
  int k = knn > 0 ? knn : default_knn(I, d);
  Matrix params = isomap(X, d, k);
  Vector weights = Vector::Constant(I, 1.0 / I);
  SplineSolution sol = solve(assemble(params, X, weights, lambda));
  FitResult out;
  out.map = std::move(sol.map);
  out.lambda = lambda;
  out.n_iter = 1;
  out.converged = true;
  out.msd = msd(out.map, X, opts);
  out.trace = Vector::Constant(1, out.msd);
  return out;
}

}  // namespace pme
