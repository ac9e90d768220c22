#pragma once

#include <cstdint>
#include <vector>

#include "pme/types.hpp"

namespace pme {

struct KmeansResult {
  Matrix centers;               // N x D, every cluster nonempty
  std::vector<int> assignment;  // size I
};

/// Lloyd's algorithm with kmeans++ seeding. Empty clusters are reseeded from
/// the point farthest from its center. Deterministic for a fixed seed.
KmeansResult kmeans(const Matrix& X, int N, std::uint64_t seed, int max_iter = 100);

/// Kernel bandwidth: root of the per-dimension average within-cluster mean
/// squared distance. Zero only when every point coincides with its center.
double estimate_sigma(const Matrix& X, const KmeansResult& clusters);

struct EmOptions {
  double eps = 1e-4;             // sup-norm stop on weight changes
  int max_iter = 1000;
  double mean_tol_factor = 1e-6; // mean-constraint tolerance, x diam(X)
};

/// Constrained EM for mixture weights: nonnegative, unit mass, and mixture
/// mean pinned to the sample mean. Each update solves a small root-finding
/// problem for the constraint multipliers (damped Gauss-Newton from the
/// unconstrained point). Responsibilities are computed in log space.
Vector em_theta(const Matrix& X, const Matrix& centers, double sigma,
                const EmOptions& opts = {});

/// Isotropic Gaussian mixture with one bandwidth.
struct MixtureModel {
  Matrix centers;  // N x D
  Vector theta;    // N
  double sigma = 0.0;
};

/// Density values p(x_i) for every row of X.
Vector mixture_density(const MixtureModel& model, const Matrix& X);

/// Paired comparison of two mixture fits (sizes N and N+1).
struct ZReport {
  int model_size = 0;   // N of the smaller model
  double z = 0.0;       // sqrt(I) * mean / sd of density increments
  double delta_mean = 0.0;
  double delta_sd = 0.0;
};

ZReport z_statistic(const MixtureModel& model_n, const MixtureModel& model_n1,
                    const Matrix& X);

/// Weighted node summary of a cloud: mixture centers, weights, bandwidth.
struct Waj {
  Matrix nodes;    // N x D
  Vector weights;  // N, nonnegative, sums to one
  double sigma = 0.0;
  double alpha = 0.0;  // provenance: significance level used
  int n0 = 0;          // provenance: starting model size

  int size() const { return static_cast<int>(nodes.rows()); }
  int dim() const { return static_cast<int>(nodes.cols()); }
};

struct HdmdeOptions {
  int n0 = 0;       // 0: 20 * D
  double alpha = 0.05;
  int n_max = 0;    // 0: I / 2
  std::uint64_t seed = 0;
  EmOptions em;
};

struct HdmdeResult {
  Waj waj;
  std::vector<ZReport> trace;  // one entry per tested model size
};

/// Model-size selection: grow N from n0, refitting k-means, bandwidth and
/// weights at each size, until the density-increment statistic drops below
/// the normal quantile for alpha. Returns the accepted model as a Waj.
HdmdeResult hdmde(const Matrix& X, const HdmdeOptions& opts = {});

}  // namespace pme
