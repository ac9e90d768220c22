#pragma once

#include <vector>

#include "pme/types.hpp"

namespace pme {

/// Default neighborhood size for graph construction: max(10, ceil(log2 I) + d).
int default_knn(int count, int d);

/// Symmetric k-nearest-neighbor graph in CSR form. An edge {i,j} exists when
/// either point lists the other among its k nearest (union rule); weights are
/// Euclidean distances. Neighbor-rank ties break by index.
struct NeighborGraph {
  int n = 0;
  std::vector<int> offsets;   // size n + 1
  std::vector<int> targets;
  std::vector<double> weights;
};

NeighborGraph knn_graph(const Matrix& X, int k);

/// All-pairs shortest-path matrix (Dijkstra per source, sources in parallel).
/// Throws when the graph is disconnected, reporting component count and sizes
/// and suggesting a larger k.
Matrix geodesic_distances(const NeighborGraph& graph);

struct MdsResult {
  Matrix coords;       // n x d, columns zero-mean
  Vector eigenvalues;  // top d eigenvalues of the centered Gram matrix
  int clamped = 0;     // columns zeroed because their eigenvalue was <= 0
};

/// Classical multidimensional scaling of a distance matrix (consumed by
/// value; the buffer is reused in place). Moderate sizes use a full symmetric
/// eigendecomposition; large ones a deterministic blocked subspace iteration
/// for the top eigenpairs, which is what makes full-data parameterization
/// feasible. Column signs follow the first-significant-loading-positive rule.
MdsResult classical_mds(Matrix dist, int d);

/// knn_graph + geodesic_distances + classical_mds. k = 0 uses default_knn.
Matrix isomap(const Matrix& X, int d, int k = 0);

}  // namespace pme
