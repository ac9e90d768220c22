#include "pme/isomap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

#include "pme/errors.hpp"
#include "pme/kdtree.hpp"
#include "pme/parallel.hpp"
#include "pme/rng.hpp"

namespace pme {

int default_knn(int count, int d) {
  int log2_count = static_cast<int>(std::ceil(std::log2(std::max(count, 2))));
  return std::max(10, log2_count + d);
}

NeighborGraph knn_graph(const Matrix& X, int k) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) throw ValidationError("knn_graph: need at least two points");
  if (k < 1) throw ValidationError("knn_graph: k must be positive");
  k = std::min(k, n - 1);

  KdTree tree(X);
  std::vector<std::vector<std::pair<int, double>>> lists(n);
  parallel_for(n, [&](std::int64_t i) {
    std::vector<int> idx;
    std::vector<double> d2;
    tree.knn(X.row(i).transpose(), k + 1, idx, d2);  // +1 covers the self hit
    auto& out = lists[i];
    out.reserve(k);
    for (std::size_t m = 0; m < idx.size() && static_cast<int>(out.size()) < k; ++m) {
      if (idx[m] == static_cast<int>(i)) continue;
      out.emplace_back(idx[m], std::sqrt(d2[m]));
    }
  });

  // Union symmetrization: copy each directed edge both ways, then dedup.
  std::vector<std::vector<std::pair<int, double>>> sym(n);
  for (int i = 0; i < n; ++i) {
    for (auto& [j, w] : lists[i]) {
      sym[i].emplace_back(j, w);
      sym[j].emplace_back(i, w);
    }
  }
  NeighborGraph g;
  g.n = n;
  g.offsets.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    auto& row = sym[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              row.end());
    g.offsets[i + 1] = g.offsets[i] + static_cast<int>(row.size());
  }
  g.targets.resize(g.offsets[n]);
  g.weights.resize(g.offsets[n]);
  for (int i = 0; i < n; ++i) {
    int at = g.offsets[i];
    for (auto& [j, w] : sym[i]) {
      g.targets[at] = j;
      g.weights[at] = w;
      ++at;
    }
  }
  return g;
}

namespace {

void check_connected(const NeighborGraph& g) {
  std::vector<int> comp(g.n, -1);
  std::vector<int> sizes;
  std::vector<int> stack;
  for (int s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    stack.push_back(s);
    comp[s] = id;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      ++sizes[id];
      for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
        int v = g.targets[e];
        if (comp[v] < 0) {
          comp[v] = id;
          stack.push_back(v);
        }
      }
    }
  }
  if (sizes.size() > 1) {
    std::string msg = "geodesic_distances: neighbor graph is disconnected (" +
                      std::to_string(sizes.size()) + " components, sizes";
    for (std::size_t i = 0; i < sizes.size() && i < 8; ++i)
      msg += " " + std::to_string(sizes[i]);
    if (sizes.size() > 8) msg += " ...";
    msg += "); increase k";
    throw ValidationError(msg);
  }
}

}  // namespace

Matrix geodesic_distances(const NeighborGraph& g) {
  check_connected(g);
  const int n = g.n;
  const double inf = std::numeric_limits<double>::infinity();
  Matrix D(n, n);
  parallel_for_chunked(n, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> dist(n);
    using Item = std::pair<double, int>;
    for (std::int64_t s = lo; s < hi; ++s) {
      std::fill(dist.begin(), dist.end(), inf);
      dist[s] = 0.0;
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
      pq.emplace(0.0, static_cast<int>(s));
      while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (du > dist[u]) continue;
        for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
          double nd = du + g.weights[e];
          int v = g.targets[e];
          if (nd < dist[v]) {
            dist[v] = nd;
            pq.emplace(nd, v);
          }
        }
      }
      for (int j = 0; j < n; ++j) D(s, j) = dist[j];
    }
  });
  // Per-source rounding can differ across directions; enforce exact symmetry.
  for (int i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double v = std::min(D(i, j), D(j, i));
      D(i, j) = v;
      D(j, i) = v;
    }
  }
  return D;
}

namespace {

constexpr int kFullEigenLimit = 1024;

void fix_column_sign(Matrix& M, int col) {
  double scale = M.col(col).cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    double v = M(i, col);
    if (std::abs(v) > 1e-12 * scale) {
      if (v < 0.0) M.col(col) = -M.col(col);
      return;
    }
  }
}

/// Deterministic blocked subspace iteration for the top eigenpairs of a
/// symmetric matrix. Rayleigh-Ritz inside the block keeps clustered
/// eigenvalues stable.
void top_eigenpairs(const Matrix& M, int want, Matrix& vectors, Vector& values) {
  const int n = static_cast<int>(M.rows());
  const int p = std::min(n, want + 6);
  Rng rng(0x5EEDF00Dull ^ static_cast<std::uint64_t>(n));
  Matrix V(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) V(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr0(V);
  V = qr0.householderQ() * Matrix::Identity(n, p);

  Vector ritz = Vector::Zero(p);
  Matrix MV;
  for (int it = 0; it < 500; ++it) {
    MV = M * V;
    Matrix H = V.transpose() * MV;
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    // Ascending from Eigen; reorder descending.
    Matrix U(p, p);
    for (int j = 0; j < p; ++j) U.col(j) = es.eigenvectors().col(p - 1 - j);
    for (int j = 0; j < p; ++j) ritz[j] = es.eigenvalues()[p - 1 - j];
    Matrix Vr = V * U;
    Matrix MVr = MV * U;
    double scale = std::max(std::abs(ritz[0]), 1e-300);
    double worst = 0.0;
    for (int j = 0; j < want; ++j)
      worst = std::max(worst, (MVr.col(j) - ritz[j] * Vr.col(j)).norm());
    if (worst <= 1e-10 * scale) {
      V = Vr;
      break;
    }
    Eigen::HouseholderQR<Matrix> qr(MVr);
    V = qr.householderQ() * Matrix::Identity(n, p);
    if (it == 499) V = Vr;
  }
  vectors = V.leftCols(want);
  values = ritz.head(want);
}

}  // namespace

MdsResult classical_mds(Matrix dist, int d) {
  const int n = static_cast<int>(dist.rows());
  if (dist.cols() != n) throw ValidationError("classical_mds: matrix must be square");
  if (d < 1 || d > n) throw ValidationError("classical_mds: d out of range");
  if (!dist.allFinite()) throw ValidationError("classical_mds: non-finite distance");

  // Double-center the squared distances in place: B = -1/2 * J D^2 J.
  dist = dist.array().square().matrix();
  Vector row_mean = dist.rowwise().mean();
  double grand = row_mean.mean();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      dist(i, j) = -0.5 * (dist(i, j) - row_mean[i] - row_mean[j] + grand);

  Matrix vectors;
  Vector values;
  if (n <= kFullEigenLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(dist);
    vectors = Matrix(n, d);
    values = Vector(d);
    for (int j = 0; j < d; ++j) {
      vectors.col(j) = es.eigenvectors().col(n - 1 - j);
      values[j] = es.eigenvalues()[n - 1 - j];
    }
  } else {
    top_eigenpairs(dist, d, vectors, values);
  }

  MdsResult out;
  out.coords = Matrix::Zero(n, d);
  out.eigenvalues = values;
  double pos_tol = 1e-12 * std::max(std::abs(values[0]), 1.0);
  for (int j = 0; j < d; ++j) {
    if (values[j] <= pos_tol) {
      ++out.clamped;
      continue;  // clamped to zero: column stays zero
    }
    out.coords.col(j) = vectors.col(j) * std::sqrt(values[j]);
    fix_column_sign(out.coords, j);
  }
  if (out.clamped > 0)
    std::fprintf(stderr,
                 "warning: classical_mds: requested d=%d exceeds the positive spectrum; "
                 "%d column(s) clamped to zero\n",
                 d, out.clamped);
  return out;
}

Matrix isomap(const Matrix& X, int d, int k) {
  if (k == 0) k = default_knn(static_cast<int>(X.rows()), d);
  NeighborGraph g = knn_graph(X, k);
  Matrix D = geodesic_distances(g);
  return classical_mds(std::move(D), d).coords;
}

}  // namespace pme
