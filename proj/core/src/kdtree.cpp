#include "pme/kdtree.hpp"

#include <algorithm>
#include <cmath>

#include "pme/errors.hpp"

namespace pme {
namespace {

constexpr int kLeafSize = 16;

// Max-heap order on (dist2, index): the worst candidate sits on top.
bool heap_less(const std::pair<double, int>& a, const std::pair<double, int>& b) {
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

}  // namespace

KdTree::KdTree(Matrix points) : points_(std::move(points)) {
  int n = static_cast<int>(points_.rows());
  if (n == 0) throw ValidationError("KdTree: empty point set");
  if (!points_.allFinite()) throw ValidationError("KdTree: non-finite point");
  order_.resize(n);
  for (int i = 0; i < n; ++i) order_[i] = i;
  nodes_.reserve(2 * n / kLeafSize + 4);
  build(0, n);
}

int KdTree::build(int lo, int hi) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back({lo, hi, -1, 0.0, -1, -1});
  if (hi - lo <= kLeafSize) return id;

  // Split the widest axis at the median; (value, index) comparisons keep the
  // partition deterministic under duplicate coordinates.
  int d = static_cast<int>(points_.cols());
  int axis = 0;
  double best_spread = -1.0;
  for (int a = 0; a < d; ++a) {
    double mn = points_(order_[lo], a), mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      double v = points_(order_[i], a);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mx - mn > best_spread) {
      best_spread = mx - mn;
      axis = a;
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide: keep as leaf

  int mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                   [&](int a, int b) {
                     double va = points_(a, axis), vb = points_(b, axis);
                     if (va != vb) return va < vb;
                     return a < b;
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_(order_[mid], axis);
  int left = build(lo, mid);
  int right = build(mid, hi);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const Eigen::Ref<const Vector>& q, int k,
                    std::vector<std::pair<double, int>>& heap) const {
  const Node& nd = nodes_[node];
  if (nd.axis < 0) {
    for (int i = nd.lo; i < nd.hi; ++i) {
      int idx = order_[i];
      double d2 = (points_.row(idx).transpose() - q).squaredNorm();
      std::pair<double, int> cand{d2, idx};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), heap_less);
      } else if (heap_less(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
    return;
  }
  double diff = q[nd.axis] - nd.split;
  int near = diff < 0.0 ? nd.left : nd.right;
  int far = diff < 0.0 ? nd.right : nd.left;
  search(near, q, k, heap);
  // Visit the far side unless it provably cannot beat the current worst.
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().first)
    search(far, q, k, heap);
}

void KdTree::knn(const Eigen::Ref<const Vector>& q, int k, std::vector<int>& index,
                 std::vector<double>& dist2) const {
  if (q.size() != points_.cols()) throw ValidationError("KdTree::knn: dimension mismatch");
  if (k < 1) throw ValidationError("KdTree::knn: k must be positive");
  k = std::min(k, size());
  std::vector<std::pair<double, int>> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  search(0, q, k, heap);
  std::sort(heap.begin(), heap.end(), heap_less);
  index.resize(heap.size());
  dist2.resize(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) {
    dist2[i] = heap[i].first;
    index[i] = heap[i].second;
  }
}

}  // namespace pme
