#pragma once

#include <vector>

#include "pme/types.hpp"

namespace pme {

/// Static kd-tree over row points. Neighbor queries order by (distance,
/// index), so exact distance ties resolve to the smaller index and results
/// are deterministic.
class KdTree {
 public:
  explicit KdTree(Matrix points);

  /// k nearest rows to q (k capped at the point count). Outputs are sorted
  /// ascending by (distance, index).
  void knn(const Eigen::Ref<const Vector>& q, int k, std::vector<int>& index,
           std::vector<double>& dist2) const;

  int size() const { return static_cast<int>(points_.rows()); }

 private:
  struct Node {
    int lo, hi;      // leaf range into order_
    int axis = -1;   // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(int lo, int hi);
  void search(int node, const Eigen::Ref<const Vector>& q, int k,
              std::vector<std::pair<double, int>>& heap) const;

  Matrix points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace pme
