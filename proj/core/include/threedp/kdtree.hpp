#pragma once

#include <vector>

#include "threedp/shapes.hpp"

namespace threedp {

/// Static 3D k-d tree over a point set; supports radius counting and nearest
/// neighbor queries. Build is median-split, queries are exact.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(const std::vector<Vec3>& points);

  bool empty() const { return pts_.empty(); }
  std::size_t size() const { return pts_.size(); }

  /// Number of stored points within distance r of q (inclusive).
  std::size_t radius_count(const Vec3& q, double r) const;

  /// Index (into the original point vector) of the nearest stored point.
  /// Returns -1 when the tree is empty.
  int nearest(const Vec3& q, double* dist_out = nullptr) const;

 private:
  struct Node {
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end, int depth);
  void radius_count_rec(int node, const Vec3& q, double r2, std::size_t& count) const;
  void nearest_rec(int node, const Vec3& q, int& best, double& best_d2) const;

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace threedp
