#include "threedp/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace threedp {

namespace {
constexpr int kLeafSize = 16;
}

KdTree3::KdTree3(const std::vector<Vec3>& points) : pts_(points) {
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!pts_.empty()) {
    nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
    root_ = build(0, static_cast<int>(pts_.size()), 0);
  }
}

int KdTree3::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  const int axis = depth % 3;
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
  node.axis = axis;
  node.split = pts_[order_[mid]][axis];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::size_t KdTree3::radius_count(const Vec3& q, double r) const {
  if (empty()) return 0;
  std::size_t count = 0;
  radius_count_rec(root_, q, r * r, count);
  return count;
}

void KdTree3::radius_count_rec(int ni, const Vec3& q, double r2, std::size_t& count) const {
  const Node& node = nodes_[ni];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      if ((pts_[order_[i]] - q).squaredNorm() <= r2) ++count;
    }
    return;
  }
  const double d = q[node.axis] - node.split;
  if (d <= 0.0) {
    radius_count_rec(node.left, q, r2, count);
    if (d * d <= r2) radius_count_rec(node.right, q, r2, count);
  } else {
    radius_count_rec(node.right, q, r2, count);
    if (d * d <= r2) radius_count_rec(node.left, q, r2, count);
  }
}

int KdTree3::nearest(const Vec3& q, double* dist_out) const {
  if (empty()) return -1;
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  nearest_rec(root_, q, best, best_d2);
  if (dist_out) *dist_out = std::sqrt(best_d2);
  return best;
}

void KdTree3::nearest_rec(int ni, const Vec3& q, int& best, double& best_d2) const {
  const Node& node = nodes_[ni];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const double d2 = (pts_[order_[i]] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = order_[i];
      }
    }
    return;
  }
  const double d = q[node.axis] - node.split;
  const int near = d <= 0.0 ? node.left : node.right;
  const int far = d <= 0.0 ? node.right : node.left;
  nearest_rec(near, q, best, best_d2);
  if (d * d < best_d2) nearest_rec(far, q, best, best_d2);
}

}  // namespace threedp
