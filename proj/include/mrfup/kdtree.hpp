#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace mrfup {

/// Static kd-tree over points in Dim dimensions. Indices returned refer to
/// the order of the input points. Ties in nearest-neighbor distance resolve
/// to the lowest index, which keeps queries deterministic.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;
  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points_.size());
    if (!points_.empty()) root_ = build(0, points_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  /// Index of the nearest point; size() when empty.
  std::size_t nearest(const Point& q) const {
    std::size_t best = points_.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search_nearest(root_, q, best, best_d2);
    return best;
  }

  /// Indices of all points with squared distance <= radius^2, ascending.
  std::vector<std::size_t> within_radius(const Point& q, double radius) const {
    std::vector<std::size_t> out;
    if (root_ >= 0) search_radius(root_, q, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth) {
    if (begin >= end) return -1;
    // Split on the axis of largest extent.
    Point lo = points_[order_[begin]];
    Point hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points_[a][axis];
                       const double pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis});
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid + 1, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search_nearest(int id, const Point& q, std::size_t& best, double& best_d2) const {
    const Node& n = nodes_[id];
    const double d2 = (points_[n.point] - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
      best_d2 = d2;
      best = n.point;
    }
    const double diff = q[n.axis] - points_[n.point][n.axis];
    const int near = diff <= 0.0 ? n.left : n.right;
    const int far = diff <= 0.0 ? n.right : n.left;
    if (near >= 0) search_nearest(near, q, best, best_d2);
    // Equality keeps equidistant candidates reachable for the index tie-break.
    if (far >= 0 && diff * diff <= best_d2) search_nearest(far, q, best, best_d2);
  }

  void search_radius(int id, const Point& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if ((points_[n.point] - q).squaredNorm() <= r2) out.push_back(n.point);
    const double diff = q[n.axis] - points_[n.point][n.axis];
    if (n.left >= 0 && (diff <= 0.0 || diff * diff <= r2)) search_radius(n.left, q, r2, out);
    if (n.right >= 0 && (diff >= 0.0 || diff * diff <= r2)) search_radius(n.right, q, r2, out);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace mrfup
