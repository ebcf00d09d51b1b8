#pragma once

#include <span>
#include <vector>

#include "isg/types.hpp"

namespace isg {

/// Static 3D kd-tree over a borrowed point array. Query results are sorted by
/// (distance, index) so ties resolve deterministically.
class KdTree3 {
 public:
  struct Neighbor {
    std::size_t index;
    double sq_dist;
  };

  explicit KdTree3(std::span<const Vec3> points);

  /// k nearest points to `query` (including an identical stored point).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  /// Single nearest neighbour. Requires a non-empty tree.
  Neighbor nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis;                // -1 for leaf
    double split;
    int left, right;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;

  std::span<const Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace isg
