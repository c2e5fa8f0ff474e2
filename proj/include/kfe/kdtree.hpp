#pragma once

#include "kfe/geometry.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace kfe {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Static median-split kd-tree over 3-D points. Built once, read-only after;
/// safe for concurrent queries. Equal distances resolve to the lowest point
/// index so queries are deterministic.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(const std::vector<Vec3>& points) { build(points); }

  void build(const std::vector<Vec3>& points);

  std::size_t size() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }

  /// Closest point within max_dist, or nullopt.
  std::optional<Neighbor> nearest(const Vec3& query, double max_dist) const;

  /// k closest points, sorted by (distance, index). Fewer if the cloud is small.
  std::vector<Neighbor> knn(const Vec3& query, int k) const;

  /// True if any point lies within radius of the query.
  bool has_neighbor(const Vec3& query, double radius) const;

 private:
  struct Node {
    int left = -1;
    int right = -1;
    std::uint32_t begin = 0;  // leaf payload range into order_
    std::uint32_t end = 0;
    float split = 0.0f;
    std::int8_t axis = -1;  // -1 marks a leaf
  };

  int build_range(std::uint32_t begin, std::uint32_t end);

  template <typename Visit>
  bool search(int node, const Vec3& query, double& worst, Visit&& visit) const;

  std::vector<Vec3> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Spec-level nearest-neighbor query against a prebuilt index.
inline std::optional<Neighbor> nearest_neighbor(const KdTree3& index, const Vec3& query,
                                                double max_dist) {
  return index.nearest(query, max_dist);
}

}  // namespace kfe
