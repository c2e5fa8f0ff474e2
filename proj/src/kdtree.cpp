#include "kfe/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kfe {

namespace {
constexpr std::uint32_t kLeafSize = 12;
}

void KdTree3::build(const std::vector<Vec3>& points) {
  pts_ = points;
  nodes_.clear();
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  root_ = pts_.empty() ? -1 : build_range(0, static_cast<std::uint32_t>(pts_.size()));
}

int KdTree3::build_range(std::uint32_t begin, std::uint32_t end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }

  Vec3 lo = pts_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(pts_[order_[i]]);
    hi = hi.cwiseMax(pts_[order_[i]]);
  }
  Vec3 extent = hi - lo;
  int axis = 0;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;

  std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     double ca = pts_[a][axis], cb = pts_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  node.axis = static_cast<std::int8_t>(axis);
  node.split = pts_[order_[mid]][axis];
  nodes_.push_back(node);
  int self = static_cast<int>(nodes_.size() - 1);
  int left = build_range(begin, mid);
  int right = build_range(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

// Visit returns false to abort the whole search.
template <typename Visit>
bool KdTree3::search(int node_id, const Vec3& query, double& worst_sq, Visit&& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      std::uint32_t idx = order_[i];
      double d2 = (pts_[idx] - query).squaredNorm();
      if (!visit(idx, d2, worst_sq)) return false;
    }
    return true;
  }
  double delta = query[node.axis] - node.split;
  int near = delta <= 0.0 ? node.left : node.right;
  int far = delta <= 0.0 ? node.right : node.left;
  if (!search(near, query, worst_sq, visit)) return false;
  // Equal plane distance can still hide an index tie on the far side.
  if (delta * delta <= worst_sq) {
    if (!search(far, query, worst_sq, visit)) return false;
  }
  return true;
}

std::optional<Neighbor> KdTree3::nearest(const Vec3& query, double max_dist) const {
  if (root_ < 0 || max_dist <= 0.0) return std::nullopt;
  double worst_sq = max_dist * max_dist;
  std::uint32_t best_idx = std::numeric_limits<std::uint32_t>::max();
  double best_sq = std::numeric_limits<double>::infinity();
  bool found = false;
  search(root_, query, worst_sq, [&](std::uint32_t idx, double d2, double& worst) {
    if (d2 <= worst_sq && (!found || d2 < best_sq || (d2 == best_sq && idx < best_idx))) {
      found = true;
      best_sq = d2;
      best_idx = idx;
      worst = d2;  // shrink the search radius
    }
    return true;
  });
  if (!found || best_sq > max_dist * max_dist) return std::nullopt;
  return Neighbor{best_idx, std::sqrt(best_sq)};
}

std::vector<Neighbor> KdTree3::knn(const Vec3& query, int k) const {
  std::vector<Neighbor> result;
  if (root_ < 0 || k <= 0) return result;

  using Entry = std::pair<double, std::uint32_t>;  // (squared distance, index)
  std::vector<Entry> heap;                          // max-heap on (d2, index)
  heap.reserve(static_cast<std::size_t>(k));
  double worst_sq = std::numeric_limits<double>::infinity();

  search(root_, query, worst_sq, [&](std::uint32_t idx, double d2, double& worst) {
    Entry e{d2, idx};
    if (heap.size() < static_cast<std::size_t>(k)) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end());
      if (heap.size() == static_cast<std::size_t>(k)) worst = heap.front().first;
    } else if (e < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end());
      worst = heap.front().first;
    }
    return true;
  });

  std::sort(heap.begin(), heap.end());
  result.reserve(heap.size());
  for (const Entry& e : heap) result.push_back(Neighbor{e.second, std::sqrt(e.first)});
  return result;
}

bool KdTree3::has_neighbor(const Vec3& query, double radius) const {
  if (root_ < 0 || radius <= 0.0) return false;
  double worst_sq = radius * radius;
  bool found = false;
  search(root_, query, worst_sq, [&](std::uint32_t, double d2, double&) {
    if (d2 <= radius * radius) {
      found = true;
      return false;  // stop at the first hit
    }
    return true;
  });
  return found;
}

}  // namespace kfe
