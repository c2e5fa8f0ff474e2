#include "kfe/geometry.hpp"

#include "kfe/kdtree.hpp"
#include "kfe/parallel.hpp"
#include "kfe/sym_eigen.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace kfe {

VoxelKey voxel_key(const Vec3& p, double resolution) {
  return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() / resolution)),
                  static_cast<std::int64_t>(std::floor(p.y() / resolution)),
                  static_cast<std::int64_t>(std::floor(p.z() / resolution))};
}

PointCloud voxel_downsample(const PointCloud& cloud, double resolution) {
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("voxel_downsample: resolution must be positive");
  }
  struct Cell {
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells;
  cells.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Cell& c = cells.try_emplace(voxel_key(cloud.points[i], resolution)).first->second;
    if (c.count == 0) c.first = i;
    c.sum += cloud.points[i];
    ++c.count;
  }
  // Emit in order of first appearance so output is independent of hashing.
  std::vector<const Cell*> ordered;
  ordered.reserve(cells.size());
  for (const auto& [key, cell] : cells) ordered.push_back(&cell);
  std::sort(ordered.begin(), ordered.end(),
            [](const Cell* a, const Cell* b) { return a->first < b->first; });

  PointCloud out;
  out.points.reserve(ordered.size());
  for (const Cell* c : ordered) out.points.push_back(c->sum / static_cast<double>(c->count));
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  if (std::abs(pose.q.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("transform_cloud: quaternion must be unit length");
  }
  Mat3 r = pose.q.toRotationMatrix();
  PointCloud out;
  out.points.resize(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    out.points[i] = r * cloud.points[i] + pose.t;
  }
  if (cloud.has_normals()) {
    out.normals.resize(cloud.normals.size());
    for (std::size_t i = 0; i < cloud.normals.size(); ++i) out.normals[i] = r * cloud.normals[i];
  }
  if (cloud.has_covariances()) {
    out.covariances.resize(cloud.covariances.size());
    for (std::size_t i = 0; i < cloud.covariances.size(); ++i) {
      out.covariances[i] = r * cloud.covariances[i] * r.transpose();
    }
  }
  return out;
}

PointCloud point_set_subtract(const PointCloud& a, const PointCloud& b, double radius) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("point_set_subtract: radius must be positive");
  }
  if (b.empty()) return a;

  KdTree3 tree(b.points);
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  std::vector<char> keep(a.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    keep[i] = tree.has_neighbor(a.points[i], radius) ? 0 : 1;
  }

  PointCloud out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!keep[i]) continue;
    out.points.push_back(a.points[i]);
    if (a.has_normals()) out.normals.push_back(a.normals[i]);
    if (a.has_covariances()) out.covariances.push_back(a.covariances[i]);
  }
  return out;
}

double jaccard_index(const PointCloud& a, const PointCloud& b, double resolution) {
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("jaccard_index: resolution must be positive");
  }
  if (a.empty() && b.empty()) {
    throw std::invalid_argument("jaccard_index: both clouds empty (0/0 undefined)");
  }
  std::unordered_set<VoxelKey, VoxelKeyHash> va, vb;
  va.reserve(a.size());
  vb.reserve(b.size());
  for (const Vec3& p : a.points) va.insert(voxel_key(p, resolution));
  for (const Vec3& p : b.points) vb.insert(voxel_key(p, resolution));
  std::size_t inter = 0;
  for (const VoxelKey& k : vb) inter += va.count(k);
  std::size_t uni = va.size() + vb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PointCloud estimate_normals_covariances(const PointCloud& cloud, int k) {
  if (k < 3) throw std::invalid_argument("estimate_normals_covariances: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("estimate_normals_covariances: cloud smaller than k");
  }
  KdTree3 tree(cloud.points);
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());
  out.covariances.resize(cloud.size());

  const std::int64_t n = static_cast<std::int64_t>(cloud.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<Neighbor> nb = tree.knn(cloud.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const Neighbor& m : nb) mean += cloud.points[m.index];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (const Neighbor& m : nb) {
      Vec3 d = cloud.points[m.index] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nb.size());

    SymEigen3 eig = eigen3(cov);
    Vec3 normal = eig.vectors.col(2);  // least-spread direction
    // Deterministic sign: dominant component positive.
    int dom = 0;
    if (std::abs(normal[1]) > std::abs(normal[dom])) dom = 1;
    if (std::abs(normal[2]) > std::abs(normal[dom])) dom = 2;
    if (normal[dom] < 0.0) normal = -normal;
    out.normals[i] = normal;

    // Plane-to-plane regularization: (1, 1, eps) in the eigenbasis.
    const Vec3 v0 = eig.vectors.col(0), v1 = eig.vectors.col(1), v2 = eig.vectors.col(2);
    out.covariances[i] =
        v0 * v0.transpose() + v1 * v1.transpose() + kEpsPlane * (v2 * v2.transpose());
  }
  return out;
}

}  // namespace kfe
