#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <vector>

namespace kfe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Point cloud with optional per-point surface normals and covariances.
/// Invariants: normals (when present) are unit length; covariances (when
/// present) are symmetric PSD; both are either empty or sized like points.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<Mat3> covariances;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.size() == points.size() && !points.empty(); }
  bool has_covariances() const { return covariances.size() == points.size() && !points.empty(); }
};

/// Rigid transform: translation plus unit quaternion.
struct Pose {
  Vec3 t{0.0, 0.0, 0.0};
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};

  Pose inverse() const {
    Pose inv;
    inv.q = q.conjugate();
    inv.t = -(inv.q * t);
    return inv;
  }
  Vec3 apply(const Vec3& p) const { return q * p + t; }
};

/// Integer voxel coordinates, ix = floor(x / resolution) etc.
struct VoxelKey {
  std::int64_t ix = 0, iy = 0, iz = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(k.ix),
                            static_cast<std::uint64_t>(k.iy),
                            static_cast<std::uint64_t>(k.iz)}) {
      h ^= v;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

VoxelKey voxel_key(const Vec3& p, double resolution);

/// Plane-to-plane covariance regularizer: eigenvalues flattened to
/// (1, 1, eps_plane) with eps_plane on the surface-normal direction.
inline constexpr double kEpsPlane = 1e-3;

/// One output point per occupied voxel (the centroid of its points).
/// Output order follows the first appearance of each voxel in the input.
PointCloud voxel_downsample(const PointCloud& cloud, double resolution);

/// Rigid transform of points; normals are rotated, covariances conjugated.
/// Throws std::invalid_argument if the quaternion is not unit length.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

/// Survivors of `a` that have no neighbor in `b` within `radius`
/// (A - (A intersect B) with a tolerance-based intersection). Order kept.
PointCloud point_set_subtract(const PointCloud& a, const PointCloud& b, double radius);

/// Voxel-occupancy Jaccard index |Va ∩ Vb| / |Va ∪ Vb|.
/// Throws std::invalid_argument when both clouds are empty (0/0).
double jaccard_index(const PointCloud& a, const PointCloud& b, double resolution);

/// Per-point neighborhood fit over the k nearest neighbors: the normal is
/// the direction of least spread; the covariance is regularized to
/// eigenvalues (1, 1, eps_plane) in its eigenbasis.
PointCloud estimate_normals_covariances(const PointCloud& cloud, int k);

}  // namespace kfe
