#pragma once

#include "kfe/descriptor.hpp"
#include "kfe/geometry.hpp"
#include "kfe/hessian.hpp"
#include "kfe/kdtree.hpp"
#include "kfe/synthworld.hpp"

#include <optional>
#include <span>
#include <vector>

// Plain single-threaded reference implementations, independent of the kd-tree
// and the OpenMP kernels. Tests check the production kernels against these;
// the benchmark target compares their runtimes.
namespace kfe::serial {

std::optional<Neighbor> nearest_neighbor(const std::vector<Vec3>& points, const Vec3& query,
                                         double max_dist);

std::vector<Neighbor> knn(const std::vector<Vec3>& points, const Vec3& query, int k);

std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 double max_dist);

PointCloud point_set_subtract(const PointCloud& a, const PointCloud& b, double radius);

PointCloud estimate_normals_covariances(const PointCloud& cloud, int k);

PointCloud raycast_scan(const World& world, const Pose& pose, const BeamPattern& pattern,
                        std::uint64_t seed);

/// Direct double-loop evaluation of the summarization marginal, no cached
/// per-scan minima.
double summary_marginal(std::span<const Descriptor> scans, std::span<const int> ids, int e);

}  // namespace kfe::serial
