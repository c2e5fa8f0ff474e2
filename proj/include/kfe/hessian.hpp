#pragma once

#include "kfe/geometry.hpp"
#include "kfe/kdtree.hpp"
#include "kfe/sym_eigen.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kfe {

/// Point-to-plane pairing between a scan point and its nearest target point.
struct Correspondence {
  std::uint32_t scan_index = 0;
  std::uint32_t target_index = 0;
  Vec3 normal{0.0, 0.0, 1.0};  // target surface normal, unit
  double weight = 1.0;
};

/// Clamp for the plane-to-plane weight 1 / (n^T (Ca + Cb) n).
inline constexpr double kMaxPlaneWeight = 1e3;

struct DegeneracyParams {
  double m = 60.0;     // scale parameter, meters
  double z = 1.0;      // count parameter
  double beta = 10.0;  // trigger threshold
};

/// Nearest target point within max_dist for every (unmasked) scan point.
/// The target must carry normals; weights use the plane-to-plane model when
/// both sides carry covariances, otherwise 1.
std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 const KdTree3& target_tree, double max_dist,
                                                 const std::vector<char>* scan_mask = nullptr);

/// Convenience overload that builds the tree.
std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 double max_dist);

/// Gauss-Newton translational block: sum of weighted normal outer products.
Mat3 translational_hessian(std::span<const Correspondence> correspondences);

/// d = m^2 / (lambda_min * sqrt(z)); +infinity when lambda_min <= 0.
double degeneracy(const Mat3& hessian, const DegeneracyParams& params);
double degeneracy_from_lambda_min(double lambda_min, const DegeneracyParams& params);

/// Deterministic uniform subset of ceil(fraction * n) points, original order.
PointCloud subsample_scan(const PointCloud& scan, double fraction, std::uint64_t seed);

}  // namespace kfe
