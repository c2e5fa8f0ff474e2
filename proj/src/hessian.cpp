#include "kfe/hessian.hpp"

#include "kfe/parallel.hpp"
#include "kfe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kfe {

std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 const KdTree3& target_tree, double max_dist,
                                                 const std::vector<char>* scan_mask) {
  if (!(max_dist > 0.0)) {
    throw std::invalid_argument("find_correspondences: max_dist must be positive");
  }
  if (!target.has_normals() && !target.empty()) {
    throw std::invalid_argument("find_correspondences: target lacks normals");
  }
  if (scan_mask && scan_mask->size() != scan.size()) {
    throw std::invalid_argument("find_correspondences: mask size mismatch");
  }

  const bool weighted = scan.has_covariances() && target.has_covariances();
  const std::int64_t n = static_cast<std::int64_t>(scan.size());

  // Parallel map into fixed slots, then a serial compact keeps the output
  // independent of the thread count.
  std::vector<Correspondence> slots(scan.size());
  std::vector<char> hit(scan.size(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    if (scan_mask && !(*scan_mask)[i]) continue;
    auto nb = target_tree.nearest(scan.points[i], max_dist);
    if (!nb) continue;
    Correspondence c;
    c.scan_index = static_cast<std::uint32_t>(i);
    c.target_index = static_cast<std::uint32_t>(nb->index);
    c.normal = target.normals[nb->index];
    if (weighted) {
      const Mat3 sum = scan.covariances[i] + target.covariances[nb->index];
      double denom = c.normal.dot(sum * c.normal);
      c.weight = denom > 0.0 ? std::min(1.0 / denom, kMaxPlaneWeight) : kMaxPlaneWeight;
    } else {
      c.weight = 1.0;
    }
    slots[i] = c;
    hit[i] = 1;
  }

  std::vector<Correspondence> out;
  out.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (hit[i]) out.push_back(slots[i]);
  }
  return out;
}

std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 double max_dist) {
  KdTree3 tree(target.points);
  return find_correspondences(scan, target, tree, max_dist);
}

Mat3 translational_hessian(std::span<const Correspondence> correspondences) {
  Mat3 h = Mat3::Zero();
  for (const Correspondence& c : correspondences) {
    h += c.weight * (c.normal * c.normal.transpose());
  }
  return h;
}

double degeneracy_from_lambda_min(double lambda_min, const DegeneracyParams& params) {
  if (!(params.m > 0.0) || !(params.z > 0.0)) {
    throw std::invalid_argument("degeneracy: m and z must be positive");
  }
  if (lambda_min <= 0.0) return std::numeric_limits<double>::infinity();
  return params.m * params.m / (lambda_min * std::sqrt(params.z));
}

double degeneracy(const Mat3& hessian, const DegeneracyParams& params) {
  return degeneracy_from_lambda_min(eigenvalues3(hessian)[2], params);
}

PointCloud subsample_scan(const PointCloud& scan, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("subsample_scan: fraction must be in (0, 1]");
  }
  const std::size_t n = scan.size();
  const std::size_t m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (m >= n) return scan;

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  rng::Generator gen(seed);
  for (std::size_t i = 0; i < m; ++i) {  // partial Fisher-Yates
    std::size_t j = i + static_cast<std::size_t>(gen.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());  // keep original point order

  PointCloud out;
  out.points.reserve(m);
  for (std::uint32_t i : idx) {
    out.points.push_back(scan.points[i]);
    if (scan.has_normals()) out.normals.push_back(scan.normals[i]);
    if (scan.has_covariances()) out.covariances.push_back(scan.covariances[i]);
  }
  return out;
}

}  // namespace kfe
