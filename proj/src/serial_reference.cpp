#include "kfe/serial_reference.hpp"

#include "kfe/rng.hpp"
#include "kfe/sym_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kfe::serial {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

std::optional<Neighbor> nearest_neighbor(const std::vector<Vec3>& points, const Vec3& query,
                                         double max_dist) {
  std::optional<Neighbor> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = (points[i] - query).norm();
    if (d > max_dist) continue;
    if (!best || d < best->distance) best = Neighbor{i, d};
  }
  return best;
}

std::vector<Neighbor> knn(const std::vector<Vec3>& points, const Vec3& query, int k) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    all.push_back(Neighbor{i, (points[i] - query).norm()});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

std::vector<Correspondence> find_correspondences(const PointCloud& scan, const PointCloud& target,
                                                 double max_dist) {
  if (!(max_dist > 0.0)) {
    throw std::invalid_argument("find_correspondences: max_dist must be positive");
  }
  if (!target.has_normals() && !target.empty()) {
    throw std::invalid_argument("find_correspondences: target lacks normals");
  }
  const bool weighted = scan.has_covariances() && target.has_covariances();
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    auto nb = nearest_neighbor(target.points, scan.points[i], max_dist);
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
    out.push_back(c);
  }
  return out;
}

PointCloud point_set_subtract(const PointCloud& a, const PointCloud& b, double radius) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("point_set_subtract: radius must be positive");
  }
  PointCloud out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool matched = false;
    for (const Vec3& q : b.points) {
      if ((a.points[i] - q).norm() <= radius) {
        matched = true;
        break;
      }
    }
    if (matched) continue;
    out.points.push_back(a.points[i]);
    if (a.has_normals()) out.normals.push_back(a.normals[i]);
    if (a.has_covariances()) out.covariances.push_back(a.covariances[i]);
  }
  return out;
}

PointCloud estimate_normals_covariances(const PointCloud& cloud, int k) {
  if (k < 3) throw std::invalid_argument("estimate_normals_covariances: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("estimate_normals_covariances: cloud smaller than k");
  }
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());
  out.covariances.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::vector<Neighbor> nb = knn(cloud.points, cloud.points[i], k);
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
    Vec3 normal = eig.vectors.col(2);
    int dom = 0;
    if (std::abs(normal[1]) > std::abs(normal[dom])) dom = 1;
    if (std::abs(normal[2]) > std::abs(normal[dom])) dom = 2;
    if (normal[dom] < 0.0) normal = -normal;
    out.normals[i] = normal;
    const Vec3 v0 = eig.vectors.col(0), v1 = eig.vectors.col(1), v2 = eig.vectors.col(2);
    out.covariances[i] =
        v0 * v0.transpose() + v1 * v1.transpose() + kEpsPlane * (v2 * v2.transpose());
  }
  return out;
}

PointCloud raycast_scan(const World& world, const Pose& pose, const BeamPattern& pattern,
                        std::uint64_t seed) {
  const double lo = pattern.vfov_low_deg * kPi / 180.0;
  const double hi = pattern.vfov_high_deg * kPi / 180.0;
  const Mat3 rot = pose.q.toRotationMatrix();
  rng::Generator gen(seed);
  PointCloud cloud;
  for (int ring = 0; ring < pattern.rings; ++ring) {
    double elev = lo + (ring + 0.5) * (hi - lo) / pattern.rings;
    for (int step = 0; step < pattern.azimuth_steps; ++step) {
      double az = -kPi + (step + 0.5) * 2.0 * kPi / pattern.azimuth_steps;
      Vec3 dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      auto t = world.raycast(pose.t, rot * dir, pattern.max_range);
      if (!t) continue;
      double range = *t;
      if (pattern.noise_sigma > 0.0) {
        range = std::max(1e-9, range + pattern.noise_sigma * gen.next_normal());
      }
      cloud.points.push_back(dir * range);
    }
  }
  return cloud;
}

double summary_marginal(std::span<const Descriptor> scans, std::span<const int> ids, int e) {
  double sum = 0.0;
  for (std::size_t j = 0; j < scans.size(); ++j) {
    double before = 1.0;
    for (int i : ids) before = std::min(before, (scans[j] - scans[i]).norm());
    double with = std::min(before, (scans[j] - scans[e]).norm());
    sum += before - with;
  }
  return sum / static_cast<double>(scans.size());
}

}  // namespace kfe::serial
