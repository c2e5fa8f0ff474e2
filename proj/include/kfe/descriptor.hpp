#pragma once

#include "kfe/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace kfe {

/// Unit vector on the p-dimensional hypersphere summarizing a scan.
using Descriptor = Eigen::VectorXd;

inline constexpr int kDefaultDescriptorDim = 256;

/// Spherical range image; ranges in meters, 0 = no return.
struct RangeImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> ranges;  // row-major

  double& at(int r, int c) { return ranges[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return ranges[static_cast<std::size_t>(r) * cols + c]; }
};

/// Hand-crafted stand-in for a learned scan encoder: range-image column
/// statistics plus a global range histogram, L2-normalized.
struct RangeHistogramBackend {
  int rows = 16;
  int cols = 64;
  double max_range = 60.0;
  double vfov_low_deg = -22.5;
  double vfov_high_deg = 22.5;
  int dim = kDefaultDescriptorDim;
};

/// Test-controlled backend: embeds a caller-supplied tag isometrically into
/// the descriptor sphere through a fixed seeded orthonormal basis, so
/// descriptor distances reproduce tag distances exactly.
struct OracleBackend {
  std::uint64_t seed = 0;
  int dim = kDefaultDescriptorDim;
};

using DescriptorBackend = std::variant<RangeHistogramBackend, OracleBackend>;

/// Spherical projection: azimuth bins over [-pi, pi), elevation bins over the
/// configured vertical field of view; each cell keeps the nearest range.
RangeImage project_range_image(const PointCloud& cloud, int rows, int cols, double max_range,
                               double vfov_low_deg = -22.5, double vfov_high_deg = 22.5);

/// Maps a cloud (sensor frame) to a unit descriptor. The oracle backend
/// ignores the cloud and requires `tag`; the range-histogram backend ignores
/// `tag` and requires a non-empty cloud.
Descriptor compute_descriptor(const PointCloud& cloud, const DescriptorBackend& backend,
                              const std::optional<Eigen::VectorXd>& tag = std::nullopt);

Descriptor oracle_descriptor(const OracleBackend& backend, const Eigen::VectorXd& tag);

/// Euclidean distance between unit descriptors; throws if either input is
/// not unit length.
double descriptor_distance(const Descriptor& a, const Descriptor& b);

}  // namespace kfe
