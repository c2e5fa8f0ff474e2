#include "kfe/descriptor.hpp"

#include "kfe/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace kfe {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kUnitTol = 1e-9;
}  // namespace

RangeImage project_range_image(const PointCloud& cloud, int rows, int cols, double max_range,
                               double vfov_low_deg, double vfov_high_deg) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("project_range_image: grid must be at least 1x1");
  }
  RangeImage img;
  img.rows = rows;
  img.cols = cols;
  img.ranges.assign(static_cast<std::size_t>(rows) * cols, 0.0);

  const double lo = vfov_low_deg * kPi / 180.0;
  const double hi = vfov_high_deg * kPi / 180.0;
  for (const Vec3& p : cloud.points) {
    double range = p.norm();
    if (range <= 0.0 || range > max_range) continue;
    double elev = std::asin(p.z() / range);
    if (elev < lo || elev > hi) continue;
    double az = std::atan2(p.y(), p.x());
    int c = static_cast<int>((az + kPi) / (2.0 * kPi) * cols);
    int r = static_cast<int>((elev - lo) / (hi - lo) * rows);
    c = std::clamp(c, 0, cols - 1);
    r = std::clamp(r, 0, rows - 1);
    double& cell = img.at(r, c);
    if (cell == 0.0 || range < cell) cell = range;
  }
  return img;
}

namespace {

Descriptor range_histogram_descriptor(const PointCloud& cloud, const RangeHistogramBackend& b) {
  if (cloud.empty()) {
    throw std::invalid_argument("compute_descriptor: range-histogram backend needs a non-empty cloud");
  }
  RangeImage img = project_range_image(cloud, b.rows, b.cols, b.max_range, b.vfov_low_deg,
                                       b.vfov_high_deg);

  // Per-column statistics: mean range, occupancy fraction, range spread,
  // all scaled to comparable magnitudes.
  const int hist_bins = std::max(1, b.dim - 3 * b.cols);
  Eigen::VectorXd feat = Eigen::VectorXd::Zero(3 * b.cols + hist_bins);
  std::size_t occupied_total = 0;
  for (int c = 0; c < b.cols; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    for (int r = 0; r < b.rows; ++r) {
      double v = img.at(r, c);
      if (v == 0.0) continue;
      sum += v;
      sum_sq += v * v;
      ++n;
    }
    if (n > 0) {
      double mean = sum / n;
      double var = std::max(0.0, sum_sq / n - mean * mean);
      feat[3 * c + 0] = mean / b.max_range;
      feat[3 * c + 1] = static_cast<double>(n) / b.rows;
      feat[3 * c + 2] = std::sqrt(var) / b.max_range;
    }
    occupied_total += static_cast<std::size_t>(n);
  }
  for (int r = 0; r < b.rows; ++r) {
    for (int c = 0; c < b.cols; ++c) {
      double v = img.at(r, c);
      if (v == 0.0) continue;
      int bin = std::min(hist_bins - 1, static_cast<int>(v / b.max_range * hist_bins));
      feat[3 * b.cols + bin] += 1.0;
    }
  }
  if (occupied_total > 0) {
    feat.tail(hist_bins) /= static_cast<double>(occupied_total);
  }

  Descriptor d = Eigen::VectorXd::Zero(b.dim);
  int n_copy = std::min<int>(b.dim, static_cast<int>(feat.size()));
  d.head(n_copy) = feat.head(n_copy);
  double norm = d.norm();
  if (norm == 0.0) {
    d[0] = 1.0;  // no returns within range: deterministic fallback direction
    return d;
  }
  return d / norm;
}

}  // namespace

Descriptor oracle_descriptor(const OracleBackend& backend, const Eigen::VectorXd& tag) {
  if (tag.size() == 0 || tag.size() > backend.dim) {
    throw std::invalid_argument("oracle_descriptor: tag dimension out of range");
  }
  double tn = tag.norm();
  if (tn == 0.0) throw std::invalid_argument("oracle_descriptor: tag must be nonzero");

  // Fixed orthonormal basis from the seed; isometric on unit tags.
  const int d = static_cast<int>(tag.size());
  rng::Generator gen(rng::derive(backend.seed, static_cast<std::uint64_t>(d)));
  Eigen::MatrixXd g(backend.dim, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < backend.dim; ++i) g(i, j) = gen.next_normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(backend.dim, d);
  Eigen::MatrixXd r = qr.matrixQR().topRows(d);
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }

  Descriptor out = q * (tag / tn);
  return out / out.norm();
}

Descriptor compute_descriptor(const PointCloud& cloud, const DescriptorBackend& backend,
                              const std::optional<Eigen::VectorXd>& tag) {
  if (const auto* rh = std::get_if<RangeHistogramBackend>(&backend)) {
    return range_histogram_descriptor(cloud, *rh);
  }
  const auto& ob = std::get<OracleBackend>(backend);
  if (!tag.has_value()) {
    throw std::invalid_argument("compute_descriptor: oracle backend requires a tag");
  }
  return oracle_descriptor(ob, *tag);
}

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("descriptor_distance: dimension mismatch");
  }
  if (std::abs(a.norm() - 1.0) > kUnitTol || std::abs(b.norm() - 1.0) > kUnitTol) {
    throw std::invalid_argument("descriptor_distance: inputs must be unit length");
  }
  return (a - b).norm();
}

}  // namespace kfe
