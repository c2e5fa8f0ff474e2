#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kfe/hessian.hpp"
#include "kfe/rng.hpp"
#include "kfe/serial_reference.hpp"

#include <cmath>

using namespace kfe;

namespace {

PointCloud plane_cloud(int axis, double offset, int n, std::uint64_t seed) {
  rng::Generator gen(seed);
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    p[axis] = offset;
    p[(axis + 1) % 3] = 10.0 * gen.next_double();
    p[(axis + 2) % 3] = 10.0 * gen.next_double();
    c.points.push_back(p);
  }
  return c;
}

std::vector<Correspondence> axis_correspondences(int count_x, int count_y, int count_z,
                                                 double weight) {
  std::vector<Correspondence> corr;
  auto add = [&](const Vec3& n, int count) {
    for (int i = 0; i < count; ++i) {
      Correspondence c;
      c.normal = n;
      c.weight = weight;
      corr.push_back(c);
    }
  };
  add(Vec3::UnitX(), count_x);
  add(Vec3::UnitY(), count_y);
  add(Vec3::UnitZ(), count_z);
  return corr;
}

}  // namespace

TEST_CASE("find_correspondences basics") {
  PointCloud target = estimate_normals_covariances(plane_cloud(2, 0.0, 100, 1), 10);
  KdTree3 tree(target.points);

  auto self = find_correspondences(target, target, tree, 0.5);
  CHECK(self.size() == target.size());
  for (const auto& c : self) {
    CHECK(c.scan_index == c.target_index);
  }

  PointCloud displaced = target;
  for (Vec3& p : displaced.points) p += Vec3(0.0, 0.0, 5.0);  // 10x max_dist away
  CHECK(find_correspondences(displaced, target, tree, 0.5).empty());

  PointCloud two;
  two.points = {Vec3(0.0, 0.0, 0.0), Vec3(100.0, 0.0, 0.0)};
  PointCloud one_target;
  one_target.points = {Vec3(0.1, 0.0, 0.0)};
  one_target.normals = {Vec3::UnitZ()};
  auto corr = find_correspondences(two, one_target, 0.5);
  REQUIRE(corr.size() == 1);
  CHECK(corr[0].scan_index == 0);
  CHECK(corr[0].weight == 1.0);  // no covariances on the scan side

  PointCloud no_normals = plane_cloud(2, 0.0, 20, 2);
  CHECK_THROWS_AS(find_correspondences(two, no_normals, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(find_correspondences(two, one_target, 0.0), std::invalid_argument);
}

TEST_CASE("plane-to-plane weights") {
  PointCloud scan, target;
  scan.points = {Vec3(0.0, 0.0, 0.05)};
  Mat3 reg = Vec3(1.0, 1.0, kEpsPlane).asDiagonal();  // normal along z
  scan.normals = {Vec3::UnitZ()};
  scan.covariances = {reg};
  target.points = {Vec3(0.0, 0.0, 0.0)};
  target.normals = {Vec3::UnitZ()};
  target.covariances = {reg};

  auto corr = find_correspondences(scan, target, 0.5);
  REQUIRE(corr.size() == 1);
  CHECK(corr[0].weight == doctest::Approx(1.0 / (2.0 * kEpsPlane)).epsilon(1e-12));

  // Degenerate covariances clamp at the cap.
  target.covariances = {Mat3::Zero()};
  scan.covariances = {Mat3::Zero()};
  corr = find_correspondences(scan, target, 0.5);
  CHECK(corr[0].weight == kMaxPlaneWeight);
}

TEST_CASE("translational_hessian examples") {
  CHECK(translational_hessian({}).isZero());

  auto plane = axis_correspondences(0, 0, 100, 1.0);
  Mat3 h = translational_hessian(plane);
  CHECK(h.isApprox(Vec3(0.0, 0.0, 100.0).asDiagonal().toDenseMatrix()));
  CHECK(eigenvalues3(h)[2] == doctest::Approx(0.0));

  auto triad = axis_correspondences(10, 10, 10, 1.0);
  h = translational_hessian(triad);
  CHECK(h.isApprox(10.0 * Mat3::Identity()));
  CHECK(eigenvalues3(h)[2] == doctest::Approx(10.0));
}

TEST_CASE("Hessian PSD and additivity on random correspondence sets") {
  rng::Generator gen(55);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Correspondence> a, b;
    int na = 1 + static_cast<int>(gen.next_below(30));
    int nb = 1 + static_cast<int>(gen.next_below(30));
    auto random_corr = [&]() {
      Correspondence c;
      Vec3 n(gen.next_normal(), gen.next_normal(), gen.next_normal());
      c.normal = n.normalized();
      c.weight = 10.0 * gen.next_double();
      return c;
    };
    for (int i = 0; i < na; ++i) a.push_back(random_corr());
    for (int i = 0; i < nb; ++i) b.push_back(random_corr());

    Mat3 ha = translational_hessian(a);
    CHECK(eigenvalues3(ha)[2] >= -1e-9);

    std::vector<Correspondence> both = a;
    both.insert(both.end(), b.begin(), b.end());
    Mat3 hsum = translational_hessian(both);
    CHECK((hsum - (ha + translational_hessian(b))).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("degeneracy arithmetic") {
  DegeneracyParams p{10.0, 100.0, 10.0};
  Mat3 h = Mat3::Identity();
  CHECK(degeneracy(h, p) == doctest::Approx(10.0));

  CHECK(std::isinf(degeneracy(Mat3::Zero(), p)));
  CHECK(degeneracy(Mat3::Zero(), p) >= p.beta);

  Mat3 h20 = 20.0 * Mat3::Identity();
  CHECK(degeneracy(h20, p) == doctest::Approx(0.5));

  CHECK_THROWS_AS(degeneracy_from_lambda_min(1.0, DegeneracyParams{0.0, 1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("subsample_scan contract") {
  PointCloud cloud = plane_cloud(2, 0.0, 1000, 9);

  PointCloud full = subsample_scan(cloud, 1.0, 4);
  REQUIRE(full.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(full.points[i] == cloud.points[i]);

  PointCloud quarter = subsample_scan(cloud, 0.25, 4);
  CHECK(quarter.size() == 250);

  PointCloud again = subsample_scan(cloud, 0.25, 4);
  for (std::size_t i = 0; i < quarter.size(); ++i) CHECK(quarter.points[i] == again.points[i]);

  PointCloud other = subsample_scan(cloud, 0.25, 5);
  bool differs = other.size() != quarter.size();
  for (std::size_t i = 0; !differs && i < quarter.size(); ++i) {
    differs = quarter.points[i] != other.points[i];
  }
  CHECK(differs);

  // Selected points keep their original relative order.
  PointCloud line;
  for (int i = 0; i < 100; ++i) line.points.emplace_back(static_cast<double>(i), 0.0, 0.0);
  PointCloud sub = subsample_scan(line, 0.3, 7);
  for (std::size_t i = 1; i < sub.size(); ++i) {
    CHECK(sub.points[i - 1].x() < sub.points[i].x());
  }

  CHECK_THROWS_AS(subsample_scan(cloud, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(subsample_scan(cloud, 1.5, 1), std::invalid_argument);
}

TEST_CASE("parallel correspondences match the serial reference") {
  PointCloud target = estimate_normals_covariances(plane_cloud(0, 2.0, 150, 31), 8);
  PointCloud scan = plane_cloud(0, 2.1, 80, 32);
  scan = estimate_normals_covariances(scan, 8);

  auto fast = find_correspondences(scan, target, 0.6);
  auto ref = serial::find_correspondences(scan, target, 0.6);
  REQUIRE(fast.size() == ref.size());
  for (std::size_t i = 0; i < fast.size(); ++i) {
    CHECK(fast[i].scan_index == ref[i].scan_index);
    CHECK(fast[i].target_index == ref[i].target_index);
    CHECK(fast[i].weight == ref[i].weight);
  }
}
