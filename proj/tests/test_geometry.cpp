#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kfe/geometry.hpp"
#include "kfe/kdtree.hpp"
#include "kfe/rng.hpp"
#include "kfe/serial_reference.hpp"

#include <cmath>

using namespace kfe;

namespace {

PointCloud make_cloud(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

PointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  rng::Generator gen(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(extent * gen.next_double(), extent * gen.next_double(),
                          extent * gen.next_double());
  }
  return c;
}

}  // namespace

TEST_CASE("voxel_downsample basics") {
  CHECK(voxel_downsample(PointCloud{}, 0.5).empty());

  PointCloud one = make_cloud({{0.1, 0.1, 0.1}});
  PointCloud out = voxel_downsample(one, 1.0);
  REQUIRE(out.size() == 1);
  CHECK(out.points[0].isApprox(Vec3(0.1, 0.1, 0.1)));

  PointCloud three = make_cloud({{0.1, 0.0, 0.0}, {0.3, 0.0, 0.0}, {1.2, 0.0, 0.0}});
  out = voxel_downsample(three, 1.0);
  REQUIRE(out.size() == 2);
  CHECK(out.points[0].isApprox(Vec3(0.2, 0.0, 0.0), 1e-12));
  CHECK(out.points[1].isApprox(Vec3(1.2, 0.0, 0.0), 1e-12));

  CHECK_THROWS_AS(voxel_downsample(one, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(voxel_downsample(one, -1.0), std::invalid_argument);
}

TEST_CASE("voxel_downsample output stays near voxel centers") {
  PointCloud cloud = random_cloud(500, 10.0, 99);
  const double res = 0.7;
  PointCloud out = voxel_downsample(cloud, res);
  CHECK(out.size() <= cloud.size());
  for (const Vec3& p : out.points) {
    VoxelKey k = voxel_key(p, res);
    Vec3 center((k.ix + 0.5) * res, (k.iy + 0.5) * res, (k.iz + 0.5) * res);
    CHECK((p - center).norm() <= std::sqrt(3.0) / 2.0 * res + 1e-12);
  }
}

TEST_CASE("transform_cloud examples and inverse round trip") {
  PointCloud c = make_cloud({{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});

  Pose identity;
  PointCloud same = transform_cloud(c, identity);
  CHECK(same.points[0].isApprox(c.points[0]));

  Pose shift;
  shift.t = Vec3(1.0, 0.0, 0.0);
  CHECK(transform_cloud(c, shift).points[1].isApprox(Vec3(1.0, 0.0, 0.0)));

  Pose rot90;
  rot90.q = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()));
  Vec3 r = transform_cloud(c, rot90).points[0];
  CHECK((r - Vec3(0.0, 1.0, 0.0)).norm() < 1e-9);

  rng::Generator gen(7);
  Pose pose;
  pose.t = Vec3(gen.next_normal(), gen.next_normal(), gen.next_normal());
  pose.q = Eigen::Quaterniond(gen.next_normal(), gen.next_normal(), gen.next_normal(),
                              gen.next_normal())
               .normalized();
  PointCloud cloud = random_cloud(50, 5.0, 11);
  PointCloud back = transform_cloud(transform_cloud(cloud, pose), pose.inverse());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).norm() < 1e-9);
  }

  Pose bad;
  bad.q = Eigen::Quaterniond(1.0, 0.1, 0.0, 0.0);  // not normalized
  CHECK_THROWS_AS(transform_cloud(c, bad), std::invalid_argument);
}

TEST_CASE("transform_cloud rotates normals and conjugates covariances") {
  PointCloud c = make_cloud({{1.0, 2.0, 3.0}});
  c.normals = {Vec3(1.0, 0.0, 0.0)};
  Mat3 cov = Vec3(1.0, 2.0, 3.0).asDiagonal();
  c.covariances = {cov};

  Pose rot90;
  rot90.q = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()));
  PointCloud out = transform_cloud(c, rot90);
  CHECK((out.normals[0] - Vec3(0.0, 1.0, 0.0)).norm() < 1e-9);
  Mat3 r = rot90.q.toRotationMatrix();
  CHECK((out.covariances[0] - r * cov * r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("point_set_subtract examples") {
  PointCloud a = random_cloud(40, 5.0, 1);

  CHECK(point_set_subtract(a, a, 0.1).empty());
  CHECK(point_set_subtract(a, PointCloud{}, 0.1).size() == a.size());

  PointCloud far = a;
  for (Vec3& p : far.points) p += Vec3(100.0, 0.0, 0.0);
  CHECK(point_set_subtract(a, far, 0.1).size() == a.size());

  PointCloud two = make_cloud({{0.0, 0.0, 0.0}, {2.0, 0.0, 0.0}});
  PointCloud b = make_cloud({{0.05, 0.0, 0.0}});
  PointCloud out = point_set_subtract(two, b, 0.1);
  REQUIRE(out.size() == 1);
  CHECK(out.points[0].isApprox(Vec3(2.0, 0.0, 0.0)));

  CHECK_THROWS_AS(point_set_subtract(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("point_set_subtract partitions the input") {
  PointCloud a = random_cloud(200, 4.0, 21);
  PointCloud b = random_cloud(60, 4.0, 22);
  const double radius = 0.4;
  PointCloud survivors = point_set_subtract(a, b, radius);

  KdTree3 tree(b.points);
  std::size_t matched = 0;
  for (const Vec3& p : a.points) {
    if (tree.has_neighbor(p, radius)) ++matched;
  }
  CHECK(survivors.size() + matched == a.size());

  PointCloud ref = serial::point_set_subtract(a, b, radius);
  REQUIRE(ref.size() == survivors.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(ref.points[i] == survivors.points[i]);
  }
}

TEST_CASE("jaccard_index examples and properties") {
  PointCloud a = random_cloud(100, 5.0, 5);
  CHECK(jaccard_index(a, a, 0.25) == 1.0);

  PointCloud far = a;
  for (Vec3& p : far.points) p += Vec3(1000.0, 0.0, 0.0);
  CHECK(jaccard_index(a, far, 0.25) == 0.0);

  // 8 voxels in a, 4 shared + 4 new in b -> 4/12.
  PointCloud va, vb;
  for (int i = 0; i < 8; ++i) va.points.emplace_back(i + 0.5, 0.5, 0.5);
  for (int i = 4; i < 12; ++i) vb.points.emplace_back(i + 0.5, 0.5, 0.5);
  CHECK(jaccard_index(va, vb, 1.0) == doctest::Approx(4.0 / 12.0).epsilon(1e-12));

  PointCloud b = random_cloud(80, 5.0, 6);
  CHECK(jaccard_index(a, b, 0.3) == jaccard_index(b, a, 0.3));  // exact symmetry

  CHECK_THROWS_AS(jaccard_index(PointCloud{}, PointCloud{}, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(jaccard_index(a, b, 0.0), std::invalid_argument);
  CHECK(jaccard_index(a, PointCloud{}, 0.25) == 0.0);
}

TEST_CASE("estimate_normals_covariances on planar clouds") {
  rng::Generator gen(17);
  PointCloud plane_z, plane_x;
  for (int i = 0; i < 200; ++i) {
    double u = 10.0 * gen.next_double(), v = 10.0 * gen.next_double();
    plane_z.points.emplace_back(u, v, 0.0);
    plane_x.points.emplace_back(0.0, u, v);
  }

  PointCloud nz = estimate_normals_covariances(plane_z, 10);
  for (const Vec3& n : nz.normals) {
    CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-3);
    CHECK(std::abs(n.norm() - 1.0) < 1e-6);
  }
  PointCloud nx = estimate_normals_covariances(plane_x, 10);
  for (const Vec3& n : nx.normals) {
    CHECK(std::abs(std::abs(n.x()) - 1.0) < 1e-3);
  }

  // Regularized covariance eigenvalues are (1, 1, eps) by construction.
  SymEigen3 eig = eigen3(nz.covariances[0]);
  CHECK(eig.values[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(eig.values[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(eig.values[2] == doctest::Approx(kEpsPlane).epsilon(1e-6));

  CHECK_THROWS_AS(estimate_normals_covariances(plane_z, 2), std::invalid_argument);
  PointCloud tiny = make_cloud({{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}});
  CHECK_THROWS_AS(estimate_normals_covariances(tiny, 3), std::invalid_argument);
}
