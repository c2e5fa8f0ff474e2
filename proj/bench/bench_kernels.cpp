// Production kernels (kd-tree + OpenMP) against the plain serial references.
// Thread-count arguments exercise the OpenMP scaling of each kernel.

#include <benchmark/benchmark.h>

#include "kfe/geometry.hpp"
#include "kfe/hessian.hpp"
#include "kfe/parallel.hpp"
#include "kfe/rng.hpp"
#include "kfe/serial_reference.hpp"
#include "kfe/summarizer.hpp"
#include "kfe/synthworld.hpp"

using namespace kfe;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  rng::Generator gen(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(20.0 * gen.next_double(), 20.0 * gen.next_double(),
                          20.0 * gen.next_double());
  }
  return c;
}

const PointCloud& scan_cloud() {
  static PointCloud c = random_cloud(2000, 1);
  return c;
}

const PointCloud& target_cloud() {
  static PointCloud c = estimate_normals_covariances(random_cloud(6000, 2), 10);
  return c;
}

std::vector<Descriptor> descriptor_set(int n, int dim) {
  rng::Generator gen(3);
  std::vector<Descriptor> out;
  for (int i = 0; i < n; ++i) {
    Descriptor d(dim);
    for (int j = 0; j < dim; ++j) d[j] = gen.next_normal();
    out.push_back(d / d.norm());
  }
  return out;
}

}  // namespace

static void BM_Correspondences(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  KdTree3 tree(target_cloud().points);
  for (auto _ : state) {
    auto corr = find_correspondences(scan_cloud(), target_cloud(), tree, 0.8);
    benchmark::DoNotOptimize(corr);
  }
  set_thread_count(0);
}
BENCHMARK(BM_Correspondences)->Arg(1)->Arg(2)->Arg(4);

static void BM_Correspondences_Reference(benchmark::State& state) {
  for (auto _ : state) {
    auto corr = serial::find_correspondences(scan_cloud(), target_cloud(), 0.8);
    benchmark::DoNotOptimize(corr);
  }
}
BENCHMARK(BM_Correspondences_Reference);

static void BM_Normals(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto cloud = estimate_normals_covariances(scan_cloud(), 10);
    benchmark::DoNotOptimize(cloud);
  }
  set_thread_count(0);
}
BENCHMARK(BM_Normals)->Arg(1)->Arg(2)->Arg(4);

static void BM_Normals_Reference(benchmark::State& state) {
  PointCloud small = random_cloud(400, 4);  // exhaustive kNN is quadratic
  for (auto _ : state) {
    auto cloud = serial::estimate_normals_covariances(small, 10);
    benchmark::DoNotOptimize(cloud);
  }
}
BENCHMARK(BM_Normals_Reference);

static void BM_Subtract(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = point_set_subtract(scan_cloud(), target_cloud(), 0.5);
    benchmark::DoNotOptimize(out);
  }
  set_thread_count(0);
}
BENCHMARK(BM_Subtract)->Arg(1)->Arg(2)->Arg(4);

static void BM_Subtract_Reference(benchmark::State& state) {
  for (auto _ : state) {
    auto out = serial::point_set_subtract(scan_cloud(), target_cloud(), 0.5);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_Subtract_Reference);

static void BM_Raycast(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  World world(preset_world("forest-proxy", 7));
  Pose pose;
  pose.t = Vec3(20.0, 20.0, 1.5);
  BeamPattern pattern;
  for (auto _ : state) {
    auto cloud = raycast_scan(world, pose, pattern, 9);
    benchmark::DoNotOptimize(cloud);
  }
  set_thread_count(0);
}
BENCHMARK(BM_Raycast)->Arg(1)->Arg(2)->Arg(4);

static void BM_Raycast_Reference(benchmark::State& state) {
  World world(preset_world("forest-proxy", 7));
  Pose pose;
  pose.t = Vec3(20.0, 20.0, 1.5);
  BeamPattern pattern;
  for (auto _ : state) {
    auto cloud = serial::raycast_scan(world, pose, pattern, 9);
    benchmark::DoNotOptimize(cloud);
  }
}
BENCHMARK(BM_Raycast_Reference);

static void BM_SieveSummarize(benchmark::State& state) {
  auto descs = descriptor_set(500, 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sieve_stream_summarize(descs, static_cast<int>(state.range(0)), 0.1));
  }
}
BENCHMARK(BM_SieveSummarize)->Arg(75)->Arg(300);

static void BM_GreedySummarize(benchmark::State& state) {
  auto descs = descriptor_set(500, 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(greedy_summarize(descs, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_GreedySummarize)->Arg(75)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
