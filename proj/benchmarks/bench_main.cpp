#include <benchmark/benchmark.h>

#include "threedp/harness.hpp"
#include "threedp/shape_learning.hpp"

using namespace threedp;

namespace {

SceneSpec bench_scene() {
  static const SceneSpec spec = [] {
    const SceneContext ctx = make_desk_context();
    Rng rng(42);
    return generate_scene(SceneCategory::Stacked, {kTableType, 1, 2}, ctx, rng);
  }();
  return spec;
}

void BM_RenderDepth(benchmark::State& state) {
  const SceneContext ctx = make_desk_context();
  const SceneSpec spec = bench_scene();
  std::vector<VoxelShape> samples;
  for (const auto& b : ctx.shapes) samples.push_back(mode_shape(b));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_depth(spec.truth, samples, ctx));
  }
}
BENCHMARK(BM_RenderDepth);

void BM_CloudLoglik(benchmark::State& state) {
  const SceneContext ctx = make_desk_context();
  const SceneSpec spec = bench_scene();
  std::vector<VoxelShape> samples;
  for (const auto& b : ctx.shapes) samples.push_back(mode_shape(b));
  const PointCloud observed = unproject(spec.observation, ctx);
  const PointCloud rendered = unproject(render_depth(spec.truth, samples, ctx), ctx);
  CloudLikParams p;
  p.bounds_volume = ctx.bounds.volume();
  for (auto _ : state) {
    benchmark::DoNotOptimize(cloud_loglik(observed, rendered, p, spec.observation.depths.size()));
  }
}
BENCHMARK(BM_CloudLoglik);

void BM_StructureMove(benchmark::State& state) {
  const SceneContext ctx = make_desk_context();
  KernelConfig cfg;
  ChainState chain;
  chain.rng.seed(7);
  chain.graph = sample_prior(ctx, 3, {0, 1, 2}, chain.rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(structure_move(chain, ctx, nullptr, cfg));
  }
}
BENCHMARK(BM_StructureMove);

void BM_VoxelPosterior(benchmark::State& state) {
  SceneContext ctx;
  ctx.camera = CameraIntrinsics{64.0, 64.0, 32.0, 32.0, 64, 64};
  const GridDims dims{8, 8, 8};
  VoxelShape cube = make_shape(dims, 0.5);
  std::fill(cube.occupancy.begin(), cube.occupancy.end(), 1);
  Pose grid_pose;
  grid_pose.translation = Vec3(-2.0, -2.0, 8.0);
  SceneGraph g;
  g.types = {0};
  g.parent = {kRoot};
  g.params = {FloatingParam{grid_pose}};
  SceneContext rctx = ctx;
  rctx.shapes = {belief_from_shape(cube)};
  rctx.rebuild_planes();
  const DepthImage img = render_depth(g, {cube}, rctx);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        voxel_posterior(dims, 0.5, grid_pose, {Pose{}}, {img}, ctx));
  }
}
BENCHMARK(BM_VoxelPosterior);

}  // namespace

BENCHMARK_MAIN();
