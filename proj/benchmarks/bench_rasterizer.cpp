// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "splat4d/rasterizer.hpp"
#include "splat4d/rng.hpp"

namespace {

using namespace splat4d;

Camera bench_camera(int size) {
  Camera camera;
  camera.fx = camera.fy = 0.9 * size;
  camera.cx = camera.cy = size / 2.0;
  camera.width = size;
  camera.height = size;
  return camera;
}

std::vector<SplatterPixel> bench_scene(int count, const Camera& camera) {
  Rng rng(99);
  std::vector<SplatterPixel> scene;
  scene.reserve(count);
  for (int i = 0; i < count; ++i) {
    SplatterPixel pixel;
    const double z = rng.uniform(1.5, 4.0);
    const double u = rng.uniform(2.0, camera.width - 2.0);
    const double v = rng.uniform(2.0, camera.height - 2.0);
    pixel.position =
        Vec3((u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z);
    pixel.rotation = Vec4(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1));
    if (pixel.rotation.norm() < 0.5) pixel.rotation = Vec4(1, 0, 0, 0);
    pixel.log_scale = Vec3::Constant(std::log(rng.uniform(0.02, 0.2)));
    pixel.opacity_logit = rng.uniform(-4.0, 1.5);
    pixel.color = Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    scene.push_back(pixel);
  }
  return scene;
}

void BM_RasterizeForward(benchmark::State& state) {
  const Camera camera = bench_camera(64);
  const std::vector<SplatterPixel> scene = bench_scene(static_cast<int>(state.range(0)), camera);
  const Vec3 background(0.1, 0.1, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize(scene, camera, background));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RasterizeForward)->Arg(256)->Arg(1024)->Arg(4096);

void BM_ReferenceRasterize(benchmark::State& state) {
  const Camera camera = bench_camera(64);
  const std::vector<SplatterPixel> scene = bench_scene(static_cast<int>(state.range(0)), camera);
  const Vec3 background(0.1, 0.1, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference_rasterize(scene, camera, background));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReferenceRasterize)->Arg(256)->Arg(1024);

void BM_RasterizeBackward(benchmark::State& state) {
  const Camera camera = bench_camera(64);
  const std::vector<SplatterPixel> scene = bench_scene(static_cast<int>(state.range(0)), camera);
  const Vec3 background(0.1, 0.1, 0.1);
  RasterContext context;
  const RenderOutput out = rasterize(scene, camera, background, &context);

  RenderAdjoint upstream;
  upstream.d_rgb = Image(out.rgb.height(), out.rgb.width(), 3, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize_backward(scene, camera, context, upstream));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RasterizeBackward)->Arg(256)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
