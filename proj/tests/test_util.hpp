// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "splat4d/rng.hpp"
#include "splat4d/types.hpp"

namespace splat4d::test {

// Axis-aligned camera at the origin looking down +z, principal point at the
// image center.
inline Camera identity_camera(int width, int height, double focal) {
  Camera camera;
  camera.fx = focal;
  camera.fy = focal;
  camera.cx = width / 2.0;
  camera.cy = height / 2.0;
  camera.width = width;
  camera.height = height;
  return camera;
}

// A gaussian whose center projects exactly onto pixel center (x + 0.5,
// y + 0.5) at the given depth.
inline SplatterPixel gaussian_at_pixel(const Camera& camera, double x, double y, double z) {
  SplatterPixel pixel;
  pixel.position = Vec3((x + 0.5 - camera.cx) * z / camera.fx,
                        (y + 0.5 - camera.cy) * z / camera.fy, z);
  return pixel;
}

// Random in-view gaussians with bounded opacity so compositing stays far
// from the early-termination floor and oracle comparisons are meaningful.
inline std::vector<SplatterPixel> random_scene(Rng& rng, int count, const Camera& camera) {
  std::vector<SplatterPixel> scene;
  scene.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SplatterPixel pixel;
    const double z = rng.uniform(1.5, 4.0);
    const double u = rng.uniform(2.0, camera.width - 2.0);
    const double v = rng.uniform(2.0, camera.height - 2.0);
    pixel.position = Vec3((u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z);
    pixel.rotation = Vec4(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                          rng.uniform(-1.0, 1.0));
    if (pixel.rotation.norm() < 0.5) pixel.rotation = Vec4(1.0, 0.0, 0.0, 0.0);
    pixel.log_scale = Vec3(std::log(rng.uniform(0.02, 0.25)), std::log(rng.uniform(0.02, 0.25)),
                           std::log(rng.uniform(0.02, 0.25)));
    pixel.opacity_logit = rng.uniform(-4.0, 1.5);
    pixel.color = Vec3(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
    scene.push_back(pixel);
  }
  return scene;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.raw()[i] - b.raw()[i]));
  return worst;
}

// Unique scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("splat4d_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace splat4d::test
