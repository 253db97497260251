// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "splat4d/grid.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

// Points closer than this to the camera plane are treated as invisible.
constexpr double kNearPlane = 1e-4;

// World-to-camera transform: p_cam = R p + t.
Vec3 transform_point(const Vec3& point_world, const Camera& camera);
std::vector<Vec3> transform_points(const std::vector<Vec3>& points_world, const Camera& camera);

struct ProjectedPoints {
  std::vector<Vec2> pixels;           // (u, v) in pixel units
  std::vector<double> depths;         // camera-frame z
  std::vector<std::uint8_t> valid;    // z > kNearPlane
};

// Pinhole projection of camera-frame points: u = fx x / z + cx, v = fy y / z + cy.
// Points at or behind the near plane are flagged invalid; their pixel entries
// are zero. Pixel (ix, iy) spans [ix, ix+1) x [iy, iy+1), so its center sits
// at (ix + 0.5, iy + 0.5).
Vec2 project_point(const Vec3& point_cam, const Camera& camera);
ProjectedPoints project(const std::vector<Vec3>& points_cam, const Camera& camera);

struct UnprojectedDepth {
  Image points;  // H x W x 3 world coordinates
  Mask valid;    // H x W, 1 where depth > 0 and finite
};

// Lifts a depth map (camera-frame z per pixel) back to world space through
// pixel centers. project(transform(points)) reproduces pixel centers and the
// depth values for valid pixels.
UnprojectedDepth unproject_depth(const Image& depth, const Camera& camera);

// Per-pixel Plucker ray embedding: channels 0..2 hold the unit world-space
// ray direction d, channels 3..5 the moment m = o x d about the world
// origin, where o is the camera center. d . m == 0 by construction.
Image plucker_embedding(const Camera& camera, int height, int width);

struct NormalizationRecord {
  double scale = 1.0;  // mean distance of valid unprojected points to the origin
  // Which bundle members the division touched, for report files.
  std::string applied_to = "camera translations, depths, tracks";
};

// Applies a known normalization scale: divides camera translations, depth
// values, and track coordinates by `scale`. Intrinsics and timestamps are
// untouched. Invalid depths (<= 0) are left as stored.
SceneBundle apply_normalization(const SceneBundle& bundle, double scale);

// Rescales the bundle so the mean distance of all valid unprojected depth
// points to the world origin becomes 1. Requires depth maps with at least
// one valid value (else NoValidPoints). Applying the function twice is a
// no-op up to round-off.
NormalizationRecord normalize_scene(SceneBundle& bundle);

}  // namespace splat4d
