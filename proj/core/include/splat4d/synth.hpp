// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "splat4d/grid.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

enum class ShapeKind { Sphere, Box, Plane };
enum class TextureKind { Solid, Checker };
enum class CameraPathKind { Orbit, Linear };

// One rigid primitive. The trajectory is x(t) = center + velocity*t +
// R(t)*(x0 - center) with R(t) the rotation by rotation_rate*t radians about
// rotation_axis, so t=0 is the canonical pose.
struct ObjectSpec {
  ShapeKind shape = ShapeKind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 0.5;                          // sphere
  Vec3 half_extent = Vec3(0.5, 0.5, 0.5);       // box
  Vec3 normal = Vec3(0.0, 0.0, 1.0);            // plane
  TextureKind texture = TextureKind::Checker;
  Vec3 albedo = Vec3(0.8, 0.8, 0.8);
  Vec3 albedo2 = Vec3(0.25, 0.25, 0.25);        // checker counter-color
  double checker_scale = 0.25;                  // checker cell size, object units
  Vec3 velocity = Vec3::Zero();                 // units per unit time
  Vec3 rotation_axis = Vec3(0.0, 1.0, 0.0);
  double rotation_rate = 0.0;                   // radians per unit time

  bool moving() const { return velocity.squaredNorm() > 0.0 || rotation_rate != 0.0; }
};

struct CameraPathSpec {
  CameraPathKind kind = CameraPathKind::Orbit;
  Vec3 target = Vec3::Zero();
  double radius = 4.0;        // orbit distance from target
  double height = 1.0;        // orbit camera height above target
  double arc_degrees = 40.0;  // orbit sweep, centered on the target's +z side
  Vec3 start = Vec3(-0.8, 0.6, 4.0);  // linear path endpoints
  Vec3 end = Vec3(0.8, 0.6, 4.0);
  double fov_degrees = 45.0;  // vertical field of view
};

// Deterministic procedural scene: rigid primitives in front of a static
// backdrop plane, viewed by a smooth camera path at evenly spaced timestamps.
struct SceneSpec {
  std::uint64_t seed = 1;
  int n_frames = 5;
  int height = 32;
  int width = 32;
  int n_tracks = 256;  // 75% sampled on moving objects when any exist
  std::vector<ObjectSpec> objects;
  ObjectSpec background;  // forced to a static plane behind the objects
  CameraPathSpec camera;

  SceneSpec();  // fills the backdrop defaults
};

// Canned specs used by documentation and the quantitative experiments: a
// textured static arrangement, and the same stage with one translating and
// one rotating object.
SceneSpec static_scene_spec(std::uint64_t seed, int n_frames, int height, int width);
SceneSpec dynamic_scene_spec(std::uint64_t seed, int n_frames, int height, int width);

// Camera of frame j on the path; timestamps are j / (n_frames - 1).
Camera camera_at(const SceneSpec& spec, int frame);

// Renders frames, depths, moving-object masks, and surface tracks by
// analytic ray-object intersection. Frame colors are quantized to the 8-bit
// grid and depths/tracks to float32 at generation time, so writing and
// re-reading the bundle reproduces it exactly. Byte-identical output for an
// identical spec.
SceneBundle generate(const SceneSpec& spec);

struct MotionGt {
  std::vector<Vec3> displacement;   // P entries, points[.,q] - points[.,i]
  std::vector<std::uint8_t> valid;  // visibility[.,i] AND visibility[.,q]
};

// Ground-truth displacement of every track between two frames.
MotionGt gt_motion(const TrackSet& tracks, int i, int q);

// Analytic per-pixel world displacement of frame i's surface points advected
// to time t_q; zero where the pixel ray hits nothing. Oracle for scene-flow
// and segmentation checks.
Image gt_pixel_motion(const SceneSpec& spec, int frame_i, double t_q);

// Camera-frame depth of the nearest hit along the ray through continuous
// pixel position (u, v) at time t; -1 when the ray escapes the scene.
double analytic_depth(const SceneSpec& spec, const Camera& camera, double u, double v,
                      double t);

}  // namespace splat4d
