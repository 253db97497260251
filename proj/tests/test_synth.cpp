// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "splat4d/geometry.hpp"
#include "splat4d/synth.hpp"
#include "splat4d/types.hpp"

using namespace splat4d;

namespace {

SceneSpec translating_sphere_spec() {
  SceneSpec spec = static_scene_spec(17, 3, 24, 24);
  spec.objects[0].velocity = Vec3(0.1, 0.0, 0.0);
  return spec;
}

}  // namespace

TEST_CASE("static scenes carry zero motion and empty masks") {
  const SceneSpec spec = static_scene_spec(7, 3, 16, 16);
  const SceneBundle bundle = generate(spec);

  for (int i = 0; i < bundle.n_frames(); ++i) {
    for (int q = 0; q < bundle.n_frames(); ++q) {
      const MotionGt motion = gt_motion(bundle.tracks, i, q);
      for (std::size_t p = 0; p < motion.displacement.size(); ++p) {
        if (motion.valid[p]) CHECK(motion.displacement[p].norm() == 0.0);
      }
    }
  }
  for (const Mask& mask : bundle.masks)
    for (std::uint8_t v : mask.raw()) CHECK(v == 0);
}

TEST_CASE("a translating sphere advects tracks by v * dt") {
  const SceneSpec spec = translating_sphere_spec();  // timestamps 0, 0.5, 1
  const SceneBundle bundle = generate(spec);

  const MotionGt full = gt_motion(bundle.tracks, 0, 2);
  const MotionGt half = gt_motion(bundle.tracks, 0, 1);
  int n_moving = 0;
  for (int p = 0; p < bundle.tracks.n_points; ++p) {
    if (full.valid[p] && full.displacement[p].norm() > 0.0) {
      ++n_moving;
      CHECK((full.displacement[p] - Vec3(0.1, 0, 0)).norm() < 1e-5);
      if (half.valid[p]) CHECK((half.displacement[p] - Vec3(0.05, 0, 0)).norm() < 1e-5);
    }
  }
  CHECK(n_moving > 0);
}

TEST_CASE("gt_motion of a frame against itself is zero") {
  const SceneBundle bundle = generate(dynamic_scene_spec(5, 3, 16, 16));
  const MotionGt motion = gt_motion(bundle.tracks, 1, 1);
  for (int p = 0; p < bundle.tracks.n_points; ++p) {
    CHECK(motion.displacement[p].norm() == 0.0);
    CHECK(motion.valid[p] == bundle.tracks.visible(p, 1));
  }
}

TEST_CASE("generation is byte-identical for the same spec") {
  const SceneSpec spec = dynamic_scene_spec(23, 3, 16, 16);
  const SceneBundle a = generate(spec);
  const SceneBundle b = generate(spec);

  REQUIRE(a.n_frames() == b.n_frames());
  for (int i = 0; i < a.n_frames(); ++i) {
    CHECK(a.frames[i].raw() == b.frames[i].raw());
    CHECK(a.depths[i].raw() == b.depths[i].raw());
    CHECK(a.masks[i].raw() == b.masks[i].raw());
  }
  CHECK(a.tracks.points == b.tracks.points);
  CHECK(a.tracks.visibility == b.tracks.visibility);
}

TEST_CASE("depth maps equal the analytic trace at pixel centers") {
  const SceneSpec spec = dynamic_scene_spec(11, 3, 16, 16);
  const SceneBundle bundle = generate(spec);

  for (int j = 0; j < bundle.n_frames(); ++j) {
    const Camera camera = camera_at(spec, j);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const double analytic =
            analytic_depth(spec, camera, x + 0.5, y + 0.5, camera.timestamp);
        const double stored = bundle.depths[j].at(y, x);
        if (analytic < 0.0) {
          CHECK(stored <= 0.0);
        } else {
          CHECK(std::abs(stored - analytic) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("unprojected depths land on the analytic surfaces") {
  const SceneSpec spec = static_scene_spec(3, 2, 16, 16);
  const SceneBundle bundle = generate(spec);
  const Camera camera = bundle.cameras[0];
  const UnprojectedDepth lifted = unproject_depth(bundle.depths[0], camera);

  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (!lifted.valid.at(y, x)) continue;
      // Lifting through the pixel center must reproduce the analytic hit
      // depth along that very ray.
      const Vec3 world(lifted.points.at(y, x, 0), lifted.points.at(y, x, 1),
                       lifted.points.at(y, x, 2));
      const double z = transform_point(world, camera).z();
      const double analytic = analytic_depth(spec, camera, x + 0.5, y + 0.5, camera.timestamp);
      REQUIRE(analytic > 0.0);
      CHECK(std::abs(z - analytic) < 1e-5);
    }
  }
}

TEST_CASE("visible tracks reproject into frame with consistent depth") {
  const SceneSpec spec = dynamic_scene_spec(29, 4, 24, 24);
  const SceneBundle bundle = generate(spec);
  const TrackSet& tracks = bundle.tracks;

  int n_checked = 0;
  for (int p = 0; p < tracks.n_points; ++p) {
    for (int j = 0; j < tracks.n_frames; ++j) {
      if (!tracks.visible(p, j)) continue;
      const Camera& camera = bundle.cameras[j];
      const Vec3 cam = transform_point(tracks.point(p, j), camera);
      REQUIRE(cam.z() > 0.0);
      const Vec2 pixel = project_point(cam, camera);
      CHECK(pixel.x() >= 0.0);
      CHECK(pixel.x() < 24.0);
      CHECK(pixel.y() >= 0.0);
      CHECK(pixel.y() < 24.0);
      // The scene depth along the track's own ray is the track depth itself
      // (the point is visible, so the re-trace hits it first).
      const double analytic =
          analytic_depth(spec, camera, pixel.x(), pixel.y(), camera.timestamp);
      CHECK(std::abs(cam.z() - analytic) < 1e-4);
      ++n_checked;
    }
  }
  CHECK(n_checked > 100);
}

TEST_CASE("pixels with ground-truth motion lie inside the moving mask") {
  const SceneSpec spec = dynamic_scene_spec(41, 3, 24, 24);
  const SceneBundle bundle = generate(spec);

  for (int j = 0; j < bundle.n_frames(); ++j) {
    const Image motion = gt_pixel_motion(spec, j, 1.0);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        const Vec3 d(motion.at(y, x, 0), motion.at(y, x, 1), motion.at(y, x, 2));
        if (d.norm() > 1e-6) CHECK(bundle.masks[j].at(y, x) == 1);
      }
    }
  }
}

TEST_CASE("generated bundles satisfy the scene invariants") {
  const auto findings = validate_scene(generate(dynamic_scene_spec(2, 4, 16, 16)));
  CHECK(findings.empty());

  SceneBundle bundle = generate(static_scene_spec(2, 3, 16, 16));
  const NormalizationRecord record = normalize_scene(bundle);
  CHECK(record.scale > 0.0);
  NormalizationRecord again = normalize_scene(bundle);
  CHECK(std::abs(again.scale - 1.0) < 1e-5);
}

TEST_CASE("timestamps follow j over n minus one") {
  const SceneSpec spec = static_scene_spec(1, 5, 8, 8);
  for (int j = 0; j < 5; ++j)
    CHECK(camera_at(spec, j).timestamp == doctest::Approx(j / 4.0).epsilon(1e-15));
}
