// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/geometry.hpp"

#include <cmath>

#include "splat4d/errors.hpp"

namespace splat4d {

Vec3 transform_point(const Vec3& point_world, const Camera& camera) {
  return camera.rotation * point_world + camera.translation;
}

std::vector<Vec3> transform_points(const std::vector<Vec3>& points_world, const Camera& camera) {
  std::vector<Vec3> out(points_world.size());
  for (std::size_t i = 0; i < points_world.size(); ++i) {
    out[i] = transform_point(points_world[i], camera);
  }
  return out;
}

Vec2 project_point(const Vec3& point_cam, const Camera& camera) {
  return Vec2(camera.fx * point_cam.x() / point_cam.z() + camera.cx,
              camera.fy * point_cam.y() / point_cam.z() + camera.cy);
}

ProjectedPoints project(const std::vector<Vec3>& points_cam, const Camera& camera) {
  ProjectedPoints out;
  out.pixels.resize(points_cam.size(), Vec2::Zero());
  out.depths.resize(points_cam.size(), 0.0);
  out.valid.resize(points_cam.size(), 0);
  for (std::size_t i = 0; i < points_cam.size(); ++i) {
    const Vec3& p = points_cam[i];
    out.depths[i] = p.z();
    if (p.z() > kNearPlane) {
      out.pixels[i] = project_point(p, camera);
      out.valid[i] = 1;
    }
  }
  return out;
}

UnprojectedDepth unproject_depth(const Image& depth, const Camera& camera) {
  if (depth.channels() != 1) {
    throw ShapeMismatch("unproject_depth: depth map must have one channel");
  }
  const int h = depth.height();
  const int w = depth.width();
  UnprojectedDepth out{Image(h, w, 3), Mask(h, w, 1)};
  const Mat3 rot_t = camera.rotation.transpose();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = depth.at(y, x);
      if (!(d > 0.0) || !std::isfinite(d)) {
        continue;
      }
      const Vec3 p_cam(d * (x + 0.5 - camera.cx) / camera.fx,
                       d * (y + 0.5 - camera.cy) / camera.fy, d);
      const Vec3 p_world = rot_t * (p_cam - camera.translation);
      out.points.at(y, x, 0) = p_world.x();
      out.points.at(y, x, 1) = p_world.y();
      out.points.at(y, x, 2) = p_world.z();
      out.valid.at(y, x) = 1;
    }
  }
  return out;
}

Image plucker_embedding(const Camera& camera, int height, int width) {
  Image out(height, width, 6);
  const Mat3 rot_t = camera.rotation.transpose();
  const Vec3 origin = camera.center();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 dir_cam((x + 0.5 - camera.cx) / camera.fx,
                         (y + 0.5 - camera.cy) / camera.fy, 1.0);
      const Vec3 dir = (rot_t * dir_cam).normalized();
      const Vec3 moment = origin.cross(dir);
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = dir[c];
        out.at(y, x, c + 3) = moment[c];
      }
    }
  }
  return out;
}

SceneBundle apply_normalization(const SceneBundle& bundle, double scale) {
  SceneBundle out = bundle;
  for (Camera& cam : out.cameras) {
    cam.translation /= scale;
  }
  for (Image& depth : out.depths) {
    for (double& d : depth.raw()) {
      if (d > 0.0) {
        d /= scale;
      }
    }
  }
  for (double& v : out.tracks.points) {
    v /= scale;
  }
  return out;
}

NormalizationRecord normalize_scene(SceneBundle& bundle) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < static_cast<int>(bundle.depths.size()); ++i) {
    const UnprojectedDepth lifted = unproject_depth(bundle.depths[i], bundle.cameras[i]);
    for (int y = 0; y < lifted.points.height(); ++y) {
      for (int x = 0; x < lifted.points.width(); ++x) {
        if (!lifted.valid.at(y, x)) {
          continue;
        }
        sum += Vec3(lifted.points.at(y, x, 0), lifted.points.at(y, x, 1),
                    lifted.points.at(y, x, 2))
                   .norm();
        ++count;
      }
    }
  }
  if (count == 0) {
    throw NoValidPoints("normalize_scene: no valid depth points to measure");
  }
  NormalizationRecord record{sum / static_cast<double>(count)};
  bundle = apply_normalization(bundle, record.scale);
  return record;
}

}  // namespace splat4d
