// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "splat4d/grid.hpp"

namespace splat4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// One dynamic splatter pixel. Parameters are stored pre-activation:
// log_scale is exponentiated, opacity_logit goes through a sigmoid, rotation
// is normalized to a unit quaternion (w, x, y, z), color is clamped to [0,1].
struct SplatterPixel {
  Vec3 position = Vec3::Zero();
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Zero();
};

struct ActivatedAttributes {
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);  // unit quaternion
  Vec3 scale = Vec3::Ones();                 // strictly positive
  double opacity = 0.5;                      // in (0, 1)
  Vec3 color = Vec3::Zero();                 // in [0, 1]
};

// Applies the activation functions to a pixel's stored parameters.
// Deterministic; throws DegenerateQuaternion when the quaternion norm is
// below 1e-8. Re-activating activated values is a no-op up to normalization
// round-off.
ActivatedAttributes activate(const SplatterPixel& pixel);

// Pinhole camera with a world-to-camera rigid transform: p_cam = R p + t.
struct Camera {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double timestamp = 0.0;  // normalized to [0, 1]

  Vec3 center() const { return -rotation.transpose() * translation; }
};

// P tracked 3D points over N frames, with per-entry visibility.
struct TrackSet {
  int n_points = 0;
  int n_frames = 0;
  std::vector<double> points;             // P * N * 3, world coordinates
  std::vector<std::uint8_t> visibility;   // P * N

  bool empty() const { return n_points == 0; }

  Vec3 point(int p, int n) const {
    const std::size_t base = (static_cast<std::size_t>(p) * n_frames + n) * 3;
    return Vec3(points[base], points[base + 1], points[base + 2]);
  }
  void set_point(int p, int n, const Vec3& value) {
    const std::size_t base = (static_cast<std::size_t>(p) * n_frames + n) * 3;
    points[base] = value.x();
    points[base + 1] = value.y();
    points[base + 2] = value.z();
  }
  bool visible(int p, int n) const {
    return visibility[static_cast<std::size_t>(p) * n_frames + n] != 0;
  }
};

// A posed multi-frame capture: RGB frames with cameras, plus optional depth
// maps, 3D tracks, and moving-object masks. Frames and cameras are aligned
// by index; camera timestamps must be strictly increasing.
struct SceneBundle {
  std::vector<Image> frames;   // each H x W x 3, values in [0, 1]
  std::vector<Camera> cameras;
  std::vector<Image> depths;   // each H x W x 1; empty when absent; <= 0 marks invalid
  std::vector<Mask> masks;     // each H x W x 1 moving-object mask; empty when absent
  TrackSet tracks;             // empty() when absent

  int n_frames() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  bool has_depths() const { return !depths.empty(); }
};

// Checks structural invariants of a bundle and returns one human-readable
// finding per violation (empty means valid). Collects everything instead of
// stopping at the first problem.
std::vector<std::string> validate_scene(const SceneBundle& bundle);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Rotation matrix of a unit quaternion (w, x, y, z), Hamilton convention.
inline Mat3 rotation_matrix(const Vec4& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
       2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
       2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

}  // namespace splat4d
