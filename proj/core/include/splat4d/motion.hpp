// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "splat4d/grid.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

// Sinusoidal embedding of a normalized timestamp t in [0, 1]:
// (sin(2^l pi t), cos(2^l pi t)) for l = 0 .. levels-1, interleaved.
// t outside [0, 1] raises OutOfRange.
struct TimeEncoding {
  std::vector<double> values;  // 2 * levels
};
TimeEncoding encode_time(double t, int levels = 8);

// Additive deformation of one splatter pixel (Eq. 1 parameter deltas):
// 3 position, 3 log-scale, 4 quaternion components.
struct DeformDelta {
  Vec3 dx = Vec3::Zero();
  Vec3 dlog_scale = Vec3::Zero();
  Vec4 dq = Vec4::Zero();
};

constexpr int kDeltaDim = 10;  // flattened (dx, dlog_scale, dq)

// Applies Eq. 1 to a pixel: position and log-scale shift additively, the
// quaternion is re-normalized after the additive update. Opacity and color
// are not time-dependent and pass through unchanged. Throws
// DegenerateQuaternion when the post-addition quaternion norm is below 1e-8.
SplatterPixel deform(const SplatterPixel& pixel, const DeformDelta& delta);

// Per-gaussian deformation deltas stored at K keyframes with strictly
// increasing times. Evaluation is piecewise-linear between keyframes and
// constant beyond the first/last one.
struct DeformationField {
  std::vector<double> keyframe_times;
  int n_gaussians = 0;
  std::vector<double> deltas;  // K * G * kDeltaDim, flattened (dx, dlog_scale, dq)

  int n_keyframes() const { return static_cast<int>(keyframe_times.size()); }

  static DeformationField zeros(const std::vector<double>& times, int n_gaussians);

  std::size_t offset(int k, int g) const {
    return (static_cast<std::size_t>(k) * n_gaussians + g) * kDeltaDim;
  }
  DeformDelta delta(int k, int g) const;
  void set_delta(int k, int g, const DeformDelta& d);

  // Interpolation segment for time t: value(t) = (1 - w) * K[k0] + w * K[k1].
  struct Segment {
    int k0 = 0;
    int k1 = 0;
    double w = 0.0;
  };
  Segment segment(double t) const;  // throws EmptyField when K == 0
};

// Evaluates the field at time t for every gaussian.
std::vector<DeformDelta> evaluate_deformation(const DeformationField& field, double t);

// Which (frame, pixel) a fitted gaussian was constructed from.
struct PixelAssociation {
  int frame = 0;
  int x = 0;
  int y = 0;
};

// Dense per-query, per-frame motion of the pixel-aligned gaussians:
// displacements[q][f][y][x] is the 3D movement of frame f's pixel (x, y)
// from its own timestamp toward query time q; attr_deltas holds the matching
// 7 attribute deltas (3 log-scale, 4 quaternion). Entries for pixels without
// an associated gaussian stay zero. A query equal to a frame's own timestamp
// therefore yields an identically zero slice for that frame.
struct MotionMap {
  int n_queries = 0;
  int n_frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> displacements;  // M * N * H * W * 3
  std::vector<double> attr_deltas;    // M * N * H * W * 7

  std::size_t disp_offset(int q, int f, int y, int x) const {
    return (((static_cast<std::size_t>(q) * n_frames + f) * height + y) * width + x) * 3;
  }
  std::size_t attr_offset(int q, int f, int y, int x) const {
    return (((static_cast<std::size_t>(q) * n_frames + f) * height + y) * width + x) * 7;
  }
};

// One (frame, query) slice of the motion map plus a mask of pixels that have
// an associated gaussian.
struct MotionSlice {
  Image displacement;  // H x W x 3
  Mask valid;          // H x W
};

// Motion of frame `frame`'s pixels toward time t_query, relative to the
// frame's own timestamp: delta(t_query) - delta(t_frame). The frame
// timestamp is field.keyframe_times[frame].
MotionSlice motion_slice(const DeformationField& field,
                         const std::vector<PixelAssociation>& associations, int frame,
                         double t_query, int height, int width);

MotionMap motion_map_from_field(const DeformationField& field,
                                const std::vector<PixelAssociation>& associations,
                                const std::vector<double>& query_times, int height, int width);

}  // namespace splat4d
