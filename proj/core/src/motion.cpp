// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/motion.hpp"

#include <cmath>

#include "splat4d/errors.hpp"

namespace splat4d {

TimeEncoding encode_time(double t, int levels) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw OutOfRange("encode_time: t = " + std::to_string(t) + " outside [0,1]");
  }
  if (levels < 1) {
    throw OutOfRange("encode_time: levels must be >= 1");
  }
  TimeEncoding enc;
  enc.values.resize(2 * static_cast<std::size_t>(levels));
  double freq = M_PI;
  for (int l = 0; l < levels; ++l) {
    enc.values[2 * l] = std::sin(freq * t);
    enc.values[2 * l + 1] = std::cos(freq * t);
    freq *= 2.0;
  }
  return enc;
}

SplatterPixel deform(const SplatterPixel& pixel, const DeformDelta& delta) {
  SplatterPixel out = pixel;
  out.position += delta.dx;
  out.log_scale += delta.dlog_scale;
  const Vec4 q = pixel.rotation + delta.dq;
  const double norm = q.norm();
  if (norm < 1e-8) {
    throw DegenerateQuaternion("deform: quaternion norm " + std::to_string(norm) +
                               " below 1e-8 after delta");
  }
  out.rotation = q / norm;
  return out;
}

DeformationField DeformationField::zeros(const std::vector<double>& times, int n_gaussians) {
  DeformationField field;
  field.keyframe_times = times;
  field.n_gaussians = n_gaussians;
  field.deltas.assign(times.size() * static_cast<std::size_t>(n_gaussians) * kDeltaDim, 0.0);
  return field;
}

DeformDelta DeformationField::delta(int k, int g) const {
  const double* p = deltas.data() + offset(k, g);
  DeformDelta d;
  d.dx = Vec3(p[0], p[1], p[2]);
  d.dlog_scale = Vec3(p[3], p[4], p[5]);
  d.dq = Vec4(p[6], p[7], p[8], p[9]);
  return d;
}

void DeformationField::set_delta(int k, int g, const DeformDelta& d) {
  double* p = deltas.data() + offset(k, g);
  for (int i = 0; i < 3; ++i) {
    p[i] = d.dx[i];
    p[3 + i] = d.dlog_scale[i];
  }
  for (int i = 0; i < 4; ++i) {
    p[6 + i] = d.dq[i];
  }
}

DeformationField::Segment DeformationField::segment(double t) const {
  const int k = n_keyframes();
  if (k == 0) {
    throw EmptyField("deformation field has no keyframes");
  }
  if (t <= keyframe_times.front()) {
    return {0, 0, 0.0};
  }
  if (t >= keyframe_times.back()) {
    return {k - 1, k - 1, 0.0};
  }
  int lo = 0;
  while (lo + 1 < k && keyframe_times[lo + 1] <= t) {
    ++lo;
  }
  const double span = keyframe_times[lo + 1] - keyframe_times[lo];
  return {lo, lo + 1, (t - keyframe_times[lo]) / span};
}

std::vector<DeformDelta> evaluate_deformation(const DeformationField& field, double t) {
  const DeformationField::Segment seg = field.segment(t);
  std::vector<DeformDelta> out(field.n_gaussians);
  for (int g = 0; g < field.n_gaussians; ++g) {
    const DeformDelta a = field.delta(seg.k0, g);
    if (seg.w == 0.0) {
      out[g] = a;
      continue;
    }
    const DeformDelta b = field.delta(seg.k1, g);
    out[g].dx = (1.0 - seg.w) * a.dx + seg.w * b.dx;
    out[g].dlog_scale = (1.0 - seg.w) * a.dlog_scale + seg.w * b.dlog_scale;
    out[g].dq = (1.0 - seg.w) * a.dq + seg.w * b.dq;
  }
  return out;
}

MotionSlice motion_slice(const DeformationField& field,
                         const std::vector<PixelAssociation>& associations, int frame,
                         double t_query, int height, int width) {
  if (static_cast<int>(associations.size()) != field.n_gaussians) {
    throw ShapeMismatch("motion_slice: association count does not match field");
  }
  if (frame < 0 || frame >= field.n_keyframes()) {
    throw OutOfRange("motion_slice: frame index " + std::to_string(frame) + " out of range");
  }
  MotionSlice slice{Image(height, width, 3), Mask(height, width, 1)};
  const std::vector<DeformDelta> at_query = evaluate_deformation(field, t_query);
  const std::vector<DeformDelta> at_frame =
      evaluate_deformation(field, field.keyframe_times[frame]);
  for (int g = 0; g < field.n_gaussians; ++g) {
    const PixelAssociation& assoc = associations[g];
    if (assoc.frame != frame) {
      continue;
    }
    const Vec3 disp = at_query[g].dx - at_frame[g].dx;
    for (int c = 0; c < 3; ++c) {
      slice.displacement.at(assoc.y, assoc.x, c) = disp[c];
    }
    slice.valid.at(assoc.y, assoc.x) = 1;
  }
  return slice;
}

MotionMap motion_map_from_field(const DeformationField& field,
                                const std::vector<PixelAssociation>& associations,
                                const std::vector<double>& query_times, int height, int width) {
  if (static_cast<int>(associations.size()) != field.n_gaussians) {
    throw ShapeMismatch("motion_map_from_field: association count does not match field");
  }
  MotionMap map;
  map.n_queries = static_cast<int>(query_times.size());
  map.n_frames = field.n_keyframes();
  map.height = height;
  map.width = width;
  const std::size_t cells = static_cast<std::size_t>(map.n_queries) * map.n_frames * height * width;
  map.displacements.assign(cells * 3, 0.0);
  map.attr_deltas.assign(cells * 7, 0.0);

  std::vector<std::vector<DeformDelta>> at_frame(map.n_frames);
  for (int f = 0; f < map.n_frames; ++f) {
    at_frame[f] = evaluate_deformation(field, field.keyframe_times[f]);
  }
  for (int q = 0; q < map.n_queries; ++q) {
    const std::vector<DeformDelta> at_query = evaluate_deformation(field, query_times[q]);
    for (int g = 0; g < field.n_gaussians; ++g) {
      const PixelAssociation& assoc = associations[g];
      const DeformDelta& base = at_frame[assoc.frame][g];
      const DeformDelta& now = at_query[g];
      double* disp = map.displacements.data() + map.disp_offset(q, assoc.frame, assoc.y, assoc.x);
      double* attr = map.attr_deltas.data() + map.attr_offset(q, assoc.frame, assoc.y, assoc.x);
      for (int c = 0; c < 3; ++c) {
        disp[c] = now.dx[c] - base.dx[c];
        attr[c] = now.dlog_scale[c] - base.dlog_scale[c];
      }
      for (int c = 0; c < 4; ++c) {
        attr[3 + c] = now.dq[c] - base.dq[c];
      }
    }
  }
  return map;
}

}  // namespace splat4d
