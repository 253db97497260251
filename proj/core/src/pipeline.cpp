// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/pipeline.hpp"

#include <cmath>
#include <utility>

#include "splat4d/errors.hpp"
#include "splat4d/geometry.hpp"

namespace splat4d {

namespace {

std::vector<DeformDelta> deltas_at(const FittedModel& model, double t) {
  if (model.field.n_keyframes() > 0) {
    return evaluate_deformation(model.field, t);
  }
  return std::vector<DeformDelta>(model.pixels.size());
}

Vec3 delta_position_at(const DeformationField& field, const DeformationField::Segment& seg,
                       int g) {
  const std::size_t o0 = field.offset(seg.k0, g);
  const Vec3 a(field.deltas[o0], field.deltas[o0 + 1], field.deltas[o0 + 2]);
  if (seg.w == 0.0) {
    return a;
  }
  const std::size_t o1 = field.offset(seg.k1, g);
  const Vec3 b(field.deltas[o1], field.deltas[o1 + 1], field.deltas[o1 + 2]);
  return (1.0 - seg.w) * a + seg.w * b;
}

TrackSet divide_tracks(const TrackSet& tracks, double scale) {
  TrackSet out = tracks;
  for (double& v : out.points) {
    v /= scale;
  }
  return out;
}

}  // namespace

FittedModel fit_bundle(const SceneBundle& bundle, const FitConfig& config,
                       const ModelCheckpointFn& checkpoint, std::vector<LossReport>* history) {
  SceneBundle normalized = bundle;
  const NormalizationRecord record = normalize_scene(normalized);

  const auto package = [&](const FitResult& fit) {
    FittedModel model;
    model.pixels = fit.pixels;
    model.field = fit.field;
    model.normalization_scale = record.scale;
    model.associations = fit.associations;
    model.cameras = normalized.cameras;
    model.height = normalized.height();
    model.width = normalized.width();
    return model;
  };

  CheckpointFn inner;
  if (checkpoint) {
    inner = [&](int iteration, const FitResult& snapshot) {
      checkpoint(iteration, package(snapshot));
    };
  }
  FitResult fit = fit_scene(normalized, config, inner);
  if (history) {
    *history = std::move(fit.history);
  }
  return package(fit);
}

RenderOutput render_model(const FittedModel& model, const Camera& camera, double t,
                          const Vec3& background) {
  const std::vector<DeformDelta> deltas = deltas_at(model, t);
  return rasterize(model.pixels, &deltas, camera, background);
}

NvsReport eval_nvs(const FittedModel& model, const SceneBundle& scene) {
  if (scene.frames.empty()) {
    throw NoValidPixels("eval_nvs: scene has no frames");
  }
  const SceneBundle normalized = apply_normalization(scene, model.normalization_scale);
  NvsReport report;
  for (int f = 0; f < normalized.n_frames(); ++f) {
    const Camera& camera = normalized.cameras[f];
    const RenderOutput out = render_model(model, camera, camera.timestamp, Vec3::Zero());
    report.psnr_per_frame.push_back(psnr(out.rgb, normalized.frames[f]));
    report.ssim_per_frame.push_back(ssim(out.rgb, normalized.frames[f]));
    report.mean_psnr += report.psnr_per_frame.back();
    report.mean_ssim += report.ssim_per_frame.back();
  }
  report.mean_psnr /= normalized.n_frames();
  report.mean_ssim /= normalized.n_frames();
  return report;
}

TrackSet predict_tracks(const FittedModel& model, const SceneBundle& scene,
                        std::vector<std::uint8_t>* valid_out) {
  const TrackSet& gt = scene.tracks;
  if (gt.empty()) {
    throw NoValidEntries("predict_tracks: scene carries no tracks");
  }
  if (model.associations.empty()) {
    throw NoValidEntries("predict_tracks: model carries no pixel associations");
  }
  if (scene.height() != model.height || scene.width() != model.width) {
    throw ShapeMismatch("predict_tracks: scene resolution does not match the model");
  }
  const int height = model.height;
  const int width = model.width;
  const Camera& anchor = scene.cameras.front();

  Grid<int> owner(height, width, 1, -1);
  for (int g = 0; g < static_cast<int>(model.associations.size()); ++g) {
    const PixelAssociation& a = model.associations[g];
    if (a.frame == 0) {
      owner.at(a.y, a.x) = g;
    }
  }

  std::vector<int> bound(gt.n_points, -1);
  for (int p = 0; p < gt.n_points; ++p) {
    if (!gt.visible(p, 0)) {
      continue;
    }
    const Vec3 cam_point = transform_point(gt.point(p, 0), anchor);
    if (cam_point.z() <= kNearPlane) {
      continue;
    }
    const Vec2 uv = project_point(cam_point, anchor);
    const int px = static_cast<int>(std::floor(uv.x()));
    const int py = static_cast<int>(std::floor(uv.y()));
    if (px < 0 || px >= width || py < 0 || py >= height) {
      continue;
    }
    bound[p] = owner.at(py, px);
  }

  TrackSet pred;
  pred.n_points = gt.n_points;
  pred.n_frames = gt.n_frames;
  pred.points.assign(static_cast<std::size_t>(gt.n_points) * gt.n_frames * 3, 0.0);
  pred.visibility = gt.visibility;
  if (valid_out) {
    valid_out->assign(static_cast<std::size_t>(gt.n_points) * gt.n_frames, 0);
  }

  const double t_0 = scene.cameras.front().timestamp;
  const DeformationField::Segment seg_0 = model.field.segment(t_0);
  for (int q = 0; q < gt.n_frames; ++q) {
    const double t_q = scene.cameras[q].timestamp;
    const DeformationField::Segment seg_q = model.field.segment(t_q);
    for (int p = 0; p < gt.n_points; ++p) {
      const int g = bound[p];
      if (g < 0) {
        continue;
      }
      const Vec3 displacement = delta_position_at(model.field, seg_q, g) -
                                delta_position_at(model.field, seg_0, g);
      pred.set_point(p, q, gt.point(p, 0) + displacement);
      if (valid_out && gt.visible(p, q)) {
        (*valid_out)[static_cast<std::size_t>(p) * gt.n_frames + q] = 1;
      }
    }
  }
  return pred;
}

TrackReport eval_track(const FittedModel& model, const SceneBundle& scene) {
  const SceneBundle normalized = apply_normalization(scene, model.normalization_scale);
  std::vector<std::uint8_t> valid;
  const TrackSet pred = predict_tracks(model, normalized, &valid);
  const TrackSet& gt = normalized.tracks;

  std::vector<Vec3> gt_points;
  for (int p = 0; p < gt.n_points; ++p) {
    for (int q = 0; q < gt.n_frames; ++q) {
      if (valid[static_cast<std::size_t>(p) * gt.n_frames + q]) {
        gt_points.push_back(gt.point(p, q));
      }
    }
  }
  if (gt_points.empty()) {
    throw NoValidEntries("eval_track: no valid (point, frame) entry");
  }
  const double scale = normalize_by_median(gt_points).scale;

  TrackReport report;
  report.gt_scale = scale;
  report.n_valid = static_cast<int>(gt_points.size());
  report.metrics = tracking_metrics(divide_tracks(pred, scale), divide_tracks(gt, scale), valid);
  return report;
}

FlowMap flow_from_model(const FittedModel& model, int frame, double t) {
  if (model.cameras.empty()) {
    throw OutOfRange("flow_from_model: model carries no cameras");
  }
  if (frame < 0 || frame >= static_cast<int>(model.cameras.size())) {
    throw OutOfRange("flow_from_model: frame index " + std::to_string(frame) + " out of range");
  }
  const int height = model.height;
  const int width = model.width;
  const MotionSlice slice =
      motion_slice(model.field, model.associations, frame, t, height, width);

  // The fitted positions are the source frame's surface points: a gaussian
  // sits at its own pixel's unprojection and its own-frame delta is zero.
  UnprojectedDepth points;
  points.points = Image(height, width, 3, 0.0);
  points.valid = Mask(height, width, 1, 0);
  for (int g = 0; g < static_cast<int>(model.associations.size()); ++g) {
    const PixelAssociation& a = model.associations[g];
    if (a.frame != frame) {
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      points.points.at(a.y, a.x, c) = model.pixels[g].position(c);
    }
    points.valid.at(a.y, a.x) = 1;
  }

  const Camera& camera_i = model.cameras[frame];
  const Camera* camera_q = &camera_i;
  for (const Camera& camera : model.cameras) {
    if (std::abs(camera.timestamp - t) < 1e-9) {
      camera_q = &camera;
      break;
    }
  }
  return scene_flow(slice, points, camera_i, *camera_q);
}

Mask segment_model(const FittedModel& model, int frame, double t, double threshold) {
  const MotionSlice slice =
      motion_slice(model.field, model.associations, frame, t, model.height, model.width);
  return segment_moving(slice, threshold);
}

}  // namespace splat4d
