// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "splat4d/eval.hpp"
#include "splat4d/io.hpp"
#include "splat4d/rasterizer.hpp"

// End-to-end workflows stitched from the core modules: fit a capture into a
// model, then render, evaluate, and derive flow and segmentation from it.

namespace splat4d {

using ModelCheckpointFn = std::function<void(int iteration, const FittedModel& model)>;

// Normalizes a copy of the bundle to desk scale, runs the optimizer, and
// packages the result with the normalized cameras and the scale so every
// later command can run from the model file alone. `history` receives the
// per-iteration losses when non-null.
FittedModel fit_bundle(const SceneBundle& bundle, const FitConfig& config,
                       const ModelCheckpointFn& checkpoint = nullptr,
                       std::vector<LossReport>* history = nullptr);

// Renders the deformed model at query time t. The camera must live in the
// model's normalized space (a camera taken from the model, or an external
// one with its translation divided by the model scale).
RenderOutput render_model(const FittedModel& model, const Camera& camera, double t,
                          const Vec3& background);

struct NvsReport {
  std::vector<double> psnr_per_frame;
  std::vector<double> ssim_per_frame;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Renders every frame of `scene` at its own timestamp and compares with the
// captured images. The scene is normalized with the model's stored scale
// first, so pass captures in their original units.
NvsReport eval_nvs(const FittedModel& model, const SceneBundle& scene);

// Predicted 3D tracks: each ground-truth point starts at its first-frame
// position and moves with the deformation of the gaussian under its
// first-frame projection. `valid_out` marks entries where the point is
// visible at both ends and a gaussian was found. The scene must already be
// in the model's normalized space.
TrackSet predict_tracks(const FittedModel& model, const SceneBundle& scene,
                        std::vector<std::uint8_t>* valid_out = nullptr);

struct TrackReport {
  TrackingMetrics metrics;
  int n_valid = 0;       // valid (point, frame) entries
  double gt_scale = 1.0;  // median ground-truth point norm used to normalize
};

// Track protocol: normalize the scene with the model scale, predict tracks,
// divide both trajectories by the median ground-truth point norm, then
// compute end-point metrics.
TrackReport eval_track(const FittedModel& model, const SceneBundle& scene);

// Pixel-space flow of frame `frame` toward query time t, derived from the
// deformation field and the fitted per-pixel positions. The query camera is
// the model camera whose timestamp equals t; when no timestamp matches, the
// source camera is reused so the flow shows pure scene motion.
FlowMap flow_from_model(const FittedModel& model, int frame, double t);

// Moving-region mask of frame `frame`: pixels whose motion toward time t
// exceeds the threshold.
Mask segment_model(const FittedModel& model, int frame, double t, double threshold);

}  // namespace splat4d
