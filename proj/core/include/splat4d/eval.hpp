// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "splat4d/geometry.hpp"
#include "splat4d/grid.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

// PSNR in dB for images in [0, 1]: 10 * log10(1 / MSE), capped at 100 dB
// when MSE < 1e-10. A non-null mask restricts the average to mask pixels
// (mPSNR); an all-true mask equals the unmasked metric. Throws NoValidPixels
// for an all-false mask.
double psnr(const Image& pred, const Image& gt, const Mask* mask = nullptr);

// Mean SSIM over all fully interior 11x11 Gaussian windows (sigma 1.5,
// K1=0.01, K2=0.03, unit data range), averaged over channels. Images must be
// at least 11x11.
double ssim(const Image& pred, const Image& gt);

struct NormalizedPoints {
  std::vector<Vec3> points;
  double scale = 1.0;  // median of the input point norms
};

// Divides points by the median norm (even count: mean of the two central
// order statistics). Throws AllZeroNorms when the median is zero.
NormalizedPoints normalize_by_median(const std::vector<Vec3>& points);

struct TrackingMetrics {
  double epe3d = 0.0;      // mean end-point error over valid (point, frame)
  double delta_005 = 0.0;  // fraction with error < 0.05
  double delta_010 = 0.0;  // fraction with error < 0.10
};

// Trajectory error metrics over valid entries; callers median-normalize pred
// and gt first. Throws NoValidEntries when the validity mask is all false.
TrackingMetrics tracking_metrics(const TrackSet& pred, const TrackSet& gt,
                                 const std::vector<std::uint8_t>& valid);

struct FlowMap {
  Image flow;  // H x W x 2 pixel displacements
  Mask valid;  // H x W; both endpoints in front of their camera
};

// Projects each pixel's displaced world point into the query camera and
// subtracts the source point's own projection into the source camera. Using
// the projected source position (equal to the pixel center up to projection
// round-off) instead of the nominal center makes the zero-motion, same-camera
// case cancel exactly. Invalid pixels carry zero flow.
FlowMap scene_flow(const MotionSlice& motion, const UnprojectedDepth& points,
                   const Camera& camera_i, const Camera& camera_q);

// Thresholds the per-pixel motion norm; throws OutOfRange unless
// threshold > 0.
Mask segment_moving(const MotionSlice& motion, double threshold);

// Intersection over union of two binary masks; empty-union pairs count as 1.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace splat4d
