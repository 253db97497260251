// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "splat4d/grid.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

struct LossWeights {
  double depth = 1.0;         // lambda_d
  double render = 1.0;        // lambda_r
  double motion = 1.0;        // lambda_m
  double point = 1.0;         // lambda_pt
  double distribution = 0.1;  // lambda_dist
};

struct ImageLoss {
  double value = 0.0;
  Image grad;  // same shape as the prediction
};

struct PointLoss {
  double value = 0.0;
  std::vector<Vec3> grad;  // aligned with the prediction array
};

// MSE over valid pixels plus MSE of forward-difference spatial gradients
// over pairs whose two endpoints are both valid (horizontal and vertical
// pairs pooled into one mean). Throws NoValidPixels when the mask is all
// false; a mask without any valid pair contributes zero for the gradient
// term. Shapes must match (ShapeMismatch).
ImageLoss depth_loss(const Image& pred, const Image& gt, const Mask& valid);

// Plain MSE over all pixels and channels; gradient is 2 (pred - gt) / (H W C).
ImageLoss render_loss(const Image& pred, const Image& gt);

// (1/P) sum of L1 norms of (pred - gt) over valid points, P counting valid
// points only. The L1 subgradient at 0 is taken as 0. Throws NoValidPoints
// when nothing is valid.
PointLoss motion_point_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                            const std::vector<std::uint8_t>& valid);

// (1/P^2) sum over all ordered valid pairs (i, j), diagonal included, of
// |<pred_i, pred_j> - <gt_i, gt_j>|. Gram entries are plain dot products.
PointLoss motion_distribution_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                   const std::vector<std::uint8_t>& valid);

struct LossReport {
  double depth = 0.0;
  double render = 0.0;
  double motion_point = 0.0;
  double motion_distribution = 0.0;
  double total = 0.0;
};

// total = d*depth + r*render + m*(pt*point + dist*distribution). Pass zero
// for terms that are absent (for example when a scene has no tracks).
LossReport total_loss(const LossWeights& weights, double depth, double render, double point,
                      double distribution);

// Mean of `history` over its first and last `window` entries; used to judge
// the overall trend of a noisy per-iteration loss curve.
double smoothed_head(const std::vector<double>& history, int window = 100);
double smoothed_tail(const std::vector<double>& history, int window = 100);

}  // namespace splat4d
