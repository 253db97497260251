// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "splat4d/geometry.hpp"
#include "splat4d/grid.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

// Per-pixel compositing stops once transmittance drops below this.
constexpr double kTransmittanceFloor = 1e-4;

// Screen-space low-pass floor added to the projected covariance diagonal, in
// pixel^2. Keeps sub-pixel Gaussians from aliasing and the conic invertible.
constexpr double kLowPassFloor = 0.3;

// Side length of the square pixel tiles the tiled rasterizer works on.
constexpr int kTileSize = 16;

// A Gaussian after EWA projection into one camera. `radius` is the
// conservative 3-sigma pixel radius used for image-bounds culling; tile
// binning uses a wider footprint internally so truncation stays far below
// compositing precision.
struct Projected2DGaussian {
  Vec2 mean2d = Vec2::Zero();   // pixel coordinates
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;           // camera-frame z
  Vec3 color = Vec3::Zero();    // activated, clamped to [0, 1]
  double alpha = 0.0;           // activated opacity, in (0, 1)
  double radius = 0.0;          // ceil(3 * sqrt(largest eigenvalue))
  bool valid = false;           // false when culled
};

// Projects one Gaussian. Culled (valid == false) when the center is at or
// behind the near plane or the 3-sigma footprint misses the image; otherwise
// all fields are populated and cov2d carries the low-pass floor.
Projected2DGaussian project_gaussian(const SplatterPixel& pixel, const Camera& camera);

struct RenderOutput {
  Image rgb;    // H x W x 3
  Image alpha;  // H x W x 1, 1 - final transmittance
  Image depth;  // H x W x 1, alpha-weighted camera z (background adds none)
  Vec3 background = Vec3::Zero();  // color composited under the residual transmittance
};

// Forward-pass artifacts the backward pass replays: projections, the global
// depth order, per-tile Gaussian lists, and where each pixel terminated.
struct RasterContext {
  int height = 0;
  int width = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  Vec3 background = Vec3::Zero();
  std::vector<Projected2DGaussian> projected;  // per input index
  std::vector<Mat2> conic;                     // inverse cov2d, per input index
  std::vector<int> order;                      // surviving indices, ascending depth,
                                               // ties in input order
  std::vector<std::vector<int>> tile_lists;    // per tile, Gaussian indices in depth order
  Grid<int> n_composited;                      // per pixel, entries of its tile list
                                               // composited before termination
};

// Tiled front-to-back rasterizer. Gaussians are sorted by ascending center
// depth (stable in input order), composited per pixel with weights
// w_i = alpha_i * G_i * T_i until T < kTransmittanceFloor, and the residual
// transmittance takes the background color. Depth uses the same weights.
// A non-null `deform` applies per-Gaussian deltas first: position and
// log_scale add, the quaternion delta adds before activation normalizes.
// When `context` is non-null the forward artifacts are retained for
// rasterize_backward.
RenderOutput rasterize(const std::vector<SplatterPixel>& gaussians,
                       const std::vector<DeformDelta>* deform, const Camera& camera,
                       const Vec3& background, RasterContext* context = nullptr);

inline RenderOutput rasterize(const std::vector<SplatterPixel>& gaussians,
                              const Camera& camera, const Vec3& background,
                              RasterContext* context = nullptr) {
  return rasterize(gaussians, nullptr, camera, background, context);
}

// Brute-force oracle: identical math with no tiling, no footprint culling,
// no early termination, full-precision accumulation. Gaussians at or behind
// the near plane have no projection and are skipped by both renderers.
RenderOutput reference_rasterize(const std::vector<SplatterPixel>& gaussians,
                                 const std::vector<DeformDelta>* deform,
                                 const Camera& camera, const Vec3& background);

inline RenderOutput reference_rasterize(const std::vector<SplatterPixel>& gaussians,
                                        const Camera& camera, const Vec3& background) {
  return reference_rasterize(gaussians, nullptr, camera, background);
}

// Per-pixel upstream gradients. Empty images are treated as all-zero;
// non-empty ones must match the render size.
struct RenderAdjoint {
  Image d_rgb;    // H x W x 3
  Image d_alpha;  // H x W x 1
  Image d_depth;  // H x W x 1
};

// Gradients with respect to the stored (pre-activation) parameters.
struct ParamGradients {
  std::vector<Vec3> position;
  std::vector<Vec4> rotation;       // w.r.t. the unnormalized quaternion
  std::vector<Vec3> log_scale;
  std::vector<double> opacity_logit;
  std::vector<Vec3> color;

  explicit ParamGradients(std::size_t n = 0)
      : position(n, Vec3::Zero()),
        rotation(n, Vec4::Zero()),
        log_scale(n, Vec3::Zero()),
        opacity_logit(n, 0.0),
        color(n, Vec3::Zero()) {}

  void accumulate(const ParamGradients& other, double sign);
  bool all_finite() const;
};

// Reverse-mode pass over the retained forward artifacts. Replays each tile's
// pixel walks, accumulates per-tile buffers, and merges them in tile order so
// the result is bit-identical for any thread count. Culled Gaussians get
// zero gradients. `deform` must match the forward call; because the deltas
// enter by plain addition (the quaternion one before normalization), the
// returned position, log_scale, and rotation gradients double as the
// gradients for delta_position, delta_log_scale, and delta_q.
ParamGradients rasterize_backward(const std::vector<SplatterPixel>& gaussians,
                                  const std::vector<DeformDelta>* deform,
                                  const Camera& camera, const RasterContext& context,
                                  const RenderAdjoint& upstream);

inline ParamGradients rasterize_backward(const std::vector<SplatterPixel>& gaussians,
                                         const Camera& camera, const RasterContext& context,
                                         const RenderAdjoint& upstream) {
  return rasterize_backward(gaussians, nullptr, camera, context, upstream);
}

}  // namespace splat4d
