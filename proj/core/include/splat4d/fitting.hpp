// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "splat4d/losses.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/rng.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

struct FitConfig {
  int iterations = 2000;
  double lr_position = 1.6e-4;
  double lr_rotation = 1e-3;
  double lr_log_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_deformation = 1.6e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossWeights weights;
  std::uint64_t seed = 0;
  // Pixel stride for splatter-pixel construction; 1 keeps every valid pixel.
  int subsample = 1;
  Vec3 background = Vec3::Zero();
  // Checkpoint callback cadence in iterations; 0 disables checkpoints.
  int checkpoint_interval = 0;
};

// Throws OutOfRange when a field violates its documented domain.
void validate_config(const FitConfig& config);

// Splatter pixels lifted from the depth maps of every frame, an all-zero
// deformation field keyed to the frame timestamps, and the (frame, pixel)
// each gaussian came from.
struct InitResult {
  std::vector<SplatterPixel> pixels;
  DeformationField field;
  std::vector<PixelAssociation> associations;
};

// One splatter pixel per sampled valid depth pixel of every frame: position
// from unprojection, color from the frame, opacity logit(0.1), isotropic
// log-scale log(stride * z / (2 f)) matching half the sample spacing,
// identity rotation. Throws NoValidPixels when no pixel survives.
InitResult init_from_depth(const SceneBundle& bundle, int stride = 1);

// Flat first/second moment accumulators plus the shared step counter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update in place. `group` names the parameters in the
// NonFiniteGradient message when a gradient entry is NaN or Inf; the check
// runs before any parameter is touched, so a failed step changes nothing.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1, double beta2, double epsilon, const std::string& group);

struct FitResult {
  std::vector<SplatterPixel> pixels;
  DeformationField field;
  std::vector<PixelAssociation> associations;
  std::vector<LossReport> history;  // one entry per iteration
};

using CheckpointFn = std::function<void(int iteration, const FitResult& snapshot)>;

// Optimizes all splatter-pixel parameters and the deformation field against
// the weighted objective. Each iteration samples one (render frame, query
// frame) pair uniformly, renders the deformed scene at the query timestamp,
// and supervises color, depth, and track motion. The delta a gaussian's own
// keyframe stores is pinned to zero, so all motion is expressed relative to
// the frame that spawned the pixel. Iterations whose gradients are not
// finite are skipped; after 10 consecutive skips the fit aborts with
// NonFiniteGradient. The bundle is expected to be normalized to desk scale.
FitResult fit_scene(const SceneBundle& bundle, const FitConfig& config,
                    const CheckpointFn& checkpoint = nullptr);

// Two dense layers around an adaptive layer norm whose per-feature scale and
// shift are affine in the sinusoidal encoding of the query time. The final
// layer starts at zero so predicted motion starts at zero. Inputs are
// per-pixel features (Plucker ray 6 + color 3 + depth 1), outputs are
// kDeltaDim parameter deltas.
struct ToyMotionHead {
  int input_dim = 10;
  int hidden_dim = 32;
  int output_dim = kDeltaDim;
  int time_levels = 8;

  // Dense weights are row-major [out][in].
  std::vector<double> w1, b1;
  std::vector<double> w2, b2;
  // Affine maps from the 2*time_levels encoding to per-feature scale/shift.
  // Zero weights with bias 1 / 0 make the block a plain layer norm.
  std::vector<double> w_scale, b_scale;
  std::vector<double> w_shift, b_shift;

  int encoding_dim() const { return 2 * time_levels; }
};

// Small random first layer, zero final layer, identity conditioning.
ToyMotionHead make_toy_head(int input_dim, int hidden_dim, std::uint64_t seed);

// Flat parameter vector in a fixed order (w1, b1, w_scale, b_scale, w_shift,
// b_shift, w2, b2) and its inverse; gradients from toy_head_backward use the
// same layout.
std::vector<double> head_parameters(const ToyMotionHead& head);
void set_head_parameters(ToyMotionHead& head, const std::vector<double>& flat);

// Intermediate activations captured by the forward pass for reuse in the
// backward pass.
struct HeadCache {
  int n = 0;
  double t_query = 0.0;
  std::vector<double> input;      // n x input_dim
  std::vector<double> pre_norm;   // n x hidden, first dense output
  std::vector<double> normed;     // n x hidden, zero-mean unit-variance rows
  std::vector<double> activated;  // n x hidden, tanh output
  std::vector<double> inv_sigma;  // n, 1 / sqrt(var + eps)
  std::vector<double> scale;      // hidden
  std::vector<double> shift;      // hidden
  std::vector<double> encoding;   // 2 * time_levels
};

// Runs the head on n feature rows at query time t_q. Returns n x output_dim
// outputs; fills `cache` when given.
std::vector<double> toy_head_forward(const ToyMotionHead& head, const std::vector<double>& features,
                                     int n, double t_q, HeadCache* cache = nullptr);

// Gradient of a scalar loss with upstream d_out (n x output_dim) with
// respect to every head parameter, in head_parameters layout.
std::vector<double> toy_head_backward(const ToyMotionHead& head, const HeadCache& cache,
                                      const std::vector<double>& d_out);

struct HeadFitConfig {
  int iterations = 400;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossWeights weights;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
};

struct HeadFitReport {
  std::vector<double> history;  // training loss per iteration
  double holdout_epe3d = 0.0;   // mean 3D error on the held-out track split
  int n_train = 0;
  int n_holdout = 0;
};

// Trains the head to regress track displacements away from the first frame:
// the feature of track p comes from its frame-0 pixel, the target at query
// frame q is point(p, q) - point(p, 0). Tracks split train/held-out by the
// seeded rng. Only the displacement rows of the output are supervised.
// Throws NoValidEntries when no track is usable.
HeadFitReport fit_head(const SceneBundle& bundle, ToyMotionHead& head, const HeadFitConfig& config);

}  // namespace splat4d
