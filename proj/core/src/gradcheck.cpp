// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "splat4d/fitting.hpp"
#include "splat4d/losses.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/rng.hpp"
#include "splat4d/types.hpp"

namespace splat4d {

namespace {

// Accumulates |analytic - numeric| and the gradient magnitudes for one group.
struct GroupError {
  double max_diff = 0.0;
  double max_analytic = 0.0;
  double max_numeric = 0.0;

  void add(double analytic, double numeric) {
    max_diff = std::max(max_diff, std::abs(analytic - numeric));
    max_analytic = std::max(max_analytic, std::abs(analytic));
    max_numeric = std::max(max_numeric, std::abs(numeric));
  }

  double relative() const {
    return max_diff / std::max({max_analytic, max_numeric, 1e-8});
  }
};

double central_difference(const std::function<double(double)>& f, double x) {
  return (f(x + kGradCheckEpsilon) - f(x - kGradCheckEpsilon)) / (2.0 * kGradCheckEpsilon);
}

Image random_image(Rng& rng, int height, int width, int channels, double lo, double hi) {
  Image image(height, width, channels);
  for (double& v : image.raw()) {
    v = rng.uniform(lo, hi);
  }
  return image;
}

double weighted_sum(const Image& weights, const Image& values) {
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += weights.raw()[i] * values.raw()[i];
  }
  return sum;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_rasterizer(std::uint64_t seed) {
  Rng rng(seed);
  Camera camera;
  camera.width = 16;
  camera.height = 16;
  camera.fx = 20.0;
  camera.fy = 20.0;
  camera.cx = 8.0;
  camera.cy = 8.0;

  // Centers stay at least 4 px inside the image and opacities stay at or
  // below 0.5, so the transmittance floor is never reached and no cull
  // boundary sits within epsilon of the test point.
  const int n = 8;
  std::vector<SplatterPixel> gaussians(n);
  std::vector<DeformDelta> deltas(n);
  for (int g = 0; g < n; ++g) {
    const double u = rng.uniform(4.0, 12.0);
    const double v = rng.uniform(4.0, 12.0);
    const double z = rng.uniform(2.0, 3.5);
    gaussians[g].position =
        Vec3((u - camera.cx) / camera.fx * z, (v - camera.cy) / camera.fy * z, z);
    Vec4 q;
    do {
      q = Vec4(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
               rng.uniform(-1.0, 1.0));
    } while (q.norm() < 0.5);
    gaussians[g].rotation = q;
    gaussians[g].log_scale = Vec3(std::log(rng.uniform(0.1, 0.3)), std::log(rng.uniform(0.1, 0.3)),
                                  std::log(rng.uniform(0.1, 0.3)));
    gaussians[g].opacity_logit = rng.uniform(-2.0, 0.0);
    gaussians[g].color = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                              rng.uniform(0.1, 0.9));
    deltas[g].dx = Vec3(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                        rng.uniform(-0.02, 0.02));
    deltas[g].dlog_scale = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                                rng.uniform(-0.05, 0.05));
    deltas[g].dq = Vec4(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                        rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
  }
  const Vec3 background(0.2, 0.3, 0.4);

  RenderAdjoint adjoint;
  adjoint.d_rgb = random_image(rng, camera.height, camera.width, 3, -1.0, 1.0);
  adjoint.d_alpha = random_image(rng, camera.height, camera.width, 1, -1.0, 1.0);
  adjoint.d_depth = random_image(rng, camera.height, camera.width, 1, -1.0, 1.0);

  const auto objective = [&](const std::vector<SplatterPixel>& pixels,
                             const std::vector<DeformDelta>& d) {
    const RenderOutput out = rasterize(pixels, &d, camera, background);
    return weighted_sum(adjoint.d_rgb, out.rgb) + weighted_sum(adjoint.d_alpha, out.alpha) +
           weighted_sum(adjoint.d_depth, out.depth);
  };

  RasterContext ctx;
  rasterize(gaussians, &deltas, camera, background, &ctx);
  const ParamGradients pg = rasterize_backward(gaussians, &deltas, camera, ctx, adjoint);

  GroupError position, rotation, log_scale, opacity, color, deformation;
  std::vector<SplatterPixel> work = gaussians;
  std::vector<DeformDelta> work_deltas = deltas;
  const auto fd_base = [&](double* slot, double original) {
    return central_difference(
        [&](double x) {
          *slot = x;
          const double value = objective(work, deltas);
          *slot = original;
          return value;
        },
        original);
  };
  const auto fd_delta = [&](double* slot, double original) {
    return central_difference(
        [&](double x) {
          *slot = x;
          const double value = objective(gaussians, work_deltas);
          *slot = original;
          return value;
        },
        original);
  };

  for (int g = 0; g < n; ++g) {
    for (int d = 0; d < 3; ++d) {
      position.add(pg.position[g](d), fd_base(&work[g].position(d), gaussians[g].position(d)));
      log_scale.add(pg.log_scale[g](d),
                    fd_base(&work[g].log_scale(d), gaussians[g].log_scale(d)));
      color.add(pg.color[g](d), fd_base(&work[g].color(d), gaussians[g].color(d)));
      deformation.add(pg.position[g](d), fd_delta(&work_deltas[g].dx(d), deltas[g].dx(d)));
      deformation.add(pg.log_scale[g](d),
                      fd_delta(&work_deltas[g].dlog_scale(d), deltas[g].dlog_scale(d)));
    }
    for (int d = 0; d < 4; ++d) {
      rotation.add(pg.rotation[g](d), fd_base(&work[g].rotation(d), gaussians[g].rotation(d)));
      deformation.add(pg.rotation[g](d), fd_delta(&work_deltas[g].dq(d), deltas[g].dq(d)));
    }
    opacity.add(pg.opacity_logit[g],
                fd_base(&work[g].opacity_logit, gaussians[g].opacity_logit));
  }

  return {
      {"position", position.relative()},     {"rotation", rotation.relative()},
      {"log_scale", log_scale.relative()},   {"opacity_logit", opacity.relative()},
      {"color", color.relative()},           {"deformation", deformation.relative()},
  };
}

std::vector<GradCheckResult> gradcheck_losses(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckResult> results;

  {
    const Image gt = random_image(rng, 6, 5, 3, 0.0, 1.0);
    Image pred = random_image(rng, 6, 5, 3, 0.0, 1.0);
    const ImageLoss loss = render_loss(pred, gt);
    GroupError err;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double original = pred.raw()[i];
      const double numeric = central_difference(
          [&](double x) {
            pred.raw()[i] = x;
            const double value = render_loss(pred, gt).value;
            pred.raw()[i] = original;
            return value;
          },
          original);
      err.add(loss.grad.raw()[i], numeric);
    }
    results.push_back({"render_loss", err.relative()});
  }

  {
    const Image gt = random_image(rng, 6, 5, 1, 0.5, 3.0);
    Image pred = random_image(rng, 6, 5, 1, 0.5, 3.0);
    Mask valid(6, 5, 1, 1);
    valid.at(1, 2) = 0;
    valid.at(4, 0) = 0;
    valid.at(3, 3) = 0;
    const ImageLoss loss = depth_loss(pred, gt, valid);
    GroupError err;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double original = pred.raw()[i];
      const double numeric = central_difference(
          [&](double x) {
            pred.raw()[i] = x;
            const double value = depth_loss(pred, gt, valid).value;
            pred.raw()[i] = original;
            return value;
          },
          original);
      err.add(loss.grad.raw()[i], numeric);
    }
    results.push_back({"depth_loss", err.relative()});
  }

  // Point sets are redrawn until every L1 component and every Gram entry is
  // far from its kink, so the central difference never straddles one.
  const int n_points = 5;
  std::vector<Vec3> gt_points(n_points);
  std::vector<Vec3> pred_points(n_points);
  std::vector<std::uint8_t> valid(n_points, 1);
  valid[3] = 0;
  for (;;) {
    for (int p = 0; p < n_points; ++p) {
      gt_points[p] = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      pred_points[p] =
          Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    }
    double margin = 1.0;
    for (int i = 0; i < n_points; ++i) {
      if (!valid[i]) {
        continue;
      }
      for (int d = 0; d < 3; ++d) {
        margin = std::min(margin, std::abs(pred_points[i](d) - gt_points[i](d)));
      }
      for (int j = 0; j < n_points; ++j) {
        if (!valid[j]) {
          continue;
        }
        margin = std::min(margin, std::abs(pred_points[i].dot(pred_points[j]) -
                                           gt_points[i].dot(gt_points[j])));
      }
    }
    if (margin > 0.05) {
      break;
    }
  }

  {
    const PointLoss loss = motion_point_loss(pred_points, gt_points, valid);
    GroupError err;
    for (int p = 0; p < n_points; ++p) {
      for (int d = 0; d < 3; ++d) {
        const double original = pred_points[p](d);
        const double numeric = central_difference(
            [&](double x) {
              pred_points[p](d) = x;
              const double value = motion_point_loss(pred_points, gt_points, valid).value;
              pred_points[p](d) = original;
              return value;
            },
            original);
        err.add(loss.grad[p](d), numeric);
      }
    }
    results.push_back({"motion_point_loss", err.relative()});
  }

  {
    const PointLoss loss = motion_distribution_loss(pred_points, gt_points, valid);
    GroupError err;
    for (int p = 0; p < n_points; ++p) {
      for (int d = 0; d < 3; ++d) {
        const double original = pred_points[p](d);
        const double numeric = central_difference(
            [&](double x) {
              pred_points[p](d) = x;
              const double value = motion_distribution_loss(pred_points, gt_points, valid).value;
              pred_points[p](d) = original;
              return value;
            },
            original);
        err.add(loss.grad[p](d), numeric);
      }
    }
    results.push_back({"motion_distribution_loss", err.relative()});
  }

  return results;
}

std::vector<GradCheckResult> gradcheck_head(std::uint64_t seed) {
  Rng rng(seed);
  ToyMotionHead head = make_toy_head(10, 16, seed);
  // The zero-initialized tensors would give vanishing gradients upstream of
  // them; randomize everything so every path carries signal.
  for (double& w : head.b1) {
    w = rng.uniform(-0.1, 0.1);
  }
  for (double& w : head.w2) {
    w = rng.uniform(-0.3, 0.3);
  }
  for (double& w : head.b2) {
    w = rng.uniform(-0.1, 0.1);
  }
  for (double& w : head.w_scale) {
    w = rng.uniform(-0.2, 0.2);
  }
  for (double& w : head.w_shift) {
    w = rng.uniform(-0.2, 0.2);
  }
  for (double& w : head.b_scale) {
    w = 1.0 + rng.uniform(-0.2, 0.2);
  }
  for (double& w : head.b_shift) {
    w = rng.uniform(-0.2, 0.2);
  }

  const int n = 6;
  const double t_q = 0.375;
  std::vector<double> features(static_cast<std::size_t>(n) * head.input_dim);
  for (double& f : features) {
    f = rng.uniform(-1.0, 1.0);
  }
  std::vector<double> d_out(static_cast<std::size_t>(n) * head.output_dim);
  for (double& d : d_out) {
    d = rng.uniform(-1.0, 1.0);
  }

  const auto objective = [&](const ToyMotionHead& h) {
    const std::vector<double> out = toy_head_forward(h, features, n, t_q);
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      sum += d_out[i] * out[i];
    }
    return sum;
  };

  HeadCache cache;
  toy_head_forward(head, features, n, t_q, &cache);
  const std::vector<double> analytic = toy_head_backward(head, cache, d_out);

  std::vector<double> flat = head_parameters(head);
  ToyMotionHead work = head;
  const std::vector<std::pair<const char*, std::size_t>> groups = {
      {"w1", head.w1.size()},           {"b1", head.b1.size()},
      {"w_scale", head.w_scale.size()}, {"b_scale", head.b_scale.size()},
      {"w_shift", head.w_shift.size()}, {"b_shift", head.b_shift.size()},
      {"w2", head.w2.size()},           {"b2", head.b2.size()},
  };

  std::vector<GradCheckResult> results;
  std::size_t offset = 0;
  for (const auto& [name, size] : groups) {
    GroupError err;
    for (std::size_t i = offset; i < offset + size; ++i) {
      const double original = flat[i];
      const double numeric = central_difference(
          [&](double x) {
            flat[i] = x;
            set_head_parameters(work, flat);
            const double value = objective(work);
            flat[i] = original;
            return value;
          },
          original);
      err.add(analytic[i], numeric);
    }
    set_head_parameters(work, flat);
    results.push_back({name, err.relative()});
    offset += size;
  }
  return results;
}

}  // namespace splat4d
