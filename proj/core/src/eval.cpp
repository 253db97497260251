// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "splat4d/errors.hpp"

namespace splat4d {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

}  // namespace

double psnr(const Image& pred, const Image& gt, const Mask* mask) {
  if (!pred.same_shape(gt)) {
    throw ShapeMismatch("psnr: image shapes differ");
  }
  if (mask && (mask->height() != pred.height() || mask->width() != pred.width())) {
    throw ShapeMismatch("psnr: mask size does not match the images");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (mask && mask->at(y, x) == 0) {
        continue;
      }
      for (int c = 0; c < pred.channels(); ++c) {
        const double d = pred.at(y, x, c) - gt.at(y, x, c);
        sum += d * d;
        ++count;
      }
    }
  }
  if (count == 0) {
    throw NoValidPixels("psnr: mask excludes every pixel");
  }
  const double mse = sum / static_cast<double>(count);
  if (mse < 1e-10) {
    return 100.0;
  }
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) {
    throw ShapeMismatch("ssim: image shapes differ");
  }
  const int h = pred.height();
  const int w = pred.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeMismatch("ssim: image smaller than the 11x11 window");
  }

  double weight[kSsimWindow];
  double wsum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    weight[i] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
    wsum += weight[i];
  }
  for (double& v : weight) {
    v /= wsum;
  }

  double total = 0.0;
  std::size_t windows = 0;
  for (int c = 0; c < pred.channels(); ++c) {
    for (int y = 0; y + kSsimWindow <= h; ++y) {
      for (int x = 0; x + kSsimWindow <= w; ++x) {
        double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
        for (int j = 0; j < kSsimWindow; ++j) {
          for (int i = 0; i < kSsimWindow; ++i) {
            const double wgt = weight[j] * weight[i];
            const double a = pred.at(y + j, x + i, c);
            const double b = gt.at(y + j, x + i, c);
            mx += wgt * a;
            my += wgt * b;
            mxx += wgt * a * a;
            myy += wgt * b * b;
            mxy += wgt * a * b;
          }
        }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cov = mxy - mx * my;
        const double num = (2.0 * mx * my + kSsimC1) * (2.0 * cov + kSsimC2);
        const double den = (mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2);
        total += num / den;
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

NormalizedPoints normalize_by_median(const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw OutOfRange("normalize_by_median: need at least one point");
  }
  std::vector<double> norms(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    norms[i] = points[i].norm();
  }
  std::sort(norms.begin(), norms.end());
  const std::size_t k = norms.size();
  const double median =
      (k % 2 == 1) ? norms[k / 2] : 0.5 * (norms[k / 2 - 1] + norms[k / 2]);
  if (median == 0.0) {
    throw AllZeroNorms("normalize_by_median: median norm is zero");
  }
  NormalizedPoints out;
  out.scale = median;
  out.points.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.points[i] = points[i] / median;
  }
  return out;
}

TrackingMetrics tracking_metrics(const TrackSet& pred, const TrackSet& gt,
                                 const std::vector<std::uint8_t>& valid) {
  if (pred.n_points != gt.n_points || pred.n_frames != gt.n_frames) {
    throw ShapeMismatch("tracking_metrics: track set shapes differ");
  }
  if (valid.size() != static_cast<std::size_t>(pred.n_points) * pred.n_frames) {
    throw ShapeMismatch("tracking_metrics: validity mask size mismatch");
  }
  double sum = 0.0;
  std::size_t hits_005 = 0;
  std::size_t hits_010 = 0;
  std::size_t count = 0;
  for (int p = 0; p < pred.n_points; ++p) {
    for (int n = 0; n < pred.n_frames; ++n) {
      if (valid[static_cast<std::size_t>(p) * pred.n_frames + n] == 0) {
        continue;
      }
      const double err = (pred.point(p, n) - gt.point(p, n)).norm();
      sum += err;
      hits_005 += err < 0.05 ? 1 : 0;
      hits_010 += err < 0.10 ? 1 : 0;
      ++count;
    }
  }
  if (count == 0) {
    throw NoValidEntries("tracking_metrics: validity mask is all false");
  }
  TrackingMetrics out;
  out.epe3d = sum / static_cast<double>(count);
  out.delta_005 = static_cast<double>(hits_005) / static_cast<double>(count);
  out.delta_010 = static_cast<double>(hits_010) / static_cast<double>(count);
  return out;
}

FlowMap scene_flow(const MotionSlice& motion, const UnprojectedDepth& points,
                   const Camera& camera_i, const Camera& camera_q) {
  const int h = points.points.height();
  const int w = points.points.width();
  if (motion.displacement.height() != h || motion.displacement.width() != w) {
    throw ShapeMismatch("scene_flow: motion slice size does not match the points");
  }
  FlowMap out{Image(h, w, 2), Mask(h, w, 1, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (points.valid.at(y, x) == 0 || motion.valid.at(y, x) == 0) {
        continue;
      }
      const Vec3 p(points.points.at(y, x, 0), points.points.at(y, x, 1),
                   points.points.at(y, x, 2));
      const Vec3 moved(p.x() + motion.displacement.at(y, x, 0),
                       p.y() + motion.displacement.at(y, x, 1),
                       p.z() + motion.displacement.at(y, x, 2));
      const Vec3 cam_i = camera_i.rotation * p + camera_i.translation;
      const Vec3 cam_q = camera_q.rotation * moved + camera_q.translation;
      if (cam_i.z() <= kNearPlane || cam_q.z() <= kNearPlane) {
        continue;
      }
      const double u0 = camera_i.fx * cam_i.x() / cam_i.z() + camera_i.cx;
      const double v0 = camera_i.fy * cam_i.y() / cam_i.z() + camera_i.cy;
      const double u1 = camera_q.fx * cam_q.x() / cam_q.z() + camera_q.cx;
      const double v1 = camera_q.fy * cam_q.y() / cam_q.z() + camera_q.cy;
      out.flow.at(y, x, 0) = u1 - u0;
      out.flow.at(y, x, 1) = v1 - v0;
      out.valid.at(y, x) = 1;
    }
  }
  return out;
}

Mask segment_moving(const MotionSlice& motion, double threshold) {
  if (threshold <= 0.0) {
    throw OutOfRange("segment_moving: threshold must be positive");
  }
  const int h = motion.displacement.height();
  const int w = motion.displacement.width();
  Mask out(h, w, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 d(motion.displacement.at(y, x, 0), motion.displacement.at(y, x, 1),
                   motion.displacement.at(y, x, 2));
      out.at(y, x) = d.norm() > threshold ? 1 : 0;
    }
  }
  return out;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch("mask_iou: mask shapes differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool va = a.raw()[i] != 0;
    const bool vb = b.raw()[i] != 0;
    inter += (va && vb) ? 1 : 0;
    uni += (va || vb) ? 1 : 0;
  }
  if (uni == 0) {
    return 1.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace splat4d
