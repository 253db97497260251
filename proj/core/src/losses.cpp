// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/losses.hpp"

#include <algorithm>
#include <cmath>

#include "splat4d/errors.hpp"

namespace splat4d {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_same_shape(const Image& a, const Image& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(where) + ": prediction and target shapes differ");
  }
}

}  // namespace

ImageLoss depth_loss(const Image& pred, const Image& gt, const Mask& valid) {
  require_same_shape(pred, gt, "depth_loss");
  if (valid.height() != pred.height() || valid.width() != pred.width()) {
    throw ShapeMismatch("depth_loss: mask shape differs from prediction");
  }
  const int h = pred.height();
  const int w = pred.width();

  std::size_t n_valid = 0;
  double mse = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid.at(y, x)) {
        continue;
      }
      const double e = pred.at(y, x) - gt.at(y, x);
      mse += e * e;
      ++n_valid;
    }
  }
  if (n_valid == 0) {
    throw NoValidPixels("depth_loss: validity mask is all false");
  }
  mse /= static_cast<double>(n_valid);

  // Forward differences toward +x and +y; a pair counts when both endpoints
  // are valid.
  std::size_t n_pairs = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid.at(y, x)) {
        continue;
      }
      if (x + 1 < w && valid.at(y, x + 1)) {
        ++n_pairs;
      }
      if (y + 1 < h && valid.at(y + 1, x)) {
        ++n_pairs;
      }
    }
  }

  ImageLoss out;
  out.grad = Image(h, w, 1);
  double grad_term = 0.0;
  const double inv_v = 1.0 / static_cast<double>(n_valid);
  const double inv_e = n_pairs > 0 ? 1.0 / static_cast<double>(n_pairs) : 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid.at(y, x)) {
        continue;
      }
      out.grad.at(y, x) += 2.0 * (pred.at(y, x) - gt.at(y, x)) * inv_v;
      const auto add_pair = [&](int yb, int xb) {
        const double e = (pred.at(yb, xb) - pred.at(y, x)) - (gt.at(yb, xb) - gt.at(y, x));
        grad_term += e * e * inv_e;
        out.grad.at(yb, xb) += 2.0 * e * inv_e;
        out.grad.at(y, x) -= 2.0 * e * inv_e;
      };
      if (x + 1 < w && valid.at(y, x + 1)) {
        add_pair(y, x + 1);
      }
      if (y + 1 < h && valid.at(y + 1, x)) {
        add_pair(y + 1, x);
      }
    }
  }
  out.value = mse + grad_term;
  return out;
}

ImageLoss render_loss(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "render_loss");
  ImageLoss out;
  out.grad = Image(pred.height(), pred.width(), pred.channels());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.raw()[i] - gt.raw()[i];
    sum += e * e;
    out.grad.raw()[i] = 2.0 * e * inv_n;
  }
  out.value = sum * inv_n;
  return out;
}

PointLoss motion_point_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                            const std::vector<std::uint8_t>& valid) {
  if (pred.size() != gt.size() || pred.size() != valid.size()) {
    throw ShapeMismatch("motion_point_loss: array sizes differ");
  }
  std::size_t n_valid = 0;
  for (std::uint8_t v : valid) {
    n_valid += v ? 1 : 0;
  }
  if (n_valid == 0) {
    throw NoValidPoints("motion_point_loss: validity mask is all false");
  }
  PointLoss out;
  out.grad.assign(pred.size(), Vec3::Zero());
  const double inv_p = 1.0 / static_cast<double>(n_valid);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid[i]) {
      continue;
    }
    const Vec3 e = pred[i] - gt[i];
    out.value += e.cwiseAbs().sum() * inv_p;
    out.grad[i] = Vec3(sign(e.x()), sign(e.y()), sign(e.z())) * inv_p;
  }
  return out;
}

PointLoss motion_distribution_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                   const std::vector<std::uint8_t>& valid) {
  if (pred.size() != gt.size() || pred.size() != valid.size()) {
    throw ShapeMismatch("motion_distribution_loss: array sizes differ");
  }
  std::vector<int> idx;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) {
      idx.push_back(static_cast<int>(i));
    }
  }
  if (idx.empty()) {
    throw NoValidPoints("motion_distribution_loss: validity mask is all false");
  }
  PointLoss out;
  out.grad.assign(pred.size(), Vec3::Zero());
  const double inv_p2 = 1.0 / (static_cast<double>(idx.size()) * static_cast<double>(idx.size()));
  // Ordered pairs including the diagonal; grad_k picks up pairs (k, j) and
  // (j, k), which collapses to 2 s_kj pred_j per unordered combination.
  for (int a : idx) {
    for (int b : idx) {
      const double diff = pred[a].dot(pred[b]) - gt[a].dot(gt[b]);
      out.value += std::abs(diff) * inv_p2;
      const double s = sign(diff) * inv_p2;
      out.grad[a] += s * pred[b];
      out.grad[b] += s * pred[a];
    }
  }
  return out;
}

LossReport total_loss(const LossWeights& weights, double depth, double render, double point,
                      double distribution) {
  LossReport report;
  report.depth = depth;
  report.render = render;
  report.motion_point = point;
  report.motion_distribution = distribution;
  report.total = weights.depth * depth + weights.render * render +
                 weights.motion * (weights.point * point + weights.distribution * distribution);
  return report;
}

double smoothed_head(const std::vector<double>& history, int window) {
  const std::size_t n = std::min<std::size_t>(history.size(), std::max(window, 1));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += history[i];
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double smoothed_tail(const std::vector<double>& history, int window) {
  const std::size_t n = std::min<std::size_t>(history.size(), std::max(window, 1));
  double sum = 0.0;
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    sum += history[i];
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace splat4d
