// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/types.hpp"

#include <algorithm>
#include <cmath>

#include "splat4d/errors.hpp"

namespace splat4d {

namespace {

constexpr double kQuaternionNormFloor = 1e-8;
constexpr double kOrthonormalTolerance = 1e-6;

}  // namespace

ActivatedAttributes activate(const SplatterPixel& pixel) {
  const double norm = pixel.rotation.norm();
  if (norm < kQuaternionNormFloor) {
    throw DegenerateQuaternion("activate: quaternion norm " + std::to_string(norm) +
                               " below 1e-8");
  }
  ActivatedAttributes out;
  out.rotation = pixel.rotation / norm;
  out.scale = pixel.log_scale.array().exp();
  // The cap keeps opacity strictly below 1 even where the sigmoid rounds to
  // 1.0, so the compositing recurrence T *= (1 - alpha * G) never collapses.
  out.opacity = std::min(sigmoid(pixel.opacity_logit), 1.0 - 1e-12);
  out.color = pixel.color.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

std::vector<std::string> validate_scene(const SceneBundle& bundle) {
  std::vector<std::string> findings;
  const int n = bundle.n_frames();
  const int h = bundle.height();
  const int w = bundle.width();

  if (static_cast<int>(bundle.cameras.size()) != n) {
    findings.push_back("cameras: count mismatch");
  }

  for (int i = 0; i < n; ++i) {
    const Image& frame = bundle.frames[i];
    if (frame.height() != h || frame.width() != w || frame.channels() != 3) {
      findings.push_back("frame " + std::to_string(i) + ": size mismatch");
      continue;
    }
    for (double v : frame.raw()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        findings.push_back("frame " + std::to_string(i) + ": values outside [0,1]");
        break;
      }
    }
  }

  const int n_cams = static_cast<int>(bundle.cameras.size());
  for (int i = 0; i < n_cams; ++i) {
    const Camera& cam = bundle.cameras[i];
    const Mat3 gram = cam.rotation.transpose() * cam.rotation;
    const double ortho_err = (gram - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > kOrthonormalTolerance) {
      findings.push_back("camera " + std::to_string(i) + ": rotation not orthonormal");
    } else if (cam.rotation.determinant() < 0.0) {
      findings.push_back("camera " + std::to_string(i) + ": improper rotation");
    }
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) {
      findings.push_back("camera " + std::to_string(i) + ": non-positive focal length");
    }
    if (!(cam.timestamp >= 0.0 && cam.timestamp <= 1.0)) {
      findings.push_back("camera " + std::to_string(i) + ": timestamp outside [0,1]");
    }
    if (cam.width != w || cam.height != h) {
      findings.push_back("camera " + std::to_string(i) + ": size mismatch");
    }
    if (i > 0 && !(cam.timestamp > bundle.cameras[i - 1].timestamp)) {
      findings.push_back("timestamps not strictly increasing at index " + std::to_string(i));
    }
  }

  if (!bundle.depths.empty()) {
    if (static_cast<int>(bundle.depths.size()) != n) {
      findings.push_back("depths: count mismatch");
    }
    for (std::size_t i = 0; i < bundle.depths.size(); ++i) {
      const Image& d = bundle.depths[i];
      if (d.height() != h || d.width() != w || d.channels() != 1) {
        findings.push_back("depth " + std::to_string(i) + ": size mismatch");
      }
    }
  }

  if (!bundle.masks.empty()) {
    if (static_cast<int>(bundle.masks.size()) != n) {
      findings.push_back("masks: count mismatch");
    }
    for (std::size_t i = 0; i < bundle.masks.size(); ++i) {
      const Mask& m = bundle.masks[i];
      if (m.height() != h || m.width() != w || m.channels() != 1) {
        findings.push_back("mask " + std::to_string(i) + ": size mismatch");
      }
    }
  }

  if (!bundle.tracks.empty()) {
    const TrackSet& t = bundle.tracks;
    if (t.n_frames != n) {
      findings.push_back("tracks: frame count mismatch");
    }
    const std::size_t expect = static_cast<std::size_t>(t.n_points) * t.n_frames;
    if (t.points.size() != expect * 3 || t.visibility.size() != expect) {
      findings.push_back("tracks: array size mismatch");
    }
  }

  return findings;
}

}  // namespace splat4d
