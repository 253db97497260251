// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "splat4d/fitting.hpp"
#include "splat4d/grid.hpp"
#include "splat4d/motion.hpp"
#include "splat4d/synth.hpp"
#include "splat4d/types.hpp"

// File formats and persistence. Every write goes to a temporary file that is
// renamed into place, so a crashed run never leaves a truncated artifact, and
// every format round-trips: images to the byte, floats to float32 exactness.

namespace splat4d {

// Whole-file helpers. read_file throws MissingFile when the path does not
// exist and IoError on other failures.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

// Binary 8-bit PPM (P6). Values are clamped to [0, 1] and quantized with
// round(v * 255); reading maps bytes back to k / 255.
void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);

// Grayscale little-endian PFM (scale -1.0), rows stored bottom-up. Reading a
// big-endian file (positive scale) is a ParseError naming the endianness.
void write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

// 8-bit PNG, 1 or 3 channels, values clamped to [0, 1].
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Track text format: "splat4d-tracks/1", "P N", then P*N lines "x y z v"
// printed with enough digits that float32 values survive the round trip.
void write_tracks(const std::string& path, const TrackSet& tracks);
TrackSet read_tracks(const std::string& path);

// Mask stack: "splat4d-masks/1", "N H W", then N*H*W raw 0/1 bytes.
void write_masks(const std::string& path, const std::vector<Mask>& masks);
std::vector<Mask> read_masks(const std::string& path);

// Scene directory with a "scene.json" manifest (version splat4d-scene/1)
// referencing per-frame images, optional depths, optional tracks and masks.
void write_scene(const SceneBundle& bundle, const std::string& dir);
SceneBundle read_scene(const std::string& dir);

// A fitted scene: quantized splatter pixels, the deformation field, and
// everything needed to re-render without the original capture. Cameras and
// pixel associations ride along so rendering, evaluation, flow, and
// segmentation can run from the model file alone.
struct FittedModel {
  std::vector<SplatterPixel> pixels;
  DeformationField field;
  double normalization_scale = 1.0;
  std::vector<PixelAssociation> associations;
  std::vector<Camera> cameras;
  int height = 0;
  int width = 0;

  int n_gaussians() const { return static_cast<int>(pixels.size()); }
};

// "splat4d-fit/1": magic line, one-line JSON header, then flat little-endian
// float32 arrays (positions, rotations, log_scales, opacity_logits, colors,
// deformation deltas) followed by int32 (frame, x, y) associations when
// present. Parameters quantize to float32 on write; a read-back model writes
// byte-identically.
void write_model(const FittedModel& model, const std::string& path);
FittedModel read_model(const std::string& path);

// Binary little-endian PLY with one vertex element whose float properties
// are x, y, z, opacity, scale_0..2, rot_0..3, f_dc_0..2. Attributes are the
// deformed pre-activation values at time t_q; colors are encoded as
// (c - 0.5) / 0.28209479177387814 per the common splat convention.
void export_ply(const FittedModel& model, double t_q, const std::string& path);

struct PlyContents {
  std::vector<std::string> properties;
  int n_vertices = 0;
  std::vector<float> values;  // n_vertices x properties.size(), row-major

  double value(int vertex, const std::string& property) const;
  std::vector<Vec3> positions() const;
};
PlyContents read_ply(const std::string& path);

// JSON configuration readers. Both accept partial documents: absent fields
// keep their defaults. A scene spec may name a "preset" (static | dynamic)
// as the starting point.
SceneSpec read_scene_spec(const std::string& path);
FitConfig read_fit_config(const std::string& path);

// Standalone camera JSON: rotation (9, row-major), translation (3), fx, fy,
// cx, cy, timestamp, optional width/height falling back to the defaults.
Camera read_camera_file(const std::string& path, int default_width, int default_height);

// Writes `path` as human-readable key=value lines and `path`.json as the
// machine-readable mirror, preserving entry order.
void write_report(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& values);

}  // namespace splat4d
