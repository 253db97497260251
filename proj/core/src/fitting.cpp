// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "splat4d/errors.hpp"
#include "splat4d/geometry.hpp"
#include "splat4d/rasterizer.hpp"

namespace splat4d {

namespace {

constexpr double kLayerNormEpsilon = 1e-5;
constexpr int kMaxConsecutiveSkips = 10;
constexpr double kInitialOpacity = 0.1;

bool all_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

Image scaled(const Image& image, double factor) {
  Image out = image;
  for (double& v : out.raw()) {
    v *= factor;
  }
  return out;
}

// The head's parameter vectors in their flat serialization order.
template <class Head>
auto head_vectors(Head& head) {
  return std::array{&head.w1, &head.b1, &head.w_scale, &head.b_scale,
                    &head.w_shift, &head.b_shift, &head.w2, &head.b2};
}

Vec3 delta_position(const DeformationField& field, const DeformationField::Segment& seg, int g) {
  const std::size_t o0 = field.offset(seg.k0, g);
  const Vec3 a(field.deltas[o0], field.deltas[o0 + 1], field.deltas[o0 + 2]);
  if (seg.w == 0.0) {
    return a;
  }
  const std::size_t o1 = field.offset(seg.k1, g);
  const Vec3 b(field.deltas[o1], field.deltas[o1 + 1], field.deltas[o1 + 2]);
  return (1.0 - seg.w) * a + seg.w * b;
}

}  // namespace

void validate_config(const FitConfig& config) {
  if (config.iterations <= 0) {
    throw OutOfRange("fit config: iterations must be positive");
  }
  const std::array<std::pair<const char*, double>, 6> rates = {{
      {"lr_position", config.lr_position},
      {"lr_rotation", config.lr_rotation},
      {"lr_log_scale", config.lr_log_scale},
      {"lr_opacity", config.lr_opacity},
      {"lr_color", config.lr_color},
      {"lr_deformation", config.lr_deformation},
  }};
  for (const auto& [name, value] : rates) {
    if (!(value > 0.0)) {
      throw OutOfRange(std::string("fit config: ") + name + " must be positive");
    }
  }
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw OutOfRange("fit config: adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) {
    throw OutOfRange("fit config: epsilon must be positive");
  }
  if (config.subsample <= 0) {
    throw OutOfRange("fit config: subsample stride must be positive");
  }
  if (config.checkpoint_interval < 0) {
    throw OutOfRange("fit config: checkpoint_interval must be non-negative");
  }
}

InitResult init_from_depth(const SceneBundle& bundle, int stride) {
  if (stride <= 0) {
    throw OutOfRange("init_from_depth: stride must be positive");
  }
  if (!bundle.has_depths()) {
    throw NoValidPixels("init_from_depth: bundle has no depth maps");
  }
  if (bundle.frames.size() != bundle.cameras.size() ||
      bundle.depths.size() != bundle.frames.size()) {
    throw ShapeMismatch("init_from_depth: frames, cameras, and depths must align");
  }

  InitResult out;
  for (int f = 0; f < bundle.n_frames(); ++f) {
    const Camera& camera = bundle.cameras[f];
    const Image& depth = bundle.depths[f];
    const Image& frame = bundle.frames[f];
    const UnprojectedDepth lifted = unproject_depth(depth, camera);
    const double focal = 0.5 * (camera.fx + camera.fy);
    for (int y = 0; y < depth.height(); y += stride) {
      for (int x = 0; x < depth.width(); x += stride) {
        if (!lifted.valid.at(y, x)) {
          continue;
        }
        SplatterPixel pixel;
        pixel.position = Vec3(lifted.points.at(y, x, 0), lifted.points.at(y, x, 1),
                              lifted.points.at(y, x, 2));
        pixel.color = Vec3(frame.at(y, x, 0), frame.at(y, x, 1), frame.at(y, x, 2));
        pixel.opacity_logit = logit(kInitialOpacity);
        // Neighboring samples are stride pixels apart, which spans about
        // stride * z / f in world units at depth z; the radius is half that.
        pixel.log_scale = Vec3::Constant(std::log(0.5 * stride * depth.at(y, x) / focal));
        out.pixels.push_back(pixel);
        out.associations.push_back({f, x, y});
      }
    }
  }
  if (out.pixels.empty()) {
    throw NoValidPixels("init_from_depth: no valid depth pixel to lift");
  }

  std::vector<double> times;
  times.reserve(bundle.cameras.size());
  for (const Camera& camera : bundle.cameras) {
    times.push_back(camera.timestamp);
  }
  out.field = DeformationField::zeros(times, static_cast<int>(out.pixels.size()));
  return out;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1, double beta2, double epsilon, const std::string& group) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ShapeMismatch("adam_step: parameter, gradient, and state sizes disagree for group " +
                        group);
  }
  if (!all_finite(grads)) {
    throw NonFiniteGradient("adam_step: non-finite gradient in group " + group);
  }
  state.step += 1;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

FitResult fit_scene(const SceneBundle& bundle, const FitConfig& config,
                    const CheckpointFn& checkpoint) {
  validate_config(config);
  InitResult init = init_from_depth(bundle, config.subsample);
  const int n_frames = bundle.n_frames();
  const int n_gaussians = static_cast<int>(init.pixels.size());
  const int height = bundle.height();
  const int width = bundle.width();

  // Optimizer state lives in flat per-group arrays; the splatter pixels are
  // re-assembled from them every iteration.
  std::vector<double> position(static_cast<std::size_t>(n_gaussians) * 3);
  std::vector<double> rotation(static_cast<std::size_t>(n_gaussians) * 4);
  std::vector<double> log_scale(static_cast<std::size_t>(n_gaussians) * 3);
  std::vector<double> opacity(n_gaussians);
  std::vector<double> color(static_cast<std::size_t>(n_gaussians) * 3);
  for (int g = 0; g < n_gaussians; ++g) {
    const SplatterPixel& p = init.pixels[g];
    for (int d = 0; d < 3; ++d) {
      position[g * 3 + d] = p.position(d);
      log_scale[g * 3 + d] = p.log_scale(d);
      color[g * 3 + d] = p.color(d);
    }
    for (int d = 0; d < 4; ++d) {
      rotation[g * 4 + d] = p.rotation(d);
    }
    opacity[g] = p.opacity_logit;
  }
  DeformationField field = std::move(init.field);

  AdamState st_position(position.size());
  AdamState st_rotation(rotation.size());
  AdamState st_log_scale(log_scale.size());
  AdamState st_opacity(opacity.size());
  AdamState st_color(color.size());
  AdamState st_deform(field.deltas.size());

  // Which gaussian owns each pixel, per frame; -1 where subsampling skipped.
  std::vector<Grid<int>> owner(n_frames, Grid<int>(height, width, 1, -1));
  for (int g = 0; g < n_gaussians; ++g) {
    const PixelAssociation& a = init.associations[g];
    owner[a.frame].at(a.y, a.x) = g;
  }

  // Bind each track to the gaussians in a small window around its projection
  // in every frame. The window stands in for the compositing weights of a
  // dense motion-map render: a tracked surface point is represented by every
  // primitive spawned near its pixel, so its displacement supervision should
  // reach all of them, not just the one under the exact pixel.
  const TrackSet& tracks = bundle.tracks;
  const int n_tracks = tracks.n_points;
  std::vector<std::vector<std::vector<int>>> bound(
      n_frames, std::vector<std::vector<int>>(std::max(n_tracks, 0)));
  for (int f = 0; f < n_frames && !tracks.empty(); ++f) {
    for (int p = 0; p < n_tracks; ++p) {
      if (!tracks.visible(p, f)) {
        continue;
      }
      const Vec3 cam_point = transform_point(tracks.point(p, f), bundle.cameras[f]);
      if (cam_point.z() <= kNearPlane) {
        continue;
      }
      const Vec2 uv = project_point(cam_point, bundle.cameras[f]);
      const int px = static_cast<int>(std::floor(uv.x()));
      const int py = static_cast<int>(std::floor(uv.y()));
      if (px < 0 || px >= width || py < 0 || py >= height) {
        continue;
      }
      for (int dy = -kMotionWindow; dy <= kMotionWindow; ++dy) {
        for (int dx = -kMotionWindow; dx <= kMotionWindow; ++dx) {
          const int yy = py + dy;
          const int xx = px + dx;
          if (yy < 0 || yy >= height || xx < 0 || xx >= width) {
            continue;
          }
          const int g = owner[f].at(yy, xx);
          if (g >= 0) {
            bound[f][p].push_back(g);
          }
        }
      }
    }
  }

  Rng rng(config.seed);
  std::vector<LossReport> history;
  history.reserve(config.iterations);
  int consecutive_bad = 0;

  std::vector<SplatterPixel> pixels(n_gaussians);
  std::vector<double> g_position(position.size());
  std::vector<double> g_rotation(rotation.size());
  std::vector<double> g_log_scale(log_scale.size());
  std::vector<double> g_opacity(opacity.size());
  std::vector<double> g_color(color.size());
  std::vector<double> g_deform(field.deltas.size());
  std::vector<Vec3> pred(std::max(n_tracks, 0));
  std::vector<Vec3> gt(std::max(n_tracks, 0));
  std::vector<std::uint8_t> track_valid(std::max(n_tracks, 0));

  const auto assemble = [&](const std::vector<LossReport>& h) {
    FitResult result;
    result.pixels.resize(n_gaussians);
    for (int g = 0; g < n_gaussians; ++g) {
      SplatterPixel& p = result.pixels[g];
      p.position = Vec3(position[g * 3], position[g * 3 + 1], position[g * 3 + 2]);
      p.rotation = Vec4(rotation[g * 4], rotation[g * 4 + 1], rotation[g * 4 + 2],
                        rotation[g * 4 + 3]);
      p.log_scale = Vec3(log_scale[g * 3], log_scale[g * 3 + 1], log_scale[g * 3 + 2]);
      p.opacity_logit = opacity[g];
      p.color = Vec3(color[g * 3], color[g * 3 + 1], color[g * 3 + 2]);
    }
    result.field = field;
    result.associations = init.associations;
    result.history = h;
    return result;
  };

  for (int iter = 0; iter < config.iterations; ++iter) {
    const int frame_i = rng.uniform_int(n_frames);
    const int frame_q = rng.uniform_int(n_frames);
    const double t_i = bundle.cameras[frame_i].timestamp;
    const double t_q = bundle.cameras[frame_q].timestamp;
    const DeformationField::Segment seg_i = field.segment(t_i);
    const DeformationField::Segment seg_q = field.segment(t_q);

    for (int g = 0; g < n_gaussians; ++g) {
      SplatterPixel& p = pixels[g];
      p.position = Vec3(position[g * 3], position[g * 3 + 1], position[g * 3 + 2]);
      p.rotation = Vec4(rotation[g * 4], rotation[g * 4 + 1], rotation[g * 4 + 2],
                        rotation[g * 4 + 3]);
      p.log_scale = Vec3(log_scale[g * 3], log_scale[g * 3 + 1], log_scale[g * 3 + 2]);
      p.opacity_logit = opacity[g];
      p.color = Vec3(color[g * 3], color[g * 3 + 1], color[g * 3 + 2]);
    }
    const std::vector<DeformDelta> deltas = evaluate_deformation(field, t_q);

    RasterContext ctx;
    const RenderOutput out =
        rasterize(pixels, &deltas, bundle.cameras[frame_q], config.background, &ctx);

    const ImageLoss render = render_loss(out.rgb, bundle.frames[frame_q]);

    ImageLoss depth;
    bool have_depth = false;
    if (bundle.has_depths()) {
      const Image& gt_depth = bundle.depths[frame_q];
      Mask depth_valid(height, width, 1, 0);
      int n_valid = 0;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          if (gt_depth.at(y, x) > 0.0) {
            depth_valid.at(y, x) = 1;
            ++n_valid;
          }
        }
      }
      if (n_valid > 0) {
        depth = depth_loss(out.depth, gt_depth, depth_valid);
        have_depth = true;
      }
    }

    // Track displacements i -> q predicted by the deformation field at the
    // gaussians bound to the tracks in frame i.
    PointLoss point;
    PointLoss dist;
    int n_valid_tracks = 0;
    if (!tracks.empty()) {
      for (int p = 0; p < n_tracks; ++p) {
        track_valid[p] = 0;
        pred[p] = Vec3::Zero();
        gt[p] = Vec3::Zero();
        const int g = bound[frame_i][p];
        if (g < 0 || !tracks.visible(p, frame_i) || !tracks.visible(p, frame_q)) {
          continue;
        }
        track_valid[p] = 1;
        ++n_valid_tracks;
        pred[p] = delta_position(field, seg_q, g) - delta_position(field, seg_i, g);
        gt[p] = tracks.point(p, frame_q) - tracks.point(p, frame_i);
      }
      if (n_valid_tracks > 0) {
        point = motion_point_loss(pred, gt, track_valid);
        dist = motion_distribution_loss(pred, gt, track_valid);
      }
    }

    history.push_back(
        total_loss(config.weights, depth.value, render.value, point.value, dist.value));

    RenderAdjoint adjoint;
    adjoint.d_rgb = scaled(render.grad, config.weights.render);
    if (have_depth) {
      adjoint.d_depth = scaled(depth.grad, config.weights.depth);
    }
    const ParamGradients pg =
        rasterize_backward(pixels, &deltas, bundle.cameras[frame_q], ctx, adjoint);

    for (int g = 0; g < n_gaussians; ++g) {
      for (int d = 0; d < 3; ++d) {
        g_position[g * 3 + d] = pg.position[g](d);
        g_log_scale[g * 3 + d] = pg.log_scale[g](d);
        g_color[g * 3 + d] = pg.color[g](d);
      }
      for (int d = 0; d < 4; ++d) {
        g_rotation[g * 4 + d] = pg.rotation[g](d);
      }
      g_opacity[g] = pg.opacity_logit[g];
    }

    std::fill(g_deform.begin(), g_deform.end(), 0.0);
    const auto route = [&](const DeformationField::Segment& seg, int g, int dim, double value) {
      g_deform[field.offset(seg.k0, g) + dim] += (1.0 - seg.w) * value;
      if (seg.w != 0.0) {
        g_deform[field.offset(seg.k1, g) + dim] += seg.w * value;
      }
    };
    // The deltas enter the rasterizer by plain addition, so the parameter
    // gradients pass through to the keyframe rows interpolated at t_q.
    for (int g = 0; g < n_gaussians; ++g) {
      for (int d = 0; d < 3; ++d) {
        route(seg_q, g, d, pg.position[g](d));
        route(seg_q, g, 3 + d, pg.log_scale[g](d));
      }
      for (int d = 0; d < 4; ++d) {
        route(seg_q, g, 6 + d, pg.rotation[g](d));
      }
    }
    if (n_valid_tracks > 0) {
      const double m = config.weights.motion;
      for (int p = 0; p < n_tracks; ++p) {
        if (!track_valid[p]) {
          continue;
        }
        const int g = bound[frame_i][p];
        const Vec3 gm =
            m * (config.weights.point * point.grad[p] + config.weights.distribution * dist.grad[p]);
        for (int d = 0; d < 3; ++d) {
          route(seg_q, g, d, gm(d));
          route(seg_i, g, d, -gm(d));
        }
      }
    }
    // A gaussian's delta at its own keyframe is pinned to zero: motion is
    // relative to the frame that spawned the pixel. Zero gradients keep the
    // Adam moments at zero, so the parameters never move off exact zero.
    for (int g = 0; g < n_gaussians; ++g) {
      const std::size_t base = field.offset(init.associations[g].frame, g);
      std::fill_n(g_deform.begin() + base, kDeltaDim, 0.0);
    }

    const char* bad_group = nullptr;
    if (!all_finite(g_position)) {
      bad_group = "position";
    } else if (!all_finite(g_rotation)) {
      bad_group = "rotation";
    } else if (!all_finite(g_log_scale)) {
      bad_group = "log_scale";
    } else if (!all_finite(g_opacity)) {
      bad_group = "opacity_logit";
    } else if (!all_finite(g_color)) {
      bad_group = "color";
    } else if (!all_finite(g_deform)) {
      bad_group = "deformation";
    }
    if (bad_group != nullptr) {
      ++consecutive_bad;
      if (consecutive_bad >= kMaxConsecutiveSkips) {
        throw NonFiniteGradient(std::string("fit_scene: non-finite gradient in group ") +
                                bad_group + " for " + std::to_string(kMaxConsecutiveSkips) +
                                " consecutive iterations");
      }
      continue;
    }
    consecutive_bad = 0;

    adam_step(position, g_position, st_position, config.lr_position, config.beta1, config.beta2,
              config.epsilon, "position");
    adam_step(rotation, g_rotation, st_rotation, config.lr_rotation, config.beta1, config.beta2,
              config.epsilon, "rotation");
    adam_step(log_scale, g_log_scale, st_log_scale, config.lr_log_scale, config.beta1,
              config.beta2, config.epsilon, "log_scale");
    adam_step(opacity, g_opacity, st_opacity, config.lr_opacity, config.beta1, config.beta2,
              config.epsilon, "opacity_logit");
    adam_step(color, g_color, st_color, config.lr_color, config.beta1, config.beta2,
              config.epsilon, "color");
    adam_step(field.deltas, g_deform, st_deform, config.lr_deformation, config.beta1, config.beta2,
              config.epsilon, "deformation");

    if (checkpoint && config.checkpoint_interval > 0 &&
        (iter + 1) % config.checkpoint_interval == 0) {
      checkpoint(iter + 1, assemble(history));
    }
  }

  return assemble(history);
}

ToyMotionHead make_toy_head(int input_dim, int hidden_dim, std::uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0) {
    throw OutOfRange("make_toy_head: dimensions must be positive");
  }
  ToyMotionHead head;
  head.input_dim = input_dim;
  head.hidden_dim = hidden_dim;
  const int enc = head.encoding_dim();
  head.w1.resize(static_cast<std::size_t>(hidden_dim) * input_dim);
  head.b1.assign(hidden_dim, 0.0);
  head.w2.assign(static_cast<std::size_t>(head.output_dim) * hidden_dim, 0.0);
  head.b2.assign(head.output_dim, 0.0);
  head.w_scale.assign(static_cast<std::size_t>(hidden_dim) * enc, 0.0);
  head.b_scale.assign(hidden_dim, 1.0);
  head.w_shift.assign(static_cast<std::size_t>(hidden_dim) * enc, 0.0);
  head.b_shift.assign(hidden_dim, 0.0);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / (input_dim + hidden_dim));
  for (double& w : head.w1) {
    w = rng.uniform(-bound, bound);
  }
  return head;
}

std::vector<double> head_parameters(const ToyMotionHead& head) {
  std::vector<double> flat;
  for (const std::vector<double>* v : head_vectors(head)) {
    flat.insert(flat.end(), v->begin(), v->end());
  }
  return flat;
}

void set_head_parameters(ToyMotionHead& head, const std::vector<double>& flat) {
  std::size_t offset = 0;
  for (std::vector<double>* v : head_vectors(head)) {
    if (offset + v->size() > flat.size()) {
      throw ShapeMismatch("set_head_parameters: flat vector too short");
    }
    std::copy_n(flat.begin() + offset, v->size(), v->begin());
    offset += v->size();
  }
  if (offset != flat.size()) {
    throw ShapeMismatch("set_head_parameters: flat vector has " + std::to_string(flat.size()) +
                        " entries, expected " + std::to_string(offset));
  }
}

std::vector<double> toy_head_forward(const ToyMotionHead& head, const std::vector<double>& features,
                                     int n, double t_q, HeadCache* cache) {
  const int in = head.input_dim;
  const int hid = head.hidden_dim;
  const int out_dim = head.output_dim;
  if (features.size() != static_cast<std::size_t>(n) * in) {
    throw ShapeMismatch("toy_head_forward: feature array does not hold n x input_dim doubles");
  }
  const TimeEncoding enc = encode_time(t_q, head.time_levels);
  const int e = head.encoding_dim();

  std::vector<double> scale(hid);
  std::vector<double> shift(hid);
  for (int j = 0; j < hid; ++j) {
    double s = head.b_scale[j];
    double sh = head.b_shift[j];
    for (int k = 0; k < e; ++k) {
      s += head.w_scale[static_cast<std::size_t>(j) * e + k] * enc.values[k];
      sh += head.w_shift[static_cast<std::size_t>(j) * e + k] * enc.values[k];
    }
    scale[j] = s;
    shift[j] = sh;
  }

  std::vector<double> out(static_cast<std::size_t>(n) * out_dim, 0.0);
  if (cache) {
    cache->n = n;
    cache->t_query = t_q;
    cache->input = features;
    cache->pre_norm.resize(static_cast<std::size_t>(n) * hid);
    cache->normed.resize(static_cast<std::size_t>(n) * hid);
    cache->activated.resize(static_cast<std::size_t>(n) * hid);
    cache->inv_sigma.resize(n);
    cache->scale = scale;
    cache->shift = shift;
    cache->encoding = enc.values;
  }

  std::vector<double> h1(hid);
  for (int r = 0; r < n; ++r) {
    const double* x = features.data() + static_cast<std::size_t>(r) * in;
    for (int j = 0; j < hid; ++j) {
      double acc = head.b1[j];
      const double* w = head.w1.data() + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) {
        acc += w[i] * x[i];
      }
      h1[j] = acc;
    }
    double mean = 0.0;
    for (int j = 0; j < hid; ++j) {
      mean += h1[j];
    }
    mean /= hid;
    double var = 0.0;
    for (int j = 0; j < hid; ++j) {
      const double d = h1[j] - mean;
      var += d * d;
    }
    var /= hid;
    const double inv_sigma = 1.0 / std::sqrt(var + kLayerNormEpsilon);

    double* o = out.data() + static_cast<std::size_t>(r) * out_dim;
    for (int k = 0; k < out_dim; ++k) {
      o[k] = head.b2[k];
    }
    for (int j = 0; j < hid; ++j) {
      const double x_hat = (h1[j] - mean) * inv_sigma;
      const double a = std::tanh(scale[j] * x_hat + shift[j]);
      if (cache) {
        cache->pre_norm[static_cast<std::size_t>(r) * hid + j] = h1[j];
        cache->normed[static_cast<std::size_t>(r) * hid + j] = x_hat;
        cache->activated[static_cast<std::size_t>(r) * hid + j] = a;
      }
      for (int k = 0; k < out_dim; ++k) {
        o[k] += head.w2[static_cast<std::size_t>(k) * hid + j] * a;
      }
    }
    if (cache) {
      cache->inv_sigma[r] = inv_sigma;
    }
  }
  return out;
}

std::vector<double> toy_head_backward(const ToyMotionHead& head, const HeadCache& cache,
                                      const std::vector<double>& d_out) {
  const int in = head.input_dim;
  const int hid = head.hidden_dim;
  const int out_dim = head.output_dim;
  const int e = head.encoding_dim();
  const int n = cache.n;
  if (d_out.size() != static_cast<std::size_t>(n) * out_dim) {
    throw ShapeMismatch("toy_head_backward: upstream gradient does not hold n x output_dim");
  }

  ToyMotionHead grads = head;
  for (std::vector<double>* v : head_vectors(grads)) {
    std::fill(v->begin(), v->end(), 0.0);
  }

  std::vector<double> d_scale(hid, 0.0);
  std::vector<double> d_shift(hid, 0.0);
  std::vector<double> d_act(hid);
  std::vector<double> d_x_hat(hid);
  for (int r = 0; r < n; ++r) {
    const double* go = d_out.data() + static_cast<std::size_t>(r) * out_dim;
    const double* act = cache.activated.data() + static_cast<std::size_t>(r) * hid;
    const double* x_hat = cache.normed.data() + static_cast<std::size_t>(r) * hid;
    const double* x = cache.input.data() + static_cast<std::size_t>(r) * in;

    std::fill(d_act.begin(), d_act.end(), 0.0);
    for (int k = 0; k < out_dim; ++k) {
      const double g = go[k];
      grads.b2[k] += g;
      for (int j = 0; j < hid; ++j) {
        grads.w2[static_cast<std::size_t>(k) * hid + j] += g * act[j];
        d_act[j] += head.w2[static_cast<std::size_t>(k) * hid + j] * g;
      }
    }

    double mean_dx = 0.0;
    double mean_dxx = 0.0;
    for (int j = 0; j < hid; ++j) {
      const double d_pre_act = d_act[j] * (1.0 - act[j] * act[j]);
      d_scale[j] += d_pre_act * x_hat[j];
      d_shift[j] += d_pre_act;
      d_x_hat[j] = d_pre_act * cache.scale[j];
      mean_dx += d_x_hat[j];
      mean_dxx += d_x_hat[j] * x_hat[j];
    }
    mean_dx /= hid;
    mean_dxx /= hid;
    const double inv_sigma = cache.inv_sigma[r];
    for (int j = 0; j < hid; ++j) {
      const double d_h1 = inv_sigma * (d_x_hat[j] - mean_dx - x_hat[j] * mean_dxx);
      grads.b1[j] += d_h1;
      double* w = grads.w1.data() + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) {
        w[i] += d_h1 * x[i];
      }
    }
  }

  for (int j = 0; j < hid; ++j) {
    grads.b_scale[j] = d_scale[j];
    grads.b_shift[j] = d_shift[j];
    for (int k = 0; k < e; ++k) {
      grads.w_scale[static_cast<std::size_t>(j) * e + k] = d_scale[j] * cache.encoding[k];
      grads.w_shift[static_cast<std::size_t>(j) * e + k] = d_shift[j] * cache.encoding[k];
    }
  }
  return head_parameters(grads);
}

HeadFitReport fit_head(const SceneBundle& bundle, ToyMotionHead& head,
                       const HeadFitConfig& config) {
  if (config.iterations <= 0) {
    throw OutOfRange("head fit config: iterations must be positive");
  }
  if (!(config.learning_rate > 0.0)) {
    throw OutOfRange("head fit config: learning_rate must be positive");
  }
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw OutOfRange("head fit config: holdout_fraction must lie in [0, 1)");
  }
  const TrackSet& tracks = bundle.tracks;
  if (tracks.empty()) {
    throw NoValidEntries("fit_head: bundle has no tracks");
  }
  if (!bundle.has_depths()) {
    throw NoValidEntries("fit_head: depth maps are required for pixel features");
  }
  if (head.input_dim != 10) {
    throw ShapeMismatch("fit_head: head input must be 10 (ray 6 + color 3 + depth 1)");
  }

  const int n_frames = bundle.n_frames();
  const int height = bundle.height();
  const int width = bundle.width();
  const Camera& anchor = bundle.cameras[0];
  const Image rays = plucker_embedding(anchor, height, width);

  // Feature of a track: the anchor-frame pixel under its projection.
  std::vector<int> usable;
  std::vector<double> features;
  for (int p = 0; p < tracks.n_points; ++p) {
    if (!tracks.visible(p, 0)) {
      continue;
    }
    const Vec3 cam_point = transform_point(tracks.point(p, 0), anchor);
    if (cam_point.z() <= kNearPlane) {
      continue;
    }
    const Vec2 uv = project_point(cam_point, anchor);
    const int px = static_cast<int>(std::floor(uv.x()));
    const int py = static_cast<int>(std::floor(uv.y()));
    if (px < 0 || px >= width || py < 0 || py >= height) {
      continue;
    }
    if (bundle.depths[0].at(py, px) <= 0.0) {
      continue;
    }
    usable.push_back(p);
    for (int c = 0; c < 6; ++c) {
      features.push_back(rays.at(py, px, c));
    }
    for (int c = 0; c < 3; ++c) {
      features.push_back(bundle.frames[0].at(py, px, c));
    }
    features.push_back(bundle.depths[0].at(py, px));
  }
  const int n_usable = static_cast<int>(usable.size());
  if (n_usable == 0) {
    throw NoValidEntries("fit_head: no track is visible in the anchor frame");
  }

  Rng rng(config.seed);
  std::vector<int> order(n_usable);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_usable - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  int n_holdout = static_cast<int>(std::lround(config.holdout_fraction * n_usable));
  n_holdout = std::clamp(n_holdout, 0, n_usable - 1);
  if (config.holdout_fraction > 0.0 && n_usable >= 2 && n_holdout == 0) {
    n_holdout = 1;
  }
  const int n_train = n_usable - n_holdout;

  const auto gather = [&](int first, int count, std::vector<int>& track_ids,
                          std::vector<double>& rows) {
    track_ids.reserve(count);
    rows.reserve(static_cast<std::size_t>(count) * head.input_dim);
    for (int i = first; i < first + count; ++i) {
      const int row = order[i];
      track_ids.push_back(usable[row]);
      const double* f = features.data() + static_cast<std::size_t>(row) * head.input_dim;
      rows.insert(rows.end(), f, f + head.input_dim);
    }
  };
  std::vector<int> train_tracks, holdout_tracks;
  std::vector<double> train_features, holdout_features;
  gather(0, n_train, train_tracks, train_features);
  gather(n_train, n_holdout, holdout_tracks, holdout_features);

  HeadFitReport report;
  report.n_train = n_train;
  report.n_holdout = n_holdout;
  report.history.reserve(config.iterations);

  std::vector<double> params = head_parameters(head);
  AdamState state(params.size());
  const int out_dim = head.output_dim;
  std::vector<Vec3> pred(n_train);
  std::vector<Vec3> gt(n_train);
  std::vector<std::uint8_t> valid(n_train);

  for (int iter = 0; iter < config.iterations; ++iter) {
    const int q = rng.uniform_int(n_frames);
    const double t_q = bundle.cameras[q].timestamp;
    HeadCache cache;
    const std::vector<double> out = toy_head_forward(head, train_features, n_train, t_q, &cache);

    int n_valid = 0;
    for (int r = 0; r < n_train; ++r) {
      const int p = train_tracks[r];
      valid[r] = tracks.visible(p, q) ? 1 : 0;
      pred[r] = Vec3(out[static_cast<std::size_t>(r) * out_dim],
                     out[static_cast<std::size_t>(r) * out_dim + 1],
                     out[static_cast<std::size_t>(r) * out_dim + 2]);
      gt[r] = valid[r] ? Vec3(tracks.point(p, q) - tracks.point(p, 0)) : Vec3::Zero();
      n_valid += valid[r];
    }
    if (n_valid == 0) {
      report.history.push_back(0.0);
      continue;
    }
    const PointLoss point = motion_point_loss(pred, gt, valid);
    const PointLoss dist = motion_distribution_loss(pred, gt, valid);
    report.history.push_back(
        total_loss(config.weights, 0.0, 0.0, point.value, dist.value).total);

    std::vector<double> d_out(static_cast<std::size_t>(n_train) * out_dim, 0.0);
    const double m = config.weights.motion;
    for (int r = 0; r < n_train; ++r) {
      if (!valid[r]) {
        continue;
      }
      const Vec3 g =
          m * (config.weights.point * point.grad[r] + config.weights.distribution * dist.grad[r]);
      d_out[static_cast<std::size_t>(r) * out_dim] = g.x();
      d_out[static_cast<std::size_t>(r) * out_dim + 1] = g.y();
      d_out[static_cast<std::size_t>(r) * out_dim + 2] = g.z();
    }
    const std::vector<double> grads = toy_head_backward(head, cache, d_out);
    adam_step(params, grads, state, config.learning_rate, config.beta1, config.beta2,
              config.epsilon, "head");
    set_head_parameters(head, params);
  }

  double error_sum = 0.0;
  int error_count = 0;
  for (int q = 0; q < n_frames && n_holdout > 0; ++q) {
    const std::vector<double> out =
        toy_head_forward(head, holdout_features, n_holdout, bundle.cameras[q].timestamp);
    for (int r = 0; r < n_holdout; ++r) {
      const int p = holdout_tracks[r];
      if (!tracks.visible(p, q)) {
        continue;
      }
      const Vec3 predicted(out[static_cast<std::size_t>(r) * out_dim],
                           out[static_cast<std::size_t>(r) * out_dim + 1],
                           out[static_cast<std::size_t>(r) * out_dim + 2]);
      const Vec3 target = tracks.point(p, q) - tracks.point(p, 0);
      error_sum += (predicted - target).norm();
      ++error_count;
    }
  }
  report.holdout_epe3d = error_count > 0 ? error_sum / error_count : 0.0;
  return report;
}

}  // namespace splat4d
