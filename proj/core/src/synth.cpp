// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <vector>

#include "splat4d/errors.hpp"
#include "splat4d/geometry.hpp"
#include "splat4d/parallel.hpp"
#include "splat4d/rng.hpp"

namespace splat4d {

namespace {

constexpr double kRayEpsilon = 1e-9;
constexpr double kAmbient = 0.3;

// Subpixel grid edge for frame colors; must stay odd so the grid has an
// exact central ray to reuse for depth.
constexpr int kColorSamples = 3;

// Direction the light travels, world space.
const Vec3 kLightDir = Vec3(0.45, -0.7, -0.55).normalized();

constexpr double kPi = 3.14159265358979323846;

struct Pose {
  Mat3 rot = Mat3::Identity();
  Vec3 center = Vec3::Zero();
};

Pose pose_at(const ObjectSpec& obj, double t) {
  Pose pose;
  pose.center = obj.center + obj.velocity * t;
  if (obj.rotation_rate != 0.0) {
    pose.rot = Eigen::AngleAxisd(obj.rotation_rate * t, obj.rotation_axis.normalized())
                   .toRotationMatrix();
  }
  return pose;
}

// Rigid advection of a canonical (t=0) surface point.
Vec3 advect(const ObjectSpec& obj, const Vec3& canonical, double t) {
  const Pose pose = pose_at(obj, t);
  return pose.center + pose.rot * (canonical - obj.center);
}

// Nearest intersection in the object's canonical frame. Returns the ray
// parameter (> kRayEpsilon) or -1; the normal faces the incoming ray.
double intersect_canonical(const ObjectSpec& obj, const Vec3& origin, const Vec3& dir,
                           Vec3* normal) {
  switch (obj.shape) {
    case ShapeKind::Sphere: {
      const Vec3 oc = origin - obj.center;
      const double a = dir.squaredNorm();
      const double b = 2.0 * oc.dot(dir);
      const double c = oc.squaredNorm() - obj.radius * obj.radius;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) {
        return -1.0;
      }
      const double root = std::sqrt(disc);
      double t = (-b - root) / (2.0 * a);
      if (t <= kRayEpsilon) {
        t = (-b + root) / (2.0 * a);
      }
      if (t <= kRayEpsilon) {
        return -1.0;
      }
      *normal = (origin + t * dir - obj.center) / obj.radius;
      return t;
    }
    case ShapeKind::Box: {
      double t0 = -1e300;
      double t1 = 1e300;
      int axis0 = -1;
      for (int k = 0; k < 3; ++k) {
        const double o = origin(k) - obj.center(k);
        const double h = obj.half_extent(k);
        if (std::abs(dir(k)) < 1e-14) {
          if (o < -h || o > h) {
            return -1.0;
          }
          continue;
        }
        double lo = (-h - o) / dir(k);
        double hi = (h - o) / dir(k);
        if (lo > hi) {
          std::swap(lo, hi);
        }
        if (lo > t0) {
          t0 = lo;
          axis0 = k;
        }
        t1 = std::min(t1, hi);
        if (t0 > t1) {
          return -1.0;
        }
      }
      double t = t0;
      if (t <= kRayEpsilon) {
        t = t1;
      }
      if (t <= kRayEpsilon || t0 > t1) {
        return -1.0;
      }
      const Vec3 local = origin + t * dir - obj.center;
      // Face of the largest relative coordinate; robust for the exit face too.
      int axis = axis0 >= 0 ? axis0 : 0;
      double best = -1.0;
      for (int k = 0; k < 3; ++k) {
        const double rel = std::abs(local(k)) / obj.half_extent(k);
        if (rel > best) {
          best = rel;
          axis = k;
        }
      }
      Vec3 n = Vec3::Zero();
      n(axis) = local(axis) >= 0.0 ? 1.0 : -1.0;
      *normal = n;
      return t;
    }
    case ShapeKind::Plane: {
      const double denom = dir.dot(obj.normal);
      if (std::abs(denom) < 1e-14) {
        return -1.0;
      }
      const double t = (obj.center - origin).dot(obj.normal) / denom;
      if (t <= kRayEpsilon) {
        return -1.0;
      }
      *normal = denom > 0.0 ? Vec3(-obj.normal) : obj.normal;
      return t;
    }
  }
  return -1.0;
}

struct Hit {
  double t = -1.0;
  int body = -1;
  Vec3 point = Vec3::Zero();      // world
  Vec3 normal = Vec3::Zero();     // world, facing the ray
  Vec3 canonical = Vec3::Zero();  // object frame at t=0
};

Hit trace(const std::vector<ObjectSpec>& bodies, const Vec3& origin, const Vec3& dir,
          double time) {
  Hit best;
  for (int b = 0; b < static_cast<int>(bodies.size()); ++b) {
    const ObjectSpec& obj = bodies[b];
    const Pose pose = pose_at(obj, time);
    const Vec3 o0 = obj.center + pose.rot.transpose() * (origin - pose.center);
    const Vec3 d0 = pose.rot.transpose() * dir;
    Vec3 n0;
    const double t = intersect_canonical(obj, o0, d0, &n0);
    if (t > kRayEpsilon && (best.t < 0.0 || t < best.t)) {
      best.t = t;
      best.body = b;
      best.point = origin + t * dir;
      best.normal = pose.rot * n0;
      best.canonical = o0 + t * d0;
    }
  }
  return best;
}

Vec3 shade(const ObjectSpec& obj, const Vec3& canonical, const Vec3& world_normal) {
  Vec3 albedo = obj.albedo;
  if (obj.texture == TextureKind::Checker) {
    const double s = obj.checker_scale;
    const long long parity = static_cast<long long>(std::floor(canonical.x() / s)) +
                             static_cast<long long>(std::floor(canonical.y() / s)) +
                             static_cast<long long>(std::floor(canonical.z() / s));
    if (parity % 2 != 0) {
      albedo = obj.albedo2;
    }
  }
  const double diffuse = std::max(0.0, world_normal.dot(-kLightDir));
  const Vec3 c = albedo * (kAmbient + (1.0 - kAmbient) * diffuse);
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

double quantize8(double v) { return std::round(v * 255.0) / 255.0; }

// Snaps to the nearest float32. The volatile intermediate keeps the optimizer
// from eliding the narrowing round trip (gcc 11 drops it from inlined copies).
double to_f32(double v) {
  volatile float f = static_cast<float>(v);
  return static_cast<double>(f);
}

// World-to-camera rotation looking from eye toward target, world +y up,
// image v axis pointing down. Proper rotation by construction.
Mat3 look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 up(0.0, 1.0, 0.0);
  if (std::abs(z.dot(up)) > 0.999) {
    up = Vec3(0.0, 0.0, 1.0);
  }
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  Mat3 rot;
  rot.row(0) = x;
  rot.row(1) = y;
  rot.row(2) = z;
  return rot;
}

// Objects plus the backdrop plane, which is pinned static.
std::vector<ObjectSpec> assemble_bodies(const SceneSpec& spec) {
  std::vector<ObjectSpec> bodies = spec.objects;
  ObjectSpec back = spec.background;
  back.shape = ShapeKind::Plane;
  back.velocity = Vec3::Zero();
  back.rotation_rate = 0.0;
  bodies.push_back(back);
  return bodies;
}

Vec3 pixel_ray_dir(const Camera& camera, double u, double v) {
  const Vec3 d_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
  return camera.rotation.transpose() * d_cam;
}

void check_spec(const SceneSpec& spec) {
  if (spec.objects.empty()) {
    throw OutOfRange("generate: spec needs at least one object");
  }
  if (spec.n_frames < 2) {
    throw OutOfRange("generate: n_frames must be at least 2");
  }
  if (spec.height <= 0 || spec.width <= 0) {
    throw OutOfRange("generate: resolution must be positive");
  }
}

}  // namespace

SceneSpec::SceneSpec() {
  background.shape = ShapeKind::Plane;
  background.center = Vec3(0.0, 0.0, -2.5);
  background.normal = Vec3(0.0, 0.0, 1.0);
  background.texture = TextureKind::Checker;
  background.albedo = Vec3(0.85, 0.82, 0.72);
  background.albedo2 = Vec3(0.35, 0.42, 0.55);
  background.checker_scale = 0.8;
  background.velocity = Vec3::Zero();
  background.rotation_rate = 0.0;
}

SceneSpec static_scene_spec(std::uint64_t seed, int n_frames, int height, int width) {
  SceneSpec spec;
  spec.seed = seed;
  spec.n_frames = n_frames;
  spec.height = height;
  spec.width = width;

  ObjectSpec sphere;
  sphere.shape = ShapeKind::Sphere;
  sphere.center = Vec3(-0.7, 0.0, 0.15);
  sphere.radius = 0.45;
  sphere.texture = TextureKind::Checker;
  sphere.albedo = Vec3(0.9, 0.35, 0.25);
  sphere.albedo2 = Vec3(0.95, 0.9, 0.8);
  sphere.checker_scale = 0.22;

  ObjectSpec box;
  box.shape = ShapeKind::Box;
  box.center = Vec3(0.62, -0.05, -0.35);
  box.half_extent = Vec3(0.35, 0.4, 0.3);
  box.texture = TextureKind::Checker;
  box.albedo = Vec3(0.25, 0.45, 0.9);
  box.albedo2 = Vec3(0.92, 0.92, 0.95);
  box.checker_scale = 0.26;

  spec.objects = {sphere, box};

  spec.camera.kind = CameraPathKind::Orbit;
  spec.camera.target = Vec3(0.0, 0.0, -0.2);
  spec.camera.radius = 3.6;
  spec.camera.height = 0.8;
  spec.camera.arc_degrees = 42.0;
  spec.camera.fov_degrees = 46.0;
  return spec;
}

SceneSpec dynamic_scene_spec(std::uint64_t seed, int n_frames, int height, int width) {
  SceneSpec spec = static_scene_spec(seed, n_frames, height, width);
  spec.objects[0].velocity = Vec3(0.35, 0.12, 0.0);          // translating sphere
  spec.objects[1].rotation_axis = Vec3(0.2, 1.0, 0.3);       // rotating box
  spec.objects[1].rotation_rate = 0.8;
  return spec;
}

Camera camera_at(const SceneSpec& spec, int frame) {
  if (frame < 0 || frame >= spec.n_frames) {
    throw OutOfRange("camera_at: frame index out of range");
  }
  const double u = static_cast<double>(frame) / (spec.n_frames - 1);
  const CameraPathSpec& path = spec.camera;
  Vec3 eye;
  if (path.kind == CameraPathKind::Orbit) {
    const double theta = path.arc_degrees * kPi / 180.0 * (u - 0.5);
    eye = path.target +
          Vec3(path.radius * std::sin(theta), path.height, path.radius * std::cos(theta));
  } else {
    eye = path.start + (path.end - path.start) * u;
  }
  Camera camera;
  camera.rotation = look_at(eye, path.target);
  camera.translation = -camera.rotation * eye;
  camera.height = spec.height;
  camera.width = spec.width;
  camera.fy = 0.5 * spec.height / std::tan(0.5 * path.fov_degrees * kPi / 180.0);
  camera.fx = camera.fy;
  camera.cx = 0.5 * spec.width;
  camera.cy = 0.5 * spec.height;
  camera.timestamp = u;
  return camera;
}

SceneBundle generate(const SceneSpec& spec) {
  check_spec(spec);
  const std::vector<ObjectSpec> bodies = assemble_bodies(spec);
  const int h = spec.height;
  const int w = spec.width;

  SceneBundle bundle;
  for (int j = 0; j < spec.n_frames; ++j) {
    const Camera camera = camera_at(spec, j);
    const double time = camera.timestamp;
    const Vec3 origin = camera.center();
    Image frame(h, w, 3);
    Image depth(h, w, 1);
    Mask mask(h, w, 1);
    parallel_for(h, [&](int y) {
      for (int x = 0; x < w; ++x) {
        // Color integrates a 3x3 subpixel grid (a sensor averages over the
        // pixel area); depth and the moving mask stay central-ray quantities.
        Vec3 sum = Vec3::Zero();
        Hit center;
        for (int sy = 0; sy < kColorSamples; ++sy) {
          for (int sx = 0; sx < kColorSamples; ++sx) {
            const double u = x + (sx + 0.5) / kColorSamples;
            const double v = y + (sy + 0.5) / kColorSamples;
            const Hit hit = trace(bodies, origin, pixel_ray_dir(camera, u, v), time);
            if (hit.body >= 0) {
              sum += shade(bodies[hit.body], hit.canonical, hit.normal);
            }
            if (sx == kColorSamples / 2 && sy == kColorSamples / 2) center = hit;
          }
        }
        const Vec3 c = sum / (kColorSamples * kColorSamples);
        frame.at(y, x, 0) = quantize8(c.x());
        frame.at(y, x, 1) = quantize8(c.y());
        frame.at(y, x, 2) = quantize8(c.z());
        if (center.body >= 0) {
          depth.at(y, x, 0) =
              to_f32((camera.rotation * center.point + camera.translation).z());
          mask.at(y, x, 0) = bodies[center.body].moving() ? 1 : 0;
        } else {
          depth.at(y, x, 0) = 0.0;  // invalid
        }
      }
    });
    bundle.frames.push_back(std::move(frame));
    bundle.cameras.push_back(camera);
    bundle.depths.push_back(std::move(depth));
    bundle.masks.push_back(std::move(mask));
  }

  // Tracks: canonical surface points advected by their body's rigid motion.
  // Sampling shoots rays through random pixels of random frames so most
  // tracks are actually visible; visibility itself is decided analytically.
  const int n_tracks = std::max(0, spec.n_tracks);
  TrackSet tracks;
  tracks.n_points = n_tracks;
  tracks.n_frames = spec.n_frames;
  tracks.points.assign(static_cast<std::size_t>(n_tracks) * spec.n_frames * 3, 0.0);
  tracks.visibility.assign(static_cast<std::size_t>(n_tracks) * spec.n_frames, 0);
  if (n_tracks > 0) {
    Rng rng(spec.seed);
    std::vector<int> moving_bodies;
    std::vector<int> static_bodies;
    for (int b = 0; b < static_cast<int>(bodies.size()); ++b) {
      (bodies[b].moving() ? moving_bodies : static_bodies).push_back(b);
    }
    const int want_moving =
        moving_bodies.empty() ? 0
                              : static_cast<int>(std::lround(0.75 * n_tracks));

    std::vector<int> track_body(n_tracks, -1);
    std::vector<Vec3> canonical(n_tracks, Vec3::Zero());
    for (int p = 0; p < n_tracks; ++p) {
      const bool moving = p < want_moving;
      const std::vector<int>& pool = moving ? moving_bodies : static_bodies;
      int body = -1;
      Vec3 point = Vec3::Zero();
      for (int attempt = 0; attempt < 256 && body < 0; ++attempt) {
        const int j = rng.uniform_int(spec.n_frames);
        const Camera camera = camera_at(spec, j);
        const Vec3 dir =
            pixel_ray_dir(camera, rng.uniform(0.0, w), rng.uniform(0.0, h));
        const Hit hit = trace(bodies, camera.center(), dir, camera.timestamp);
        if (hit.body >= 0 && bodies[hit.body].moving() == moving) {
          body = hit.body;
          point = hit.canonical;
        }
      }
      if (body < 0) {
        // Fallback: direct canonical sampling on a round-robin pool body.
        body = pool[p % static_cast<int>(pool.size())];
        const ObjectSpec& obj = bodies[body];
        if (obj.shape == ShapeKind::Sphere) {
          point = obj.center + obj.radius * rng.unit_vector();
        } else if (obj.shape == ShapeKind::Box) {
          const int axis = rng.uniform_int(3);
          Vec3 o;
          for (int k = 0; k < 3; ++k) {
            o(k) = rng.uniform(-obj.half_extent(k), obj.half_extent(k));
          }
          o(axis) = rng.uniform() < 0.5 ? -obj.half_extent(axis) : obj.half_extent(axis);
          point = obj.center + o;
        } else {
          point = obj.center;
        }
      }
      track_body[p] = body;
      canonical[p] = point;
    }

    for (int p = 0; p < n_tracks; ++p) {
      const ObjectSpec& obj = bodies[track_body[p]];
      for (int j = 0; j < spec.n_frames; ++j) {
        const Camera& camera = bundle.cameras[j];
        const Vec3 exact = advect(obj, canonical[p], camera.timestamp);
        const Vec3 stored(to_f32(exact.x()), to_f32(exact.y()), to_f32(exact.z()));
        tracks.set_point(p, j, stored);

        const Vec3 p_cam = camera.rotation * stored + camera.translation;
        bool visible = p_cam.z() > kNearPlane;
        if (visible) {
          const double u = camera.fx * p_cam.x() / p_cam.z() + camera.cx;
          const double v = camera.fy * p_cam.y() / p_cam.z() + camera.cy;
          visible = u >= 0.0 && u < w && v >= 0.0 && v < h;
        }
        if (visible) {
          // Occluded unless the ray toward the point first hits (numerically)
          // the point itself; the ray parameter at the point is 1.
          const Vec3 origin = camera.center();
          const Hit hit = trace(bodies, origin, stored - origin, camera.timestamp);
          visible = hit.body >= 0 && std::abs(hit.t - 1.0) < 1e-6;
        }
        tracks.visibility[static_cast<std::size_t>(p) * spec.n_frames + j] = visible ? 1 : 0;
      }
    }
  }
  bundle.tracks = std::move(tracks);
  return bundle;
}

MotionGt gt_motion(const TrackSet& tracks, int i, int q) {
  if (i < 0 || i >= tracks.n_frames || q < 0 || q >= tracks.n_frames) {
    throw OutOfRange("gt_motion: frame index out of range");
  }
  MotionGt out;
  out.displacement.resize(tracks.n_points);
  out.valid.resize(tracks.n_points);
  for (int p = 0; p < tracks.n_points; ++p) {
    out.displacement[p] = tracks.point(p, q) - tracks.point(p, i);
    out.valid[p] = (tracks.visible(p, i) && tracks.visible(p, q)) ? 1 : 0;
  }
  return out;
}

Image gt_pixel_motion(const SceneSpec& spec, int frame_i, double t_q) {
  check_spec(spec);
  const std::vector<ObjectSpec> bodies = assemble_bodies(spec);
  const Camera camera = camera_at(spec, frame_i);
  const Vec3 origin = camera.center();
  Image out(spec.height, spec.width, 3);
  parallel_for(spec.height, [&](int y) {
    for (int x = 0; x < spec.width; ++x) {
      const Vec3 dir = pixel_ray_dir(camera, x + 0.5, y + 0.5);
      const Hit hit = trace(bodies, origin, dir, camera.timestamp);
      if (hit.body < 0) {
        continue;
      }
      const Vec3 displaced = advect(bodies[hit.body], hit.canonical, t_q);
      const Vec3 disp = displaced - hit.point;
      out.at(y, x, 0) = disp.x();
      out.at(y, x, 1) = disp.y();
      out.at(y, x, 2) = disp.z();
    }
  });
  return out;
}

double analytic_depth(const SceneSpec& spec, const Camera& camera, double u, double v,
                      double t) {
  const std::vector<ObjectSpec> bodies = assemble_bodies(spec);
  const Vec3 origin = camera.center();
  const Hit hit = trace(bodies, origin, pixel_ray_dir(camera, u, v), t);
  if (hit.body < 0) {
    return -1.0;
  }
  return (camera.rotation * hit.point + camera.translation).z();
}

}  // namespace splat4d
