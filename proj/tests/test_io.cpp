// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "splat4d/errors.hpp"
#include "splat4d/io.hpp"
#include "splat4d/rng.hpp"
#include "splat4d/synth.hpp"

#include "test_util.hpp"

using namespace splat4d;
using test::identity_camera;
using test::TempDir;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Image image(h, w, c);
  Rng rng(seed);
  for (double& v : image.raw()) v = rng.uniform(0.0, 1.0);
  return image;
}

FittedModel small_model(bool with_associations) {
  FittedModel model;
  Rng rng(7);
  for (int i = 0; i < 6; ++i) {
    SplatterPixel pixel;
    pixel.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3));
    pixel.rotation = Vec4(1.0, rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 0.0);
    pixel.log_scale = Vec3::Constant(std::log(rng.uniform(0.05, 0.2)));
    pixel.opacity_logit = rng.uniform(-1, 1);
    pixel.color = Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    model.pixels.push_back(pixel);
  }
  model.field = DeformationField::zeros({0.0, 1.0}, 6);
  for (double& v : model.field.deltas) v = rng.uniform(-0.1, 0.1);
  model.normalization_scale = 2.375;
  model.height = 4;
  model.width = 4;
  for (int i = 0; i < 2; ++i) {
    Camera camera = identity_camera(4, 4, 8.0);
    camera.timestamp = static_cast<double>(i);
    model.cameras.push_back(camera);
  }
  if (with_associations) {
    for (int i = 0; i < 6; ++i) model.associations.push_back({i % 2, i % 4, i / 4});
  }
  return model;
}

}  // namespace

TEST_CASE("ppm images quantize to the 8-bit grid and round-trip") {
  TempDir dir("ppm");
  const Image image = random_image(5, 7, 3, 1);
  write_ppm(dir.file("a.ppm"), image);
  const Image back = read_ppm(dir.file("a.ppm"));

  REQUIRE(back.same_shape(image));
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double quantized = std::round(image.raw()[i] * 255.0) / 255.0;
    CHECK(back.raw()[i] == quantized);
  }

  // A second write of quantized data reproduces the file byte for byte.
  write_ppm(dir.file("b.ppm"), back);
  CHECK(read_file(dir.file("a.ppm")) == read_file(dir.file("b.ppm")));
}

TEST_CASE("ppm values clamp to the unit range") {
  TempDir dir("ppm_clamp");
  Image image(1, 2, 3);
  image.at(0, 0, 0) = -0.5;
  image.at(0, 1, 0) = 1.5;
  write_ppm(dir.file("c.ppm"), image);
  const Image back = read_ppm(dir.file("c.ppm"));
  CHECK(back.at(0, 0, 0) == 0.0);
  CHECK(back.at(0, 1, 0) == 1.0);
}

TEST_CASE("truncated ppm names the byte offset") {
  TempDir dir("ppm_trunc");
  write_file_atomic(dir.file("t.ppm"), "P6\n4 4\n255\n12345");
  try {
    read_ppm(dir.file("t.ppm"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("pfm depths round-trip at float32 precision") {
  TempDir dir("pfm");
  Image depth(4, 6, 1);
  Rng rng(2);
  for (double& v : depth.raw()) v = rng.uniform(0.1, 9.0);

  write_pfm(dir.file("d.pfm"), depth);
  const Image back = read_pfm(dir.file("d.pfm"));
  for (std::size_t i = 0; i < depth.size(); ++i)
    CHECK(back.raw()[i] == static_cast<double>(static_cast<float>(depth.raw()[i])));
}

TEST_CASE("big-endian pfm is rejected by name") {
  TempDir dir("pfm_be");
  write_file_atomic(dir.file("be.pfm"), "Pf\n2 2\n1.0\n0123456789abcdef");
  try {
    read_pfm(dir.file("be.pfm"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("endian") != std::string::npos);
  }
}

TEST_CASE("png images round-trip for one and three channels") {
  TempDir dir("png");
  for (int channels : {1, 3}) {
    const Image image = random_image(6, 5, channels, 11 + channels);
    const std::string path = dir.file("img" + std::to_string(channels) + ".png");
    write_png(path, image);
    const Image back = read_png(path);
    REQUIRE(back.channels() == channels);
    for (std::size_t i = 0; i < image.size(); ++i)
      CHECK(back.raw()[i] == std::round(image.raw()[i] * 255.0) / 255.0);
  }
}

TEST_CASE("tracks round-trip exactly") {
  TempDir dir("tracks");
  const SceneBundle bundle = generate(dynamic_scene_spec(3, 3, 12, 12));
  write_tracks(dir.file("t.txt"), bundle.tracks);
  const TrackSet back = read_tracks(dir.file("t.txt"));
  CHECK(back.n_points == bundle.tracks.n_points);
  CHECK(back.n_frames == bundle.tracks.n_frames);
  CHECK(back.points == bundle.tracks.points);
  CHECK(back.visibility == bundle.tracks.visibility);
}

TEST_CASE("mask stacks round-trip exactly") {
  TempDir dir("masks");
  const SceneBundle bundle = generate(dynamic_scene_spec(5, 3, 8, 8));
  write_masks(dir.file("m.bin"), bundle.masks);
  const std::vector<Mask> back = read_masks(dir.file("m.bin"));
  REQUIRE(back.size() == bundle.masks.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].raw() == bundle.masks[i].raw());
}

TEST_CASE("scene directories round-trip exactly") {
  TempDir dir("scene");
  const SceneBundle bundle = generate(dynamic_scene_spec(9, 3, 12, 12));
  write_scene(bundle, dir.file("scene"));
  const SceneBundle back = read_scene(dir.file("scene"));

  REQUIRE(back.n_frames() == bundle.n_frames());
  for (int i = 0; i < bundle.n_frames(); ++i) {
    CHECK(back.frames[i].raw() == bundle.frames[i].raw());
    CHECK(back.depths[i].raw() == bundle.depths[i].raw());
    CHECK(back.masks[i].raw() == bundle.masks[i].raw());
    CHECK((back.cameras[i].rotation - bundle.cameras[i].rotation).norm() == 0.0);
    CHECK((back.cameras[i].translation - bundle.cameras[i].translation).norm() == 0.0);
    CHECK(back.cameras[i].fx == bundle.cameras[i].fx);
    CHECK(back.cameras[i].timestamp == bundle.cameras[i].timestamp);
  }
  CHECK(back.tracks.points == bundle.tracks.points);
  CHECK(validate_scene(back).empty());
}

TEST_CASE("manifest frame counts are enforced") {
  TempDir dir("scene_bad");
  const SceneBundle bundle = generate(static_scene_spec(1, 2, 8, 8));
  write_scene(bundle, dir.file("scene"));

  const std::string manifest_path = dir.file("scene") + "/scene.json";
  std::string manifest = read_file(manifest_path);
  const auto pos = manifest.find("\"n_frames\": 2");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 13, "\"n_frames\": 3");
  write_file_atomic(manifest_path, manifest);

  CHECK_THROWS_AS(read_scene(dir.file("scene")), ShapeMismatch);
}

TEST_CASE("missing inputs raise MissingFile") {
  TempDir dir("missing");
  CHECK_THROWS_AS(read_ppm(dir.file("nope.ppm")), MissingFile);
  CHECK_THROWS_AS(read_scene(dir.file("nodir")), MissingFile);
  CHECK_THROWS_AS(read_model(dir.file("no.model")), MissingFile);
}

TEST_CASE("models round-trip at float32 precision and write byte-identically") {
  TempDir dir("model");
  for (bool with_assoc : {true, false}) {
    const FittedModel model = small_model(with_assoc);
    const std::string path = dir.file(with_assoc ? "a.model" : "b.model");
    write_model(model, path);
    const FittedModel back = read_model(path);

    REQUIRE(back.n_gaussians() == model.n_gaussians());
    CHECK(back.normalization_scale == model.normalization_scale);
    CHECK(back.height == model.height);
    CHECK(back.width == model.width);
    CHECK(back.field.keyframe_times == model.field.keyframe_times);
    for (int i = 0; i < model.n_gaussians(); ++i) {
      for (int c = 0; c < 3; ++c) {
        CHECK(back.pixels[i].position(c) ==
              static_cast<double>(static_cast<float>(model.pixels[i].position(c))));
        CHECK(back.pixels[i].color(c) ==
              static_cast<double>(static_cast<float>(model.pixels[i].color(c))));
      }
      CHECK(back.pixels[i].opacity_logit ==
            static_cast<double>(static_cast<float>(model.pixels[i].opacity_logit)));
    }
    REQUIRE(back.associations.size() == model.associations.size());
    for (std::size_t i = 0; i < model.associations.size(); ++i) {
      CHECK(back.associations[i].frame == model.associations[i].frame);
      CHECK(back.associations[i].x == model.associations[i].x);
      CHECK(back.associations[i].y == model.associations[i].y);
    }
    REQUIRE(back.cameras.size() == model.cameras.size());

    // A read-back model carries float32 values already, so re-writing it
    // reproduces the file bytes.
    write_model(back, path + ".again");
    CHECK(read_file(path) == read_file(path + ".again"));
  }
}

TEST_CASE("ply export carries the viewer property set") {
  TempDir dir("ply");
  const FittedModel model = small_model(false);
  export_ply(model, 0.0, dir.file("splats.ply"));
  const PlyContents ply = read_ply(dir.file("splats.ply"));

  CHECK(ply.n_vertices == model.n_gaussians());
  const std::vector<std::string> expected = {"x",     "y",     "z",     "opacity", "scale_0",
                                             "scale_1", "scale_2", "rot_0", "rot_1",   "rot_2",
                                             "rot_3",   "f_dc_0",  "f_dc_1", "f_dc_2"};
  CHECK(ply.properties == expected);
}

TEST_CASE("ply export bakes the deformation at the requested time") {
  TempDir dir("ply_deform");
  FittedModel model = small_model(false);
  export_ply(model, 1.0, dir.file("deformed.ply"));
  const PlyContents ply = read_ply(dir.file("deformed.ply"));

  for (int i = 0; i < model.n_gaussians(); ++i) {
    const DeformDelta delta = model.field.delta(1, i);
    const Vec3 expected = model.pixels[i].position + delta.dx;
    CHECK(std::abs(ply.value(i, "x") - expected.x()) < 1e-6);
    CHECK(std::abs(ply.value(i, "y") - expected.y()) < 1e-6);
    CHECK(std::abs(ply.value(i, "z") - expected.z()) < 1e-6);
    const double scale0 = model.pixels[i].log_scale.x() + delta.dlog_scale.x();
    CHECK(std::abs(ply.value(i, "scale_0") - scale0) < 1e-6);
    const double f_dc = (model.pixels[i].color.x() - 0.5) / 0.28209479177387814;
    CHECK(std::abs(ply.value(i, "f_dc_0") - f_dc) < 1e-5);
  }
}

TEST_CASE("zero deformation exports are time independent byte for byte") {
  TempDir dir("ply_zero");
  FittedModel model = small_model(false);
  std::fill(model.field.deltas.begin(), model.field.deltas.end(), 0.0);
  export_ply(model, 0.0, dir.file("t0.ply"));
  export_ply(model, 0.7, dir.file("t1.ply"));
  CHECK(read_file(dir.file("t0.ply")) == read_file(dir.file("t1.ply")));
}

TEST_CASE("scene specs read presets with overrides") {
  TempDir dir("spec");
  write_file_atomic(dir.file("s.json"),
                    R"({"preset": "dynamic", "seed": 4, "n_frames": 6, "height": 20,
                        "width": 24, "n_tracks": 96})");
  const SceneSpec spec = read_scene_spec(dir.file("s.json"));
  CHECK(spec.seed == 4);
  CHECK(spec.n_frames == 6);
  CHECK(spec.height == 20);
  CHECK(spec.width == 24);
  CHECK(spec.n_tracks == 96);
  CHECK(spec.objects.size() >= 2);  // the dynamic preset stage

  write_file_atomic(dir.file("bad.json"), R"({"objects": [{"shape": "torus"}]})");
  CHECK_THROWS_AS(read_scene_spec(dir.file("bad.json")), ParseError);
}

TEST_CASE("fit configs fall back to defaults") {
  TempDir dir("cfg");
  write_file_atomic(dir.file("c.json"),
                    R"({"iterations": 50, "seed": 9, "weights": {"distribution": 0.2}})");
  const FitConfig config = read_fit_config(dir.file("c.json"));
  CHECK(config.iterations == 50);
  CHECK(config.seed == 9);
  CHECK(config.weights.distribution == 0.2);
  const FitConfig defaults;
  CHECK(config.lr_position == defaults.lr_position);
  CHECK(config.weights.render == defaults.weights.render);
}

TEST_CASE("camera files parse with size fallbacks") {
  TempDir dir("cam");
  write_file_atomic(dir.file("cam.json"),
                    R"({"rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0.5, 0, -2],
                        "fx": 30, "fy": 32, "cx": 8, "cy": 7.5, "timestamp": 0.25})");
  const Camera camera = read_camera_file(dir.file("cam.json"), 16, 15);
  CHECK(camera.fx == 30.0);
  CHECK(camera.fy == 32.0);
  CHECK((camera.translation - Vec3(0.5, 0, -2)).norm() == 0.0);
  CHECK(camera.width == 16);
  CHECK(camera.height == 15);
  CHECK(camera.timestamp == 0.25);
}

TEST_CASE("reports write text plus a json mirror") {
  TempDir dir("report");
  write_report(dir.file("r.txt"), {{"epe3d", 0.5}, {"delta_010", 1.0}});
  const std::string text = read_file(dir.file("r.txt"));
  CHECK(text.find("epe3d=0.5") != std::string::npos);
  CHECK(text.find("delta_010=1") != std::string::npos);
  const std::string json = read_file(dir.file("r.txt") + ".json");
  CHECK(json.find("\"epe3d\"") != std::string::npos);
}

TEST_CASE("atomic writes leave no temporary behind") {
  TempDir dir("atomic");
  write_file_atomic(dir.file("x.bin"), "payload");
  CHECK(read_file(dir.file("x.bin")) == "payload");
  CHECK(!std::filesystem::exists(dir.file("x.bin") + ".tmp"));
}
