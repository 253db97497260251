// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point. Subcommands: gen, fit, render, eval (nvs|track),
// flow, segment, gradcheck. Exit codes: 0 success, 1 argument validation,
// 2 runtime failure.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splat4d/errors.hpp"
#include "splat4d/eval.hpp"
#include "splat4d/fitting.hpp"
#include "splat4d/gradcheck.hpp"
#include "splat4d/io.hpp"
#include "splat4d/pipeline.hpp"
#include "splat4d/synth.hpp"

namespace {

using namespace splat4d;

int fail_usage(const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return 1;
}

bool is_all_digits(const std::string& text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

// "r,g,b" with exactly three components and no trailing text.
bool parse_background(const std::string& text, Vec3* out) {
  double r = 0.0, g = 0.0, b = 0.0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf ,%lf ,%lf %c", &r, &g, &b, &extra) != 3) return false;
  *out = Vec3(r, g, b);
  return true;
}

int run_gen(const std::string& spec_path, const std::string& out_dir) {
  if (!std::filesystem::exists(spec_path))
    return fail_usage("--spec: file does not exist: " + spec_path);
  const SceneSpec spec = read_scene_spec(spec_path);
  const SceneBundle bundle = generate(spec);
  write_scene(bundle, out_dir);
  std::printf("gen: wrote %d frames (%dx%d, %d tracks) to %s\n", bundle.n_frames(),
              bundle.width(), bundle.height(), bundle.tracks.n_points, out_dir.c_str());
  return 0;
}

int run_fit(const std::string& scene_dir, const std::string& config_path,
            const std::string& out_path) {
  if (!std::filesystem::exists(scene_dir))
    return fail_usage("--scene: directory does not exist: " + scene_dir);
  if (!std::filesystem::exists(config_path))
    return fail_usage("--config: file does not exist: " + config_path);
  const SceneBundle bundle = read_scene(scene_dir);
  const FitConfig config = read_fit_config(config_path);

  ModelCheckpointFn checkpoint;
  if (config.checkpoint_interval > 0) {
    checkpoint = [&out_path](int iteration, const FittedModel& model) {
      write_model(model, out_path + "." + std::to_string(iteration));
    };
  }
  std::vector<LossReport> history;
  const FittedModel model = fit_bundle(bundle, config, checkpoint, &history);
  write_model(model, out_path);
  const double final_loss = history.empty() ? 0.0 : history.back().total;
  std::printf("fit: wrote %s (%d gaussians, %d keyframes, final loss %.6g)\n", out_path.c_str(),
              model.n_gaussians(), model.field.n_keyframes(), final_loss);
  return 0;
}

int run_render(const std::string& model_path, const std::string& camera_arg, double t,
               const std::string& out_path, const std::string& background_arg) {
  if (!std::isfinite(t)) return fail_usage("--time: time must be finite");
  Vec3 background = Vec3::Zero();
  if (!background_arg.empty() && !parse_background(background_arg, &background))
    return fail_usage("--background: expected three comma-separated values r,g,b");
  if (!std::filesystem::exists(model_path))
    return fail_usage("--model: file does not exist: " + model_path);

  const FittedModel model = read_model(model_path);
  Camera camera;
  if (is_all_digits(camera_arg)) {
    const int index = std::stoi(camera_arg);
    if (index >= static_cast<int>(model.cameras.size()))
      return fail_usage("--camera: index " + camera_arg + " out of range (model has " +
                        std::to_string(model.cameras.size()) + " cameras)");
    camera = model.cameras[static_cast<std::size_t>(index)];
  } else if (std::filesystem::exists(camera_arg)) {
    camera = read_camera_file(camera_arg, model.width, model.height);
    // Camera files use capture coordinates; the model lives in normalized
    // space, so the translation rescales the same way fitting rescaled it.
    camera.translation /= model.normalization_scale;
  } else {
    return fail_usage("--camera: expected a camera index or an existing camera file, got " +
                      camera_arg);
  }

  const RenderOutput render = render_model(model, camera, t, background);
  write_png(out_path, render.rgb);
  std::printf("render: wrote %s (%dx%d, t=%g)\n", out_path.c_str(), camera.width, camera.height,
              t);
  return 0;
}

void print_report(const std::vector<std::pair<std::string, double>>& values) {
  for (const auto& [key, value] : values) std::printf("%s=%.17g\n", key.c_str(), value);
}

int run_eval(bool nvs, const std::string& model_path, const std::string& scene_dir,
             const std::string& report_path) {
  if (!std::filesystem::exists(model_path))
    return fail_usage("--model: file does not exist: " + model_path);
  if (!std::filesystem::exists(scene_dir))
    return fail_usage("--scene: directory does not exist: " + scene_dir);
  const FittedModel model = read_model(model_path);
  const SceneBundle scene = read_scene(scene_dir);

  std::vector<std::pair<std::string, double>> values;
  if (nvs) {
    const NvsReport report = eval_nvs(model, scene);
    values.emplace_back("mean_psnr", report.mean_psnr);
    values.emplace_back("mean_ssim", report.mean_ssim);
    char key[32];
    for (std::size_t i = 0; i < report.psnr_per_frame.size(); ++i) {
      std::snprintf(key, sizeof(key), "psnr_%03zu", i);
      values.emplace_back(key, report.psnr_per_frame[i]);
      std::snprintf(key, sizeof(key), "ssim_%03zu", i);
      values.emplace_back(key, report.ssim_per_frame[i]);
    }
  } else {
    const TrackReport report = eval_track(model, scene);
    values.emplace_back("epe3d", report.metrics.epe3d);
    values.emplace_back("delta_005", report.metrics.delta_005);
    values.emplace_back("delta_010", report.metrics.delta_010);
    values.emplace_back("n_valid", static_cast<double>(report.n_valid));
    values.emplace_back("gt_scale", report.gt_scale);
  }
  write_report(report_path, values);
  print_report(values);
  return 0;
}

int run_flow(const std::string& model_path, int frame, double t, const std::string& out_stem) {
  if (!std::isfinite(t)) return fail_usage("--time: time must be finite");
  if (frame < 0) return fail_usage("--frame: frame index must be non-negative");
  if (!std::filesystem::exists(model_path))
    return fail_usage("--model: file does not exist: " + model_path);
  const FittedModel model = read_model(model_path);
  if (frame >= static_cast<int>(model.cameras.size()))
    return fail_usage("--frame: index " + std::to_string(frame) + " out of range (model has " +
                      std::to_string(model.cameras.size()) + " frames)");

  const FlowMap flow = flow_from_model(model, frame, t);
  std::string stem = out_stem;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".pfm") == 0)
    stem.resize(stem.size() - 4);

  Image u(flow.flow.height(), flow.flow.width(), 1);
  Image v(flow.flow.height(), flow.flow.width(), 1);
  for (int y = 0; y < flow.flow.height(); ++y) {
    for (int x = 0; x < flow.flow.width(); ++x) {
      u.at(y, x) = flow.flow.at(y, x, 0);
      v.at(y, x) = flow.flow.at(y, x, 1);
    }
  }
  write_pfm(stem + ".u.pfm", u);
  write_pfm(stem + ".v.pfm", v);
  std::printf("flow: wrote %s.u.pfm and %s.v.pfm\n", stem.c_str(), stem.c_str());
  return 0;
}

int run_segment(const std::string& model_path, int frame, double t, double threshold,
                const std::string& out_path) {
  if (!(threshold > 0.0)) return fail_usage("--threshold: threshold must be positive");
  if (!std::isfinite(t)) return fail_usage("--time: time must be finite");
  if (frame < 0) return fail_usage("--frame: frame index must be non-negative");
  if (!std::filesystem::exists(model_path))
    return fail_usage("--model: file does not exist: " + model_path);
  const FittedModel model = read_model(model_path);
  if (frame >= static_cast<int>(model.cameras.size()))
    return fail_usage("--frame: index " + std::to_string(frame) + " out of range (model has " +
                      std::to_string(model.cameras.size()) + " frames)");

  const Mask mask = segment_model(model, frame, t, threshold);
  Image image(mask.height(), mask.width(), 1);
  int moving = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      image.at(y, x) = mask.at(y, x) ? 1.0 : 0.0;
      moving += mask.at(y, x) ? 1 : 0;
    }
  }
  write_png(out_path, image);
  std::printf("segment: wrote %s (%d of %d pixels moving)\n", out_path.c_str(), moving,
              mask.height() * mask.width());
  return 0;
}

int run_gradcheck(const std::string& module) {
  std::vector<std::pair<std::string, std::vector<GradCheckResult>>> suites;
  if (module.empty() || module == "rasterizer")
    suites.emplace_back("rasterizer", gradcheck_rasterizer());
  if (module.empty() || module == "losses") suites.emplace_back("losses", gradcheck_losses());
  if (module.empty() || module == "head") suites.emplace_back("head", gradcheck_head());

  bool all_passed = true;
  for (const auto& [name, results] : suites) {
    for (const GradCheckResult& result : results) {
      const bool ok = result.passed();
      all_passed = all_passed && ok;
      std::printf("%-12s %-26s max relative error %.3e%s\n", name.c_str(), result.group.c_str(),
                  result.max_rel_error, ok ? "" : "  FAIL");
    }
  }
  std::printf("gradcheck: %s (tolerance %g)\n", all_passed ? "PASS" : "FAIL",
              kGradCheckTolerance);
  return all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splat4d: motion-aware dynamic gaussian splatting"};
  app.require_subcommand(1);

  std::string spec_path, scene_dir, config_path, model_path, camera_arg, out_path, report_path;
  std::string background_arg, module;
  double t = 0.0;
  double threshold = 0.05;
  int frame = 0;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic scene");
  gen->add_option("--spec", spec_path, "Scene spec JSON")->required();
  gen->add_option("--out", out_path, "Output scene directory")->required();

  CLI::App* fit = app.add_subcommand("fit", "Fit a model to a scene");
  fit->add_option("--scene", scene_dir, "Scene directory")->required();
  fit->add_option("--config", config_path, "Fit config JSON")->required();
  fit->add_option("--out", out_path, "Output model file")->required();

  CLI::App* render = app.add_subcommand("render", "Render a fitted model");
  render->add_option("--model", model_path, "Fitted model file")->required();
  render->add_option("--camera", camera_arg, "Camera index or camera JSON file")->required();
  render->add_option("--time", t, "Query time")->required();
  render->add_option("--out", out_path, "Output PNG")->required();
  render->add_option("--background", background_arg, "Background color r,g,b (default 0,0,0)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a fitted model");
  eval->require_subcommand(1);
  CLI::App* eval_nvs_cmd = eval->add_subcommand("nvs", "Novel-view PSNR/SSIM");
  CLI::App* eval_track_cmd = eval->add_subcommand("track", "3D tracking EPE/delta");
  for (CLI::App* sub : {eval_nvs_cmd, eval_track_cmd}) {
    sub->add_option("--model", model_path, "Fitted model file")->required();
    sub->add_option("--scene", scene_dir, "Scene directory with ground truth")->required();
    sub->add_option("--report", report_path, "Report path (writes text and .json)")->required();
  }

  CLI::App* flow = app.add_subcommand("flow", "Scene flow toward a query time");
  flow->add_option("--model", model_path, "Fitted model file")->required();
  flow->add_option("--frame", frame, "Source frame index")->required();
  flow->add_option("--time", t, "Query time")->required();
  flow->add_option("--out", out_path, "Output PFM pair stem")->required();

  CLI::App* segment = app.add_subcommand("segment", "Moving-object mask");
  segment->add_option("--model", model_path, "Fitted model file")->required();
  segment->add_option("--time", t, "Query time")->required();
  segment->add_option("--threshold", threshold, "Motion norm threshold, scene units")->required();
  segment->add_option("--out", out_path, "Output PNG mask")->required();
  segment->add_option("--frame", frame, "Source frame index (default 0)");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--module", module, "rasterizer | losses | head (default all)")
      ->check(CLI::IsMember({"rasterizer", "losses", "head"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen(spec_path, out_path);
    if (fit->parsed()) return run_fit(scene_dir, config_path, out_path);
    if (render->parsed()) return run_render(model_path, camera_arg, t, out_path, background_arg);
    if (eval->parsed())
      return run_eval(eval_nvs_cmd->parsed(), model_path, scene_dir, report_path);
    if (flow->parsed()) return run_flow(model_path, frame, t, out_path);
    if (segment->parsed()) return run_segment(model_path, frame, t, threshold, out_path);
    if (gradcheck->parsed()) return run_gradcheck(module);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
