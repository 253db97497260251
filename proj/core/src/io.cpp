// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splat4d/errors.hpp"

namespace splat4d {

namespace {

static_assert(std::endian::native == std::endian::little,
              "the binary formats assume a little-endian host");

using ordered_json = nlohmann::ordered_json;

constexpr const char* kSceneVersion = "splat4d-scene/1";
constexpr const char* kModelVersion = "splat4d-fit/1";
constexpr const char* kTracksVersion = "splat4d-tracks/1";
constexpr const char* kMasksVersion = "splat4d-masks/1";
constexpr double kSphericalHarmonicC0 = 0.28209479177387814;

// Token scanner over a loaded file that reports byte offsets in errors.
class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_ + ": " + what + " at byte " + std::to_string(pos_));
  }

  bool at_end() const { return pos_ >= bytes_.size(); }

  std::string token() {
    while (!at_end() && std::isspace(byte(pos_))) {
      ++pos_;
    }
    if (at_end()) {
      fail("unexpected end of file");
    }
    const std::size_t start = pos_;
    while (!at_end() && !std::isspace(byte(pos_))) {
      ++pos_;
    }
    return bytes_.substr(start, pos_ - start);
  }

  void expect(const char* literal) {
    const std::string t = token();
    if (t != literal) {
      pos_ -= t.size();
      fail("expected '" + std::string(literal) + "', found '" + t + "'");
    }
  }

  long next_int(const char* what) {
    const std::string t = token();
    char* end = nullptr;
    const long value = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) {
      pos_ -= t.size();
      fail("expected " + std::string(what) + ", found '" + t + "'");
    }
    return value;
  }

  double next_double(const char* what) {
    const std::string t = token();
    char* end = nullptr;
    const double value = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) {
      pos_ -= t.size();
      fail("expected " + std::string(what) + ", found '" + t + "'");
    }
    return value;
  }

  // The single whitespace byte separating a text header from binary data.
  void single_whitespace() {
    if (at_end() || !std::isspace(byte(pos_))) {
      fail("expected one whitespace byte before binary data");
    }
    ++pos_;
  }

  const unsigned char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      fail("truncated data, " + std::to_string(n) + " bytes expected");
    }
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
    pos_ += n;
    return p;
  }

  void expect_end() {
    if (!at_end()) {
      fail("trailing bytes after payload");
    }
  }

 private:
  unsigned char byte(std::size_t i) const { return static_cast<unsigned char>(bytes_[i]); }

  const std::string& bytes_;
  const std::string path_;
  std::size_t pos_ = 0;
};

void append_f32(std::string& out, double value) {
  const float f = static_cast<float>(value);
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

double take_f32(Cursor& cursor) {
  float f;
  std::memcpy(&f, cursor.take(4), 4);
  return static_cast<double>(f);
}

void append_i32(std::string& out, std::int32_t value) {
  char b[4];
  std::memcpy(b, &value, 4);
  out.append(b, 4);
}

std::int32_t take_i32(Cursor& cursor) {
  std::int32_t v;
  std::memcpy(&v, cursor.take(4), 4);
  return v;
}

unsigned char quantize8(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ordered_json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

ordered_json parse_json_text(const std::string& text, const std::string& path,
                             std::size_t base_offset) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": byte " + std::to_string(base_offset + e.byte) + ": " + e.what());
  }
}

ordered_json vec3_to_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const ordered_json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(context + " must be an array of 3 numbers");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

const ordered_json& require_field(const ordered_json& j, const char* name,
                                  const std::string& context) {
  const auto it = j.find(name);
  if (it == j.end()) {
    throw ParseError(context + ": missing field '" + std::string(name) + "'");
  }
  return *it;
}

ordered_json camera_to_json(const Camera& camera) {
  ordered_json j;
  ordered_json rotation = ordered_json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rotation.push_back(camera.rotation(r, c));
    }
  }
  j["rotation"] = rotation;
  j["translation"] = vec3_to_json(camera.translation);
  j["fx"] = camera.fx;
  j["fy"] = camera.fy;
  j["cx"] = camera.cx;
  j["cy"] = camera.cy;
  j["timestamp"] = camera.timestamp;
  return j;
}

Camera camera_from_json(const ordered_json& j, const std::string& context, int width,
                        int height) {
  Camera camera;
  const ordered_json& rotation = require_field(j, "rotation", context);
  if (!rotation.is_array() || rotation.size() != 9) {
    throw ParseError(context + ": camera rotation must hold 9 row-major numbers");
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      camera.rotation(r, c) = rotation[r * 3 + c].get<double>();
    }
  }
  camera.translation = vec3_from_json(require_field(j, "translation", context),
                                      context + ": camera translation");
  camera.fx = require_field(j, "fx", context).get<double>();
  camera.fy = require_field(j, "fy", context).get<double>();
  camera.cx = require_field(j, "cx", context).get<double>();
  camera.cy = require_field(j, "cy", context).get<double>();
  camera.timestamp = require_field(j, "timestamp", context).get<double>();
  camera.width = j.value("width", width);
  camera.height = j.value("height", height);
  return camera;
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.ppm", index);
  return buf;
}

std::string depth_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "depth_%03d.pfm", index);
  return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) {
      throw MissingFile("file not found: " + path);
    }
    throw IoError("cannot open " + path + " for reading");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failed for " + path);
  }
  return bytes;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open " + tmp + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      throw IoError("write failed for " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

void write_ppm(const std::string& path, const Image& image) {
  if (image.channels() != 3) {
    throw ShapeMismatch("write_ppm: image must have 3 channels");
  }
  std::string bytes = "P6\n" + std::to_string(image.width()) + " " +
                      std::to_string(image.height()) + "\n255\n";
  bytes.reserve(bytes.size() + image.size());
  for (double v : image.raw()) {
    bytes.push_back(static_cast<char>(quantize8(v)));
  }
  write_file_atomic(path, bytes);
}

Image read_ppm(const std::string& path) {
  const std::string bytes = read_file(path);
  Cursor cursor(bytes, path);
  cursor.expect("P6");
  const long width = cursor.next_int("image width");
  const long height = cursor.next_int("image height");
  const long maxval = cursor.next_int("max pixel value");
  if (width <= 0 || height <= 0) {
    cursor.fail("image dimensions must be positive");
  }
  if (maxval != 255) {
    cursor.fail("only maxval 255 is supported, found " + std::to_string(maxval));
  }
  cursor.single_whitespace();
  const unsigned char* data =
      cursor.take(static_cast<std::size_t>(width) * height * 3);
  cursor.expect_end();
  Image image(static_cast<int>(height), static_cast<int>(width), 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    image.raw()[i] = data[i] / 255.0;
  }
  return image;
}

void write_pfm(const std::string& path, const Image& image) {
  if (image.channels() != 1) {
    throw ShapeMismatch("write_pfm: image must have 1 channel");
  }
  std::string bytes = "Pf\n" + std::to_string(image.width()) + " " +
                      std::to_string(image.height()) + "\n-1.0\n";
  // PFM rows run bottom-up.
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      append_f32(bytes, image.at(y, x));
    }
  }
  write_file_atomic(path, bytes);
}

Image read_pfm(const std::string& path) {
  const std::string bytes = read_file(path);
  Cursor cursor(bytes, path);
  const std::string magic = cursor.token();
  if (magic == "PF") {
    cursor.fail("color PFM is not supported, expected grayscale 'Pf'");
  }
  if (magic != "Pf") {
    cursor.fail("not a PFM file, expected magic 'Pf'");
  }
  const long width = cursor.next_int("image width");
  const long height = cursor.next_int("image height");
  const double scale = cursor.next_double("scale");
  if (width <= 0 || height <= 0) {
    cursor.fail("image dimensions must be positive");
  }
  if (scale >= 0.0) {
    cursor.fail("big-endian PFM (non-negative scale) is not supported; expected little-endian "
                "with scale -1.0");
  }
  cursor.single_whitespace();
  Image image(static_cast<int>(height), static_cast<int>(width), 1);
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      image.at(y, x) = take_f32(cursor);
    }
  }
  cursor.expect_end();
  return image;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ShapeMismatch("write_png: image must have 1 or 3 channels");
  }
  std::vector<unsigned char> pixels(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    pixels[i] = quantize8(image.raw()[i]);
  }
  png_image spec;
  std::memset(&spec, 0, sizeof(spec));
  spec.version = PNG_IMAGE_VERSION;
  spec.width = static_cast<png_uint_32>(image.width());
  spec.height = static_cast<png_uint_32>(image.height());
  spec.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&spec, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("png encode failed for " + path + ": " + spec.message);
  }
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&spec, bytes.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("png encode failed for " + path + ": " + spec.message);
  }
  bytes.resize(size);
  write_file_atomic(path, bytes);
}

Image read_png(const std::string& path) {
  const std::string bytes = read_file(path);
  png_image spec;
  std::memset(&spec, 0, sizeof(spec));
  spec.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&spec, bytes.data(), bytes.size())) {
    throw ParseError(path + ": " + spec.message);
  }
  const int channels = PNG_IMAGE_SAMPLE_CHANNELS(spec.format) >= 3 ? 3 : 1;
  spec.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(spec));
  if (!png_image_finish_read(&spec, nullptr, pixels.data(), 0, nullptr)) {
    throw ParseError(path + ": " + spec.message);
  }
  Image image(static_cast<int>(spec.height), static_cast<int>(spec.width), channels);
  for (std::size_t i = 0; i < image.size(); ++i) {
    image.raw()[i] = pixels[i] / 255.0;
  }
  return image;
}

void write_tracks(const std::string& path, const TrackSet& tracks) {
  std::string bytes = std::string(kTracksVersion) + "\n" + std::to_string(tracks.n_points) + " " +
                      std::to_string(tracks.n_frames) + "\n";
  char line[128];
  for (int p = 0; p < tracks.n_points; ++p) {
    for (int n = 0; n < tracks.n_frames; ++n) {
      const Vec3 point = tracks.point(p, n);
      // 9 significant digits identify any float32 uniquely.
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %d\n", point.x(), point.y(), point.z(),
                    tracks.visible(p, n) ? 1 : 0);
      bytes += line;
    }
  }
  write_file_atomic(path, bytes);
}

TrackSet read_tracks(const std::string& path) {
  const std::string bytes = read_file(path);
  Cursor cursor(bytes, path);
  cursor.expect(kTracksVersion);
  const long n_points = cursor.next_int("track count");
  const long n_frames = cursor.next_int("frame count");
  if (n_points < 0 || n_frames < 0) {
    cursor.fail("counts must be non-negative");
  }
  TrackSet tracks;
  tracks.n_points = static_cast<int>(n_points);
  tracks.n_frames = static_cast<int>(n_frames);
  tracks.points.resize(static_cast<std::size_t>(n_points) * n_frames * 3);
  tracks.visibility.resize(static_cast<std::size_t>(n_points) * n_frames);
  for (std::size_t i = 0; i < tracks.visibility.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      // Snap to float32: the text carries exactly float precision.
      tracks.points[i * 3 + c] =
          static_cast<double>(static_cast<float>(cursor.next_double("track coordinate")));
    }
    tracks.visibility[i] = cursor.next_int("visibility flag") != 0 ? 1 : 0;
  }
  return tracks;
}

void write_masks(const std::string& path, const std::vector<Mask>& masks) {
  if (masks.empty()) {
    throw ShapeMismatch("write_masks: mask stack is empty");
  }
  const int height = masks.front().height();
  const int width = masks.front().width();
  std::string bytes = std::string(kMasksVersion) + "\n" + std::to_string(masks.size()) + " " +
                      std::to_string(height) + " " + std::to_string(width) + "\n";
  for (const Mask& mask : masks) {
    if (mask.height() != height || mask.width() != width || mask.channels() != 1) {
      throw ShapeMismatch("write_masks: all masks must share one H x W x 1 shape");
    }
    for (std::uint8_t v : mask.raw()) {
      bytes.push_back(static_cast<char>(v != 0 ? 1 : 0));
    }
  }
  write_file_atomic(path, bytes);
}

std::vector<Mask> read_masks(const std::string& path) {
  const std::string bytes = read_file(path);
  Cursor cursor(bytes, path);
  cursor.expect(kMasksVersion);
  const long count = cursor.next_int("mask count");
  const long height = cursor.next_int("mask height");
  const long width = cursor.next_int("mask width");
  if (count <= 0 || height <= 0 || width <= 0) {
    cursor.fail("mask dimensions must be positive");
  }
  cursor.single_whitespace();
  std::vector<Mask> masks;
  masks.reserve(count);
  for (long i = 0; i < count; ++i) {
    const unsigned char* data = cursor.take(static_cast<std::size_t>(height) * width);
    Mask mask(static_cast<int>(height), static_cast<int>(width), 1);
    for (std::size_t k = 0; k < mask.size(); ++k) {
      mask.raw()[k] = data[k] != 0 ? 1 : 0;
    }
    masks.push_back(std::move(mask));
  }
  cursor.expect_end();
  return masks;
}

void write_scene(const SceneBundle& bundle, const std::string& dir) {
  if (bundle.frames.size() != bundle.cameras.size()) {
    throw ShapeMismatch("write_scene: frames and cameras must align");
  }
  if (!bundle.depths.empty() && bundle.depths.size() != bundle.frames.size()) {
    throw ShapeMismatch("write_scene: depth count must match frame count");
  }
  if (!bundle.masks.empty() && bundle.masks.size() != bundle.frames.size()) {
    throw ShapeMismatch("write_scene: mask count must match frame count");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir + ": " + ec.message());
  }
  const std::filesystem::path base(dir);

  ordered_json manifest;
  manifest["version"] = kSceneVersion;
  manifest["n_frames"] = bundle.n_frames();
  manifest["height"] = bundle.height();
  manifest["width"] = bundle.width();
  ordered_json frames = ordered_json::array();
  for (int f = 0; f < bundle.n_frames(); ++f) {
    ordered_json record;
    record["image"] = frame_name(f);
    write_ppm((base / frame_name(f)).string(), bundle.frames[f]);
    if (bundle.has_depths()) {
      record["depth"] = depth_name(f);
      write_pfm((base / depth_name(f)).string(), bundle.depths[f]);
    }
    record["camera"] = camera_to_json(bundle.cameras[f]);
    frames.push_back(record);
  }
  manifest["frames"] = frames;
  if (!bundle.tracks.empty()) {
    manifest["tracks"] = "tracks.txt";
    write_tracks((base / "tracks.txt").string(), bundle.tracks);
  }
  if (!bundle.masks.empty()) {
    manifest["masks"] = "masks.bin";
    write_masks((base / "masks.bin").string(), bundle.masks);
  }
  write_file_atomic((base / "scene.json").string(), manifest.dump(2) + "\n");
}

SceneBundle read_scene(const std::string& dir) {
  const std::filesystem::path base(dir);
  const std::string manifest_path = (base / "scene.json").string();
  const ordered_json manifest = parse_json_file(manifest_path);

  const std::string version =
      require_field(manifest, "version", manifest_path).get<std::string>();
  if (version != kSceneVersion) {
    throw ParseError(manifest_path + ": unsupported version '" + version + "', expected " +
                     kSceneVersion);
  }
  const int n_frames = require_field(manifest, "n_frames", manifest_path).get<int>();
  const int height = require_field(manifest, "height", manifest_path).get<int>();
  const int width = require_field(manifest, "width", manifest_path).get<int>();
  const ordered_json& frames = require_field(manifest, "frames", manifest_path);
  if (!frames.is_array() || static_cast<int>(frames.size()) != n_frames) {
    throw ShapeMismatch(manifest_path + ": manifest says " + std::to_string(n_frames) +
                        " frames but lists " + std::to_string(frames.size()));
  }

  SceneBundle bundle;
  int n_depths = 0;
  for (int f = 0; f < n_frames; ++f) {
    const ordered_json& record = frames[f];
    const std::string context = manifest_path + ": frame " + std::to_string(f);
    const std::string image_name = require_field(record, "image", context).get<std::string>();
    Image image = read_ppm((base / image_name).string());
    if (image.height() != height || image.width() != width) {
      throw ShapeMismatch(context + ": image " + image_name + " is " +
                          std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                          ", manifest says " + std::to_string(width) + "x" +
                          std::to_string(height));
    }
    bundle.frames.push_back(std::move(image));
    if (record.contains("depth")) {
      Image depth = read_pfm((base / record["depth"].get<std::string>()).string());
      if (depth.height() != height || depth.width() != width) {
        throw ShapeMismatch(context + ": depth map does not match the manifest resolution");
      }
      bundle.depths.push_back(std::move(depth));
      ++n_depths;
    }
    bundle.cameras.push_back(
        camera_from_json(require_field(record, "camera", context), context, width, height));
  }
  if (n_depths != 0 && n_depths != n_frames) {
    throw ShapeMismatch(manifest_path + ": " + std::to_string(n_depths) + " of " +
                        std::to_string(n_frames) + " frames have depth; need all or none");
  }
  if (manifest.contains("tracks")) {
    bundle.tracks = read_tracks((base / manifest["tracks"].get<std::string>()).string());
    if (bundle.tracks.n_frames != n_frames) {
      throw ShapeMismatch(manifest_path + ": tracks cover " +
                          std::to_string(bundle.tracks.n_frames) + " frames, scene has " +
                          std::to_string(n_frames));
    }
  }
  if (manifest.contains("masks")) {
    bundle.masks = read_masks((base / manifest["masks"].get<std::string>()).string());
    if (static_cast<int>(bundle.masks.size()) != n_frames) {
      throw ShapeMismatch(manifest_path + ": mask stack size does not match frame count");
    }
    if (!bundle.masks.empty() &&
        (bundle.masks.front().height() != height || bundle.masks.front().width() != width)) {
      throw ShapeMismatch(manifest_path + ": mask resolution does not match the manifest");
    }
  }
  return bundle;
}

void write_model(const FittedModel& model, const std::string& path) {
  const int n_gaussians = model.n_gaussians();
  const int n_keyframes = model.field.n_keyframes();
  if (model.field.n_gaussians != n_gaussians) {
    throw ShapeMismatch("write_model: deformation field is sized for " +
                        std::to_string(model.field.n_gaussians) + " gaussians, model has " +
                        std::to_string(n_gaussians));
  }
  if (model.field.deltas.size() !=
      static_cast<std::size_t>(n_keyframes) * n_gaussians * kDeltaDim) {
    throw ShapeMismatch("write_model: deformation delta array length is inconsistent");
  }
  if (!model.associations.empty() &&
      model.associations.size() != static_cast<std::size_t>(n_gaussians)) {
    throw ShapeMismatch("write_model: associations must be empty or one per gaussian");
  }

  ordered_json header;
  header["version"] = kModelVersion;
  header["n_gaussians"] = n_gaussians;
  header["n_keyframes"] = n_keyframes;
  header["keyframe_times"] = model.field.keyframe_times;
  header["normalization_scale"] = model.normalization_scale;
  header["height"] = model.height;
  header["width"] = model.width;
  header["has_associations"] = !model.associations.empty();
  if (!model.cameras.empty()) {
    ordered_json cameras = ordered_json::array();
    for (const Camera& camera : model.cameras) {
      cameras.push_back(camera_to_json(camera));
    }
    header["cameras"] = cameras;
  }

  std::string bytes = std::string(kModelVersion) + "\n" + header.dump() + "\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(n_gaussians) * 14 * 4 +
                model.field.deltas.size() * 4);
  for (const SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      append_f32(bytes, p.position(d));
    }
  }
  for (const SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 4; ++d) {
      append_f32(bytes, p.rotation(d));
    }
  }
  for (const SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      append_f32(bytes, p.log_scale(d));
    }
  }
  for (const SplatterPixel& p : model.pixels) {
    append_f32(bytes, p.opacity_logit);
  }
  for (const SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      append_f32(bytes, p.color(d));
    }
  }
  for (double d : model.field.deltas) {
    append_f32(bytes, d);
  }
  for (const PixelAssociation& a : model.associations) {
    append_i32(bytes, a.frame);
    append_i32(bytes, a.x);
    append_i32(bytes, a.y);
  }
  write_file_atomic(path, bytes);
}

FittedModel read_model(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::size_t magic_end = bytes.find('\n');
  if (magic_end == std::string::npos || bytes.substr(0, magic_end) != kModelVersion) {
    throw ParseError(path + ": missing '" + std::string(kModelVersion) + "' magic at byte 0");
  }
  const std::size_t header_start = magic_end + 1;
  const std::size_t header_end = bytes.find('\n', header_start);
  if (header_end == std::string::npos) {
    throw ParseError(path + ": missing header line at byte " + std::to_string(header_start));
  }
  const ordered_json header = parse_json_text(
      bytes.substr(header_start, header_end - header_start), path, header_start);

  FittedModel model;
  const int n_gaussians = require_field(header, "n_gaussians", path).get<int>();
  const int n_keyframes = require_field(header, "n_keyframes", path).get<int>();
  if (n_gaussians < 0 || n_keyframes < 0) {
    throw ParseError(path + ": negative counts in header");
  }
  const std::vector<double> times =
      require_field(header, "keyframe_times", path).get<std::vector<double>>();
  if (static_cast<int>(times.size()) != n_keyframes) {
    throw ShapeMismatch(path + ": header lists " + std::to_string(times.size()) +
                        " keyframe times for " + std::to_string(n_keyframes) + " keyframes");
  }
  model.normalization_scale = require_field(header, "normalization_scale", path).get<double>();
  model.height = header.value("height", 0);
  model.width = header.value("width", 0);
  const bool has_associations = header.value("has_associations", false);
  if (header.contains("cameras")) {
    for (const ordered_json& j : header["cameras"]) {
      model.cameras.push_back(camera_from_json(j, path, model.width, model.height));
    }
  }

  const std::size_t float_count = static_cast<std::size_t>(n_gaussians) * (3 + 4 + 3 + 1 + 3) +
                                  static_cast<std::size_t>(n_keyframes) * n_gaussians * kDeltaDim;
  const std::size_t expected =
      float_count * 4 + (has_associations ? static_cast<std::size_t>(n_gaussians) * 12 : 0);
  const std::size_t payload = bytes.size() - (header_end + 1);
  if (payload != expected) {
    throw ShapeMismatch(path + ": payload is " + std::to_string(payload) +
                        " bytes, header implies " + std::to_string(expected));
  }

  const std::string data = bytes.substr(header_end + 1);
  Cursor cursor(data, path);
  model.pixels.resize(n_gaussians);
  for (SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      p.position(d) = take_f32(cursor);
    }
  }
  for (SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 4; ++d) {
      p.rotation(d) = take_f32(cursor);
    }
  }
  for (SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      p.log_scale(d) = take_f32(cursor);
    }
  }
  for (SplatterPixel& p : model.pixels) {
    p.opacity_logit = take_f32(cursor);
  }
  for (SplatterPixel& p : model.pixels) {
    for (int d = 0; d < 3; ++d) {
      p.color(d) = take_f32(cursor);
    }
  }
  model.field = DeformationField::zeros(times, n_gaussians);
  for (double& d : model.field.deltas) {
    d = take_f32(cursor);
  }
  if (has_associations) {
    model.associations.resize(n_gaussians);
    for (PixelAssociation& a : model.associations) {
      a.frame = take_i32(cursor);
      a.x = take_i32(cursor);
      a.y = take_i32(cursor);
    }
  }
  cursor.expect_end();
  return model;
}

void export_ply(const FittedModel& model, double t_q, const std::string& path) {
  static const char* kProperties[] = {"x",     "y",     "z",     "opacity", "scale_0",
                                      "scale_1", "scale_2", "rot_0", "rot_1",   "rot_2",
                                      "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"};
  const int n = model.n_gaussians();
  std::vector<DeformDelta> deltas;
  if (model.field.n_keyframes() > 0) {
    deltas = evaluate_deformation(model.field, t_q);
  } else {
    deltas.assign(n, DeformDelta{});
  }

  std::string bytes = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                      std::to_string(n) + "\n";
  for (const char* name : kProperties) {
    bytes += "property float " + std::string(name) + "\n";
  }
  bytes += "end_header\n";
  for (int g = 0; g < n; ++g) {
    const SplatterPixel& p = model.pixels[g];
    const DeformDelta& d = deltas[g];
    for (int k = 0; k < 3; ++k) {
      append_f32(bytes, p.position(k) + d.dx(k));
    }
    append_f32(bytes, p.opacity_logit);
    for (int k = 0; k < 3; ++k) {
      append_f32(bytes, p.log_scale(k) + d.dlog_scale(k));
    }
    for (int k = 0; k < 4; ++k) {
      append_f32(bytes, p.rotation(k) + d.dq(k));
    }
    for (int k = 0; k < 3; ++k) {
      append_f32(bytes, (p.color(k) - 0.5) / kSphericalHarmonicC0);
    }
  }
  write_file_atomic(path, bytes);
}

double PlyContents::value(int vertex, const std::string& property) const {
  const auto it = std::find(properties.begin(), properties.end(), property);
  if (it == properties.end()) {
    throw OutOfRange("ply has no property '" + property + "'");
  }
  const std::size_t stride = properties.size();
  return values[vertex * stride + static_cast<std::size_t>(it - properties.begin())];
}

std::vector<Vec3> PlyContents::positions() const {
  std::vector<Vec3> out(n_vertices);
  for (int v = 0; v < n_vertices; ++v) {
    out[v] = Vec3(value(v, "x"), value(v, "y"), value(v, "z"));
  }
  return out;
}

PlyContents read_ply(const std::string& path) {
  const std::string bytes = read_file(path);
  Cursor cursor(bytes, path);
  cursor.expect("ply");
  cursor.expect("format");
  cursor.expect("binary_little_endian");
  cursor.expect("1.0");
  PlyContents contents;
  for (;;) {
    const std::string keyword = cursor.token();
    if (keyword == "end_header") {
      break;
    }
    if (keyword == "comment") {
      // The rest of a comment line carries no structure; skip its tokens by
      // reading up to the newline via single tokens is ambiguous, so comments
      // are not supported in this minimal reader.
      cursor.fail("comments are not supported");
    }
    if (keyword == "element") {
      cursor.expect("vertex");
      contents.n_vertices = static_cast<int>(cursor.next_int("vertex count"));
      continue;
    }
    if (keyword == "property") {
      cursor.expect("float");
      contents.properties.push_back(cursor.token());
      continue;
    }
    cursor.fail("unexpected header keyword '" + keyword + "'");
  }
  cursor.single_whitespace();
  contents.values.resize(static_cast<std::size_t>(contents.n_vertices) *
                         contents.properties.size());
  for (float& v : contents.values) {
    v = static_cast<float>(take_f32(cursor));
  }
  cursor.expect_end();
  return contents;
}

SceneSpec read_scene_spec(const std::string& path) {
  const ordered_json j = parse_json_file(path);
  SceneSpec defaults;
  const std::uint64_t seed = j.value("seed", defaults.seed);
  const int n_frames = j.value("n_frames", defaults.n_frames);
  const int height = j.value("height", defaults.height);
  const int width = j.value("width", defaults.width);

  SceneSpec spec;
  if (j.contains("preset")) {
    const std::string preset = j["preset"].get<std::string>();
    if (preset == "static") {
      spec = static_scene_spec(seed, n_frames, height, width);
    } else if (preset == "dynamic") {
      spec = dynamic_scene_spec(seed, n_frames, height, width);
    } else {
      throw ParseError(path + ": unknown preset '" + preset + "', expected static or dynamic");
    }
  } else {
    spec.seed = seed;
    spec.n_frames = n_frames;
    spec.height = height;
    spec.width = width;
  }
  spec.n_tracks = j.value("n_tracks", spec.n_tracks);

  if (j.contains("camera")) {
    const ordered_json& c = j["camera"];
    CameraPathSpec& camera = spec.camera;
    if (c.contains("kind")) {
      const std::string kind = c["kind"].get<std::string>();
      if (kind == "orbit") {
        camera.kind = CameraPathKind::Orbit;
      } else if (kind == "linear") {
        camera.kind = CameraPathKind::Linear;
      } else {
        throw ParseError(path + ": unknown camera kind '" + kind + "'");
      }
    }
    if (c.contains("target")) {
      camera.target = vec3_from_json(c["target"], path + ": camera target");
    }
    camera.radius = c.value("radius", camera.radius);
    camera.height = c.value("height", camera.height);
    camera.arc_degrees = c.value("arc_degrees", camera.arc_degrees);
    if (c.contains("start")) {
      camera.start = vec3_from_json(c["start"], path + ": camera start");
    }
    if (c.contains("end")) {
      camera.end = vec3_from_json(c["end"], path + ": camera end");
    }
    camera.fov_degrees = c.value("fov_degrees", camera.fov_degrees);
  }

  if (j.contains("objects")) {
    spec.objects.clear();
    for (const ordered_json& o : j["objects"]) {
      ObjectSpec object;
      if (o.contains("shape")) {
        const std::string shape = o["shape"].get<std::string>();
        if (shape == "sphere") {
          object.shape = ShapeKind::Sphere;
        } else if (shape == "box") {
          object.shape = ShapeKind::Box;
        } else if (shape == "plane") {
          object.shape = ShapeKind::Plane;
        } else {
          throw ParseError(path + ": unknown shape '" + shape + "'");
        }
      }
      if (o.contains("center")) {
        object.center = vec3_from_json(o["center"], path + ": object center");
      }
      object.radius = o.value("radius", object.radius);
      if (o.contains("half_extent")) {
        object.half_extent = vec3_from_json(o["half_extent"], path + ": object half_extent");
      }
      if (o.contains("normal")) {
        object.normal = vec3_from_json(o["normal"], path + ": object normal");
      }
      if (o.contains("texture")) {
        const std::string texture = o["texture"].get<std::string>();
        if (texture == "solid") {
          object.texture = TextureKind::Solid;
        } else if (texture == "checker") {
          object.texture = TextureKind::Checker;
        } else {
          throw ParseError(path + ": unknown texture '" + texture + "'");
        }
      }
      if (o.contains("albedo")) {
        object.albedo = vec3_from_json(o["albedo"], path + ": object albedo");
      }
      if (o.contains("albedo2")) {
        object.albedo2 = vec3_from_json(o["albedo2"], path + ": object albedo2");
      }
      object.checker_scale = o.value("checker_scale", object.checker_scale);
      if (o.contains("velocity")) {
        object.velocity = vec3_from_json(o["velocity"], path + ": object velocity");
      }
      if (o.contains("rotation_axis")) {
        object.rotation_axis = vec3_from_json(o["rotation_axis"], path + ": rotation axis");
      }
      object.rotation_rate = o.value("rotation_rate", object.rotation_rate);
      spec.objects.push_back(object);
    }
  }
  return spec;
}

FitConfig read_fit_config(const std::string& path) {
  const ordered_json j = parse_json_file(path);
  FitConfig config;
  config.iterations = j.value("iterations", config.iterations);
  config.lr_position = j.value("lr_position", config.lr_position);
  config.lr_rotation = j.value("lr_rotation", config.lr_rotation);
  config.lr_log_scale = j.value("lr_log_scale", config.lr_log_scale);
  config.lr_opacity = j.value("lr_opacity", config.lr_opacity);
  config.lr_color = j.value("lr_color", config.lr_color);
  config.lr_deformation = j.value("lr_deformation", config.lr_deformation);
  config.beta1 = j.value("beta1", config.beta1);
  config.beta2 = j.value("beta2", config.beta2);
  config.epsilon = j.value("epsilon", config.epsilon);
  config.seed = j.value("seed", config.seed);
  config.subsample = j.value("subsample", config.subsample);
  config.checkpoint_interval = j.value("checkpoint_interval", config.checkpoint_interval);
  if (j.contains("background")) {
    config.background = vec3_from_json(j["background"], path + ": background");
  }
  if (j.contains("weights")) {
    const ordered_json& w = j["weights"];
    config.weights.depth = w.value("depth", config.weights.depth);
    config.weights.render = w.value("render", config.weights.render);
    config.weights.motion = w.value("motion", config.weights.motion);
    config.weights.point = w.value("point", config.weights.point);
    config.weights.distribution = w.value("distribution", config.weights.distribution);
  }
  return config;
}

Camera read_camera_file(const std::string& path, int default_width, int default_height) {
  const ordered_json j = parse_json_file(path);
  return camera_from_json(j, path, default_width, default_height);
}

void write_report(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& values) {
  std::string text;
  ordered_json j;
  char buf[64];
  for (const auto& [key, value] : values) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    text += key + "=" + buf + "\n";
    j[key] = value;
  }
  write_file_atomic(path, text);
  write_file_atomic(path + ".json", j.dump(2) + "\n");
}

}  // namespace splat4d
