// Copyright 2026 The memloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "memloc/scene_memory.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "memloc/errors.hpp"

namespace memloc {

namespace fs = std::filesystem;
using nlohmann::json;

void CameraIntrinsics::validate() const {
  require(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive");
  require(width > 0 && height > 0, "intrinsics: image size must be positive");
  require(cx >= 0 && cx < width && cy >= 0 && cy < height, "intrinsics: principal point outside image");
}

CameraIntrinsics CameraIntrinsics::from_hfov(int width, int height, double hfov_deg) {
  require(hfov_deg > 0 && hfov_deg < 180, "hfov must be in (0, 180)");
  const double f = 0.5 * width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
  CameraIntrinsics k{f, f, 0.5 * (width - 1), 0.5 * (height - 1), width, height};
  k.validate();
  return k;
}

Pose Pose::from_row_major(std::span<const double, 16> m) {
  Pose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = m[r * 4 + c];
    p.translation(r) = m[r * 4 + 3];
  }
  p.validate();
  return p;
}

std::array<double, 16> Pose::to_row_major() const {
  std::array<double, 16> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r * 4 + c] = rotation(r, c);
    m[r * 4 + 3] = translation(r);
  }
  m[15] = 1.0;
  return m;
}

void Pose::validate() const {
  require(rotation.allFinite() && translation.allFinite(), "pose: non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  require(ortho <= 1e-6, "pose: rotation is not orthonormal");
  require(std::abs(rotation.determinant() - 1.0) <= 1e-6, "pose: rotation determinant is not +1");
}

void DepthMap::validate() const {
  require(width > 0 && height > 0, "depth: empty map");
  require(values.size() == static_cast<std::size_t>(width) * height, "depth: buffer size mismatch");
  require(quantization > 0, "depth: quantization must be positive");
  for (float z : values) require(std::isfinite(z) && z >= 0.0f, "depth: values must be finite and >= 0");
}

Image16 DepthMap::encode() const {
  Image16 img{width, height, std::vector<std::uint16_t>(values.size(), 0)};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double units = std::round(values[i] / quantization);
    img.data[i] = (units > 0 && units <= 65535.0) ? static_cast<std::uint16_t>(units) : 0;
  }
  return img;
}

DepthMap DepthMap::decode(const Image16& img, double quant) {
  DepthMap d(img.width, img.height, quant);
  for (std::size_t i = 0; i < img.data.size(); ++i) d.values[i] = static_cast<float>(img.data[i] * quant);
  return d;
}

void Keyframe::validate() const {
  intrinsics.validate();
  pose.validate();
  depth.validate();
  require(depth.width == intrinsics.width && depth.height == intrinsics.height,
          "keyframe " + std::to_string(id) + ": depth size does not match intrinsics");
  if (rgb) {
    require(rgb->width == intrinsics.width && rgb->height == intrinsics.height,
            "keyframe " + std::to_string(id) + ": rgb size does not match intrinsics");
  }
}

PoseDelta pose_delta(const Pose& a, const Pose& b) {
  const double trace = (a.rotation.transpose() * b.rotation).trace();
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  return {std::acos(c) * 180.0 / std::numbers::pi, (a.translation - b.translation).norm()};
}

void KeyframeSelectionConfig::validate() const {
  if (!(theta_rot_deg > 0 && theta_trans_m > 0)) fail(ErrorCode::kConfig, "keyframe thresholds must be positive");
}

// Deltas this close to a threshold are rounding noise from acos and sums, and
// count as equal to it (so they do not exceed it).
constexpr double kRotSlackDeg = 1e-6;
constexpr double kTransSlackM = 1e-9;

std::vector<std::size_t> select_keyframes(std::span<const Pose> trajectory, const KeyframeSelectionConfig& cfg) {
  cfg.validate();
  if (trajectory.empty()) fail(ErrorCode::kInvalidArgument, "empty trajectory");
  std::vector<std::size_t> accepted{0};
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const PoseDelta d = pose_delta(trajectory[accepted.back()], trajectory[i]);
    if (d.rot_deg > cfg.theta_rot_deg + kRotSlackDeg || d.trans_m > cfg.theta_trans_m + kTransSlackM) {
      accepted.push_back(i);
    }
  }
  return accepted;
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

Keyframe downsample(const Keyframe& kf, int factor) {
  require(factor >= 1, "downsample: factor must be >= 1");
  if (factor == 1) return kf;

  Keyframe out = kf;
  const int w = ceil_div(kf.intrinsics.width, factor);
  const int h = ceil_div(kf.intrinsics.height, factor);
  out.intrinsics = {kf.intrinsics.fx / factor, kf.intrinsics.fy / factor, kf.intrinsics.cx / factor,
                    kf.intrinsics.cy / factor, w, h};

  out.depth = DepthMap(w, h, kf.depth.quantization);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) out.depth.at(u, v) = kf.depth.at(u * factor, v * factor);
  }

  if (kf.rgb) {
    const Image8& src = *kf.rgb;
    Image8 dst{w, h, src.channels, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * src.channels)};
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int u1 = std::min(src.width, (u + 1) * factor);
        const int v1 = std::min(src.height, (v + 1) * factor);
        for (int c = 0; c < src.channels; ++c) {
          unsigned sum = 0, n = 0;
          for (int y = v * factor; y < v1; ++y) {
            for (int x = u * factor; x < u1; ++x, ++n) sum += src.at(x, y, c);
          }
          dst.data[(static_cast<std::size_t>(v) * w + u) * src.channels + c] =
              static_cast<std::uint8_t>((sum + n / 2) / n);
        }
      }
    }
    out.rgb = std::move(dst);
  }
  return out;
}

SceneMemory::SceneMemory(std::string scene_id, std::vector<Keyframe> keyframes)
    : scene_id_(std::move(scene_id)), keyframes_(std::move(keyframes)) {
  require(!keyframes_.empty(), "scene memory needs at least one keyframe");
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    keyframes_[i].validate();
    if (i > 0) require(keyframes_[i].id > keyframes_[i - 1].id, "scene memory: keyframe ids must be strictly increasing");
  }
}

const Keyframe& SceneMemory::by_id(std::int64_t id) const {
  auto it = std::lower_bound(keyframes_.begin(), keyframes_.end(), id,
                             [](const Keyframe& k, std::int64_t v) { return k.id < v; });
  if (it == keyframes_.end() || it->id != id) fail(ErrorCode::kNotFound, "no keyframe with id " + std::to_string(id));
  return *it;
}

bool SceneMemory::contains(std::int64_t id) const {
  auto it = std::lower_bound(keyframes_.begin(), keyframes_.end(), id,
                             [](const Keyframe& k, std::int64_t v) { return k.id < v; });
  return it != keyframes_.end() && it->id == id;
}

std::string manifest_line(const ManifestRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["rgb"] = rec.rgb;
  j["depth"] = rec.depth;
  j["pose"] = rec.pose;
  j["fx"] = rec.fx;
  j["fy"] = rec.fy;
  j["cx"] = rec.cx;
  j["cy"] = rec.cy;
  j["width"] = rec.width;
  j["height"] = rec.height;
  j["depth_scale"] = rec.depth_scale;
  return j.dump();
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open manifest '" + path + "'");
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestRecord r;
      r.id = j.at("id").get<std::int64_t>();
      r.rgb = j.at("rgb").get<std::string>();
      r.depth = j.at("depth").get<std::string>();
      const auto pose = j.at("pose").get<std::vector<double>>();
      if (pose.size() != 16) throw std::runtime_error("pose must have 16 entries");
      std::copy(pose.begin(), pose.end(), r.pose.begin());
      r.fx = j.at("fx").get<double>();
      r.fy = j.at("fy").get<double>();
      r.cx = j.at("cx").get<double>();
      r.cy = j.at("cy").get<double>();
      r.width = j.at("width").get<int>();
      r.height = j.at("height").get<int>();
      r.depth_scale = j.at("depth_scale").get<double>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      fail(ErrorCode::kIo, path + ":" + std::to_string(lineno) + ": bad manifest record: " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::string& path, std::span<const ManifestRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write manifest '" + path + "'");
  for (const auto& r : records) out << manifest_line(r) << '\n';
}

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

}  // namespace

SceneMemory load_scene(const std::string& manifest_path, bool load_rgb) {
  const auto records = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<Keyframe> frames;
  frames.reserve(records.size());
  for (const auto& r : records) {
    Keyframe kf;
    kf.id = r.id;
    kf.rgb_ref = resolve(base, r.rgb);
    kf.depth_ref = resolve(base, r.depth);
    kf.intrinsics = {r.fx, r.fy, r.cx, r.cy, r.width, r.height};
    try {
      kf.pose = Pose::from_row_major(r.pose);
    } catch (const Error& e) {
      fail(ErrorCode::kIo, "frame " + std::to_string(r.id) + ": " + e.what());
    }
    if (!(r.depth_scale > 0)) fail(ErrorCode::kIo, "frame " + std::to_string(r.id) + ": depth_scale must be positive");
    kf.depth = DepthMap::decode(read_png16(kf.depth_ref), r.depth_scale);
    if (load_rgb) kf.rgb = read_png8(kf.rgb_ref, 3);
    frames.push_back(std::move(kf));
  }
  if (frames.empty()) fail(ErrorCode::kIo, "manifest '" + manifest_path + "' has no frames");
  return SceneMemory(fs::path(manifest_path).stem().string(), std::move(frames));
}

std::vector<ManifestRecord> write_keyframes(const std::string& dir, std::span<const Keyframe> keyframes) {
  fs::create_directories(fs::path(dir) / "rgb");
  fs::create_directories(fs::path(dir) / "depth");
  std::vector<ManifestRecord> records;
  records.reserve(keyframes.size());
  for (const auto& kf : keyframes) {
    require(kf.rgb.has_value(), "write_keyframes: keyframe " + std::to_string(kf.id) + " has no rgb pixels");
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(kf.id));
    ManifestRecord r;
    r.id = kf.id;
    r.rgb = std::string("rgb/") + name;
    r.depth = std::string("depth/") + name;
    write_png((fs::path(dir) / r.rgb).string(), *kf.rgb);
    write_png16((fs::path(dir) / r.depth).string(), kf.depth.encode());
    r.pose = kf.pose.to_row_major();
    r.fx = kf.intrinsics.fx;
    r.fy = kf.intrinsics.fy;
    r.cx = kf.intrinsics.cx;
    r.cy = kf.intrinsics.cy;
    r.width = kf.intrinsics.width;
    r.height = kf.intrinsics.height;
    r.depth_scale = kf.depth.quantization;
    records.push_back(std::move(r));
  }
  return records;
}

StorageStats storage_stats(const SceneMemory& mem) {
  StorageStats s;
  for (const auto& kf : mem.keyframes()) {
    std::uint64_t bytes = kPoseRecordBytes;
    for (const std::string* ref : {&kf.rgb_ref, &kf.depth_ref}) {
      std::error_code ec;
      const auto size = fs::file_size(*ref, ec);
      if (ec) fail(ErrorCode::kIo, "frame " + std::to_string(kf.id) + ": missing file '" + *ref + "'");
      bytes += size;
    }
    s.total_bytes += bytes;
    ++s.frame_count;
  }
  return s;
}

}  // namespace memloc
