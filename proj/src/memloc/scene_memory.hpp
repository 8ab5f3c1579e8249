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

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memloc/png_io.hpp"

namespace memloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;

  /// Symmetric intrinsics for a horizontal field of view in degrees.
  static CameraIntrinsics from_hfov(int width, int height, double hfov_deg);
};

/// World-from-camera rigid transform. Camera axes: +x right, +y down, +z forward.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  /// From a row-major 4x4 matrix. Validates the rotation block.
  static Pose from_row_major(std::span<const double, 16> m);
  std::array<double, 16> to_row_major() const;

  void validate() const;

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const { return rotation.transpose() * (p_world - translation); }
};

/// Depth in meters, row-major, 0 = invalid. `quantization` is the
/// meters-per-unit of the integer storage format.
struct DepthMap {
  int width = 0;
  int height = 0;
  double quantization = 0.001;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h, double quant = 0.001)
      : width(w), height(h), quantization(quant), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }

  void validate() const;
  Image16 encode() const;
  static DepthMap decode(const Image16& img, double quantization);
};

struct Keyframe {
  std::int64_t id = 0;
  std::string rgb_ref;
  std::string depth_ref;
  DepthMap depth;
  Pose pose;
  CameraIntrinsics intrinsics;
  std::optional<Image8> rgb;  // loaded pixels, when available

  void validate() const;
};

struct PoseDelta {
  double rot_deg = 0.0;
  double trans_m = 0.0;
};

PoseDelta pose_delta(const Pose& a, const Pose& b);

struct KeyframeSelectionConfig {
  double theta_rot_deg = 15.0;
  double theta_trans_m = 0.25;

  void validate() const;
};

/// Indices of accepted frames. A frame is accepted when its rotation or
/// translation relative to the last accepted frame strictly exceeds the
/// threshold; frame 0 is always accepted.
std::vector<std::size_t> select_keyframes(std::span<const Pose> trajectory, const KeyframeSelectionConfig& cfg);

/// Resolution reduction: nearest sampling for depth (pixel u' <- u'*factor),
/// block average for rgb, intrinsics divided by the factor.
Keyframe downsample(const Keyframe& kf, int factor);

/// Immutable ordered collection of keyframes.
class SceneMemory {
 public:
  SceneMemory(std::string scene_id, std::vector<Keyframe> keyframes);

  const std::string& scene_id() const { return scene_id_; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  std::size_t size() const { return keyframes_.size(); }

  /// Keyframe with the given id; throws Error(kNotFound) if absent.
  const Keyframe& by_id(std::int64_t id) const;
  bool contains(std::int64_t id) const;

 private:
  std::string scene_id_;
  std::vector<Keyframe> keyframes_;
};

/// One manifest line.
struct ManifestRecord {
  std::int64_t id = 0;
  std::string rgb;
  std::string depth;
  std::array<double, 16> pose{};
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 0.001;
};

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, std::span<const ManifestRecord> records);
/// Compact single-line JSON encoding used by write_manifest.
std::string manifest_line(const ManifestRecord& rec);

/// Loads depth for every record (rgb pixels only if `load_rgb`). Relative
/// paths resolve against the manifest's directory.
SceneMemory load_scene(const std::string& manifest_path, bool load_rgb = false);

/// Writes rgb/depth PNGs under `dir` and returns the manifest records.
std::vector<ManifestRecord> write_keyframes(const std::string& dir, std::span<const Keyframe> keyframes);

/// Bytes charged per keyframe for its pose record (16 float32).
inline constexpr std::uint64_t kPoseRecordBytes = 16 * sizeof(float);

struct StorageStats {
  std::size_t frame_count = 0;
  std::uint64_t total_bytes = 0;
};

/// Sum of rgb + depth file sizes plus the pose record per keyframe.
StorageStats storage_stats(const SceneMemory& mem);

}  // namespace memloc
