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

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "memloc/scene_memory.hpp"

namespace memloc {

using PointCloud = std::vector<Vec3>;

/// Binary mask aligned with a keyframe, plus the segmenter's confidence.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, nonzero = inside
  double confidence = 0.0;

  Mask() = default;
  Mask(int w, int h, double conf = 1.0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0), confidence(conf) {}

  static Mask full(int w, int h, double conf = 1.0);

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v, bool on = true) { bits[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }
  std::size_t count() const;
};

struct DepthRange {
  double min_m = 0.1;
  double max_m = 20.0;
};

struct BoundingBox {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  /// Throws on an empty cloud.
  static BoundingBox of(const PointCloud& cloud);
};

Vec3 centroid(const PointCloud& cloud);

/// Masked pixels with depth in [min_m, max_m] lifted to world coordinates.
PointCloud backproject(const DepthMap& depth, const Mask& mask, const CameraIntrinsics& intr, const Pose& pose,
                       const DepthRange& range);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
  bool in_bounds = false;

  int pixel_u() const;
  int pixel_v() const;
};

Projection project_point(const Vec3& p_world, const CameraIntrinsics& intr, const Pose& pose);
std::vector<Projection> project(const PointCloud& points, const CameraIntrinsics& intr, const Pose& pose);

/// Median depth over masked pixels with z > 0, +inf when there are none.
double median_masked_depth(const DepthMap& depth, const Mask& mask);

inline constexpr double kDiscardedView = std::numeric_limits<double>::infinity();

/// Fraction of the smaller cloud's points with a neighbour in the other cloud
/// within `radius`. 0 when either cloud is empty.
double cloud_overlap(const PointCloud& a, const PointCloud& b, double radius);

/// Exact minimum pairwise distance. Throws on empty input.
double min_point_distance(const PointCloud& a, const PointCloud& b);

inline constexpr double kFrustumMaxDepth = 20.0;

/// True when at least half of the cloud projects in bounds with depth in (0, 20].
bool frustum_contains(const CameraIntrinsics& intr, const Pose& pose, const PointCloud& cloud);

/// Per-point depth-buffer test: in bounds, buffer valid, and not behind the
/// buffer surface by more than `margin`.
bool confirmed_visible(const Projection& p, const DepthMap& depth, double margin);

/// Confirmed-visible fraction among in-bounds points; 0 when none are in bounds.
double visible_fraction(const PointCloud& cloud, const DepthMap& depth, const CameraIntrinsics& intr,
                        const Pose& pose, double margin);

/// Binary little-endian PLY with float32 xyz.
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

}  // namespace memloc
