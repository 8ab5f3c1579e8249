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

#include "memloc/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "memloc/errors.hpp"
#include "memloc/spatial_hash.hpp"

namespace memloc {

Mask Mask::full(int w, int h, double conf) {
  Mask m(w, h, conf);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  return m;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

BoundingBox BoundingBox::of(const PointCloud& cloud) {
  require(!cloud.empty(), "bounding box of an empty cloud");
  BoundingBox b{cloud.front(), cloud.front()};
  for (const auto& p : cloud) {
    b.min_corner = b.min_corner.cwiseMin(p);
    b.max_corner = b.max_corner.cwiseMax(p);
  }
  return b;
}

Vec3 centroid(const PointCloud& cloud) {
  require(!cloud.empty(), "centroid of an empty cloud");
  Vec3 s = Vec3::Zero();
  for (const auto& p : cloud) s += p;
  return s / static_cast<double>(cloud.size());
}

PointCloud backproject(const DepthMap& depth, const Mask& mask, const CameraIntrinsics& intr, const Pose& pose,
                       const DepthRange& range) {
  require(depth.width == intr.width && depth.height == intr.height, "backproject: depth size does not match intrinsics");
  require(mask.width == intr.width && mask.height == intr.height, "backproject: mask size does not match intrinsics");
  PointCloud out;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!mask.at(u, v)) continue;
      const double z = depth.at(u, v);
      if (z <= 0.0 || z < range.min_m || z > range.max_m) continue;
      const Vec3 pc((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z);
      out.push_back(pose.to_world(pc));
    }
  }
  return out;
}

int Projection::pixel_u() const { return static_cast<int>(std::floor(u + 0.5)); }
int Projection::pixel_v() const { return static_cast<int>(std::floor(v + 0.5)); }

Projection project_point(const Vec3& p_world, const CameraIntrinsics& intr, const Pose& pose) {
  const Vec3 pc = pose.to_camera(p_world);
  Projection p;
  p.z = pc.z();
  if (!(pc.z() > 0.0)) return p;
  p.u = intr.fx * pc.x() / pc.z() + intr.cx;
  p.v = intr.fy * pc.y() / pc.z() + intr.cy;
  const int pu = p.pixel_u(), pv = p.pixel_v();
  p.in_bounds = std::isfinite(p.u) && std::isfinite(p.v) && pu >= 0 && pu < intr.width && pv >= 0 && pv < intr.height;
  return p;
}

std::vector<Projection> project(const PointCloud& points, const CameraIntrinsics& intr, const Pose& pose) {
  std::vector<Projection> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project_point(p, intr, pose));
  return out;
}

double median_masked_depth(const DepthMap& depth, const Mask& mask) {
  require(depth.width == mask.width && depth.height == mask.height, "median_masked_depth: size mismatch");
  std::vector<double> zs;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (mask.at(u, v) && depth.at(u, v) > 0.0f) zs.push_back(depth.at(u, v));
    }
  }
  if (zs.empty()) return kDiscardedView;
  const std::size_t mid = zs.size() / 2;
  std::nth_element(zs.begin(), zs.begin() + mid, zs.end());
  if (zs.size() % 2 == 1) return zs[mid];
  const double upper = zs[mid];
  const double lower = *std::max_element(zs.begin(), zs.begin() + mid);
  return 0.5 * (lower + upper);
}

double cloud_overlap(const PointCloud& a, const PointCloud& b, double radius) {
  require(radius > 0, "cloud_overlap: radius must be positive");
  if (a.empty() || b.empty()) return 0.0;
  const double r2 = radius * radius;
  auto covered = [radius, r2](const PointCloud& small, const PointCloud& large) {
    const SpatialHash grid(large, radius);
    std::size_t hits = 0;
    for (const auto& p : small) {
      if (grid.any_within(p, r2)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(small.size());
  };
  if (a.size() != b.size()) return a.size() < b.size() ? covered(a, b) : covered(b, a);
  // Equal sizes: either cloud is "the smaller"; take the larger fraction so
  // the measure is symmetric.
  return std::max(covered(a, b), covered(b, a));
}

namespace {

// Static 3-d tree for exact nearest-neighbour distance.
class KdTree {
 public:
  explicit KdTree(const PointCloud& pts) : pts_(pts), order_(pts.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    build(0, order_.size(), 0);
  }

  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(0, order_.size(), 0, q, best);
    return best;
  }

 private:
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= kLeaf) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t i, std::size_t j) { return pts_[i][axis] < pts_[j][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, double& best) const {
    if (hi - lo <= kLeaf) {
      for (std::size_t i = lo; i < hi; ++i) best = std::min(best, (pts_[order_[i]] - q).squaredNorm());
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const Vec3& m = pts_[order_[mid]];
    best = std::min(best, (m - q).squaredNorm());
    const double diff = q[axis] - m[axis];
    const int next = (axis + 1) % 3;
    if (diff < 0) {
      search(lo, mid, next, q, best);
      if (diff * diff < best) search(mid + 1, hi, next, q, best);
    } else {
      search(mid + 1, hi, next, q, best);
      if (diff * diff < best) search(lo, mid, next, q, best);
    }
  }

  static constexpr std::size_t kLeaf = 8;
  const PointCloud& pts_;
  std::vector<std::size_t> order_;
};

}  // namespace

double min_point_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::kInvalidArgument, "min_point_distance: empty cloud");
  const PointCloud& query = a.size() <= b.size() ? a : b;
  const PointCloud& tree_pts = a.size() <= b.size() ? b : a;
  const KdTree tree(tree_pts);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : query) {
    best = std::min(best, tree.nearest_sq(p));
    if (best == 0.0) break;
  }
  return std::sqrt(best);
}

bool frustum_contains(const CameraIntrinsics& intr, const Pose& pose, const PointCloud& cloud) {
  require(!cloud.empty(), "frustum_contains: empty cloud");
  std::size_t inside = 0;
  for (const auto& p : cloud) {
    const Projection pr = project_point(p, intr, pose);
    if (pr.in_bounds && pr.z <= kFrustumMaxDepth) ++inside;
  }
  return 2 * inside >= cloud.size();
}

bool confirmed_visible(const Projection& p, const DepthMap& depth, double margin) {
  if (!p.in_bounds) return false;
  const double buffer = depth.at(p.pixel_u(), p.pixel_v());
  return buffer > 0.0 && p.z <= buffer + margin;
}

double visible_fraction(const PointCloud& cloud, const DepthMap& depth, const CameraIntrinsics& intr,
                        const Pose& pose, double margin) {
  require(margin >= 0, "visible_fraction: margin must be >= 0");
  require(depth.width == intr.width && depth.height == intr.height, "visible_fraction: depth size mismatch");
  std::size_t in_view = 0, visible = 0;
  for (const auto& p : cloud) {
    const Projection pr = project_point(p, intr, pose);
    if (!pr.in_bounds) continue;
    ++in_view;
    if (confirmed_visible(pr, depth, margin)) ++visible;
  }
  return in_view == 0 ? 0.0 : static_cast<double>(visible) / static_cast<double>(in_view);
}

void write_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& p : cloud) {
    const std::array<float, 3> xyz{static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
    out.write(reinterpret_cast<const char*>(xyz.data()), sizeof(xyz));
  }
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string a, b;
    ss >> a >> b;
    if (a == "element" && b == "vertex") ss >> count;
  }
  PointCloud cloud(count);
  for (auto& p : cloud) {
    std::array<float, 3> xyz{};
    in.read(reinterpret_cast<char*>(xyz.data()), sizeof(xyz));
    p = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  if (!in) fail(ErrorCode::kIo, path + ": truncated vertex data");
  return cloud;
}

}  // namespace memloc
