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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "memloc/scene_memory.hpp"

namespace memloc {

/// Uniform voxel hash over a point set. With cell size >= query radius, a
/// radius query only needs the 27 surrounding cells, so results are exact.
class SpatialHash {
 public:
  struct Cell {
    std::int64_t x, y, z;
    bool operator==(const Cell&) const = default;
  };

  SpatialHash(const std::vector<Vec3>& pts, double cell) : pts_(pts), inv_(1.0 / cell) {
    cells_.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[cell_of(pts[i])].push_back(static_cast<std::uint32_t>(i));
  }

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() * inv_)), static_cast<std::int64_t>(std::floor(p.y() * inv_)),
            static_cast<std::int64_t>(std::floor(p.z() * inv_))};
  }

  bool any_within(const Vec3& q, double r2) const {
    bool found = false;
    visit(q, [&](std::uint32_t i) {
      if ((pts_[i] - q).squaredNorm() <= r2) found = true;
      return !found;
    });
    return found;
  }

  /// Indices within sqrt(r2) of q, ascending.
  void within(const Vec3& q, double r2, std::vector<std::uint32_t>& out) const {
    out.clear();
    visit(q, [&](std::uint32_t i) {
      if ((pts_[i] - q).squaredNorm() <= r2) out.push_back(i);
      return true;
    });
    std::sort(out.begin(), out.end());
  }

 private:
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept {
      std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9E3779B97F4A7C15ull;
      h ^= static_cast<std::uint64_t>(c.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(c.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  // fn returns false to stop early.
  template <typename Fn>
  void visit(const Vec3& q, Fn&& fn) const {
    const Cell c = cell_of(q);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::uint32_t i : it->second) {
            if (!fn(i)) return;
          }
        }
      }
    }
  }

  const std::vector<Vec3>& pts_;
  double inv_;
  std::unordered_map<Cell, std::vector<std::uint32_t>, CellHash> cells_;
};

}  // namespace memloc
