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

// Small builders shared by the test programs.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "memloc/localization.hpp"
#include "memloc/nav_sim.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc::testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "memloc-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Camera at `pos` looking along heading `deg` (0 = +z, left turns positive).
inline Pose heading_pose(const Vec3& pos, double deg) {
  const double h = deg * M_PI / 180.0;
  Pose p;
  p.rotation.col(0) = Vec3(-std::cos(h), 0, std::sin(h));
  p.rotation.col(1) = Vec3(0, -1, 0);
  p.rotation.col(2) = Vec3(std::sin(h), 0, std::cos(h));
  p.translation = pos;
  return p;
}

/// Fronto-parallel plane at constant depth.
inline Keyframe plane_keyframe(std::int64_t id, int w, int h, double hfov, double depth, const Pose& pose = {}) {
  Keyframe kf;
  kf.id = id;
  kf.intrinsics = CameraIntrinsics::from_hfov(w, h, hfov);
  kf.depth = DepthMap(w, h);
  for (auto& d : kf.depth.values) d = static_cast<float>(depth);
  kf.pose = pose;
  return kf;
}

/// Scene of `rows` x `cols` free cells surrounded by a one-cell wall.
inline SyntheticScene open_room(int rows, int cols, double cell = 0.1) {
  std::vector<std::uint8_t> walls(static_cast<std::size_t>(rows + 2) * (cols + 2), 0);
  for (int r = 0; r < rows + 2; ++r) {
    for (int c = 0; c < cols + 2; ++c) {
      if (r == 0 || c == 0 || r == rows + 1 || c == cols + 1) walls[static_cast<std::size_t>(r) * (cols + 2) + c] = 1;
    }
  }
  return SyntheticScene(rows + 2, cols + 2, cell, std::move(walls));
}

/// Scene from ASCII rows, '#' occupied.
inline SyntheticScene ascii_scene(const std::vector<std::string>& grid, double cell = 0.1) {
  std::vector<std::uint8_t> walls;
  for (const auto& row : grid) {
    for (char ch : row) walls.push_back(ch == '#' ? 1 : 0);
  }
  return SyntheticScene(static_cast<int>(grid.size()), static_cast<int>(grid[0].size()), cell, std::move(walls));
}

/// Returns preset masks per frame id and counts calls.
class ScriptedSegmenter : public SegmentationProvider {
 public:
  std::map<std::int64_t, std::vector<Mask>> masks;
  std::function<std::vector<Mask>(const Keyframe&)> fallback;
  std::vector<Mask> segment(const Keyframe& frame, std::string_view) override {
    ++calls;
    auto it = masks.find(frame.id);
    if (it != masks.end()) return it->second;
    return fallback ? fallback(frame) : std::vector<Mask>{};
  }
  std::atomic<std::size_t> calls{0};
};

}  // namespace memloc::testing
