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

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memloc/geometry.hpp"
#include "memloc/localization.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc {

struct SceneObject {
  std::string label;
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  BoundingBox box() const { return {min_corner, max_corner}; }
};

struct StartState {
  double x = 0.0;
  double z = 0.0;
  double heading_deg = 0.0;
};

/// 2.5-D world: an occupancy grid of full-height walls on the xz-plane plus
/// labelled boxes. Cell (row, col) spans x in [col, col+1) * cell_size and
/// z in [row, row+1) * cell_size. World y is up; the floor is y = 0.
class SyntheticScene {
 public:
  SyntheticScene() = default;
  SyntheticScene(int rows, int cols, double cell_size, std::vector<std::uint8_t> walls);

  /// Parses the scene file format: {"grid": ["#..#", ...], "cell_size",
  /// "wall_height"?, "camera_height"?, "objects": [{"label", "min", "max"}],
  /// "starts": [{"position": [x, z], "heading"}], "goal_labels": [...]}.
  static SyntheticScene from_json(const nlohmann::json& j);
  static SyntheticScene load(const std::string& path);
  nlohmann::json to_json() const;

  void add_object(SceneObject obj);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double cell_size() const { return cell_size_; }
  double wall_height = 2.5;
  double camera_height = 0.88;
  std::vector<StartState> starts;
  std::vector<std::string> goal_labels;

  const std::vector<SceneObject>& objects() const { return objects_; }

  bool in_grid(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }
  bool is_wall(int r, int c) const { return walls_[idx(r, c)] != 0; }
  /// Wall or object footprint. Cells outside the grid count as blocked.
  bool blocked(int r, int c) const { return !in_grid(r, c) || walls_[idx(r, c)] != 0 || cell_object_[idx(r, c)] >= 0; }
  /// Object occupying the cell, or -1.
  int object_at(int r, int c) const { return cell_object_[idx(r, c)]; }

  int row_of(double z) const { return static_cast<int>(std::floor(z / cell_size_)); }
  int col_of(double x) const { return static_cast<int>(std::floor(x / cell_size_)); }
  Vec3 cell_center(int r, int c, double y = 0.0) const {
    return {(c + 0.5) * cell_size_, y, (r + 0.5) * cell_size_};
  }
  bool blocked_at(double x, double z) const { return blocked(row_of(z), col_of(x)); }

  /// True when the xz segment crosses no blocked cell.
  bool segment_free(double x0, double z0, double x1, double z1) const;
  /// segment_free for every parallel offset within +-clearance.
  bool corridor_free(double x0, double z0, double x1, double z1, double clearance) const;

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

  int rows_ = 0;
  int cols_ = 0;
  double cell_size_ = 0.1;
  std::vector<std::uint8_t> walls_;
  std::vector<int> cell_object_;
  std::vector<SceneObject> objects_;
};

enum class Action { kStop, kForward, kTurnLeft, kTurnRight };

const char* action_name(Action a);

struct AgentState {
  double x = 0.0;
  double z = 0.0;
  double heading_deg = 0.0;  // 0 faces +z; turning left increases it
  int step_count = 0;
  int collision_count = 0;
};

/// Camera pose of an agent: level camera at the scene's camera height.
Pose agent_camera_pose(const AgentState& agent, double camera_height);

struct SimConfig {
  double turn_deg = 30.0;
  double step_m = 0.25;
  double hfov_deg = 79.0;
  int max_steps = 500;
  double success_radius = 0.25;
  double stop_visibility_floor = 0.05;
  int stuck_window = 20;
  double stuck_displacement = 0.2;
  double visibility_margin = 0.10;
  int image_width = 160;
  int image_height = 120;
  double clearance = 0.15;
  double approach_standoff = 0.10;  // closest planned final position to the goal point

  void validate() const;
  CameraIntrinsics intrinsics() const { return CameraIntrinsics::from_hfov(image_width, image_height, hfov_deg); }
};

struct PolarGoal {
  double rho = 0.0;        // planar distance, meters
  double theta_deg = 0.0;  // bearing from heading, positive to the left
};

inline constexpr int kLabelNone = -3;
inline constexpr int kLabelFloor = -2;
inline constexpr int kLabelWall = -1;

struct RenderResult {
  DepthMap depth;
  std::vector<int> labels;  // object index, or kLabelWall / kLabelFloor / kLabelNone
};

inline constexpr double kMaxRenderDepth = 20.0;

/// Column raycast through the grid; depth beyond 20 m is invalid (0).
RenderResult render(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr);
DepthMap render_depth(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr);

PolarGoal to_polar(const AgentState& agent, const Vec3& point);
Vec3 from_polar(const AgentState& agent, const PolarGoal& goal);

struct TrackedGoal {
  PolarGoal polar;
  Vec3 point = Vec3::Zero();
  bool visible = false;
};

/// Planar-nearest confirmed-visible cloud point, else planar-nearest point.
TrackedGoal dynamic_goal(const PointCloud& cloud, const AgentState& agent, const DepthMap& depth,
                         const CameraIntrinsics& intr, double camera_height, double margin);

struct PlanResult {
  Action action = Action::kStop;
  bool reachable = true;
};

/// Pose test used to pick a stopping pose, e.g. "check_stop would pass here".
using StopCheck = std::function<bool(const AgentState&)>;

/// Greedy follower of the shortest grid path to the goal. STOP within
/// success_radius when the goal is in view and `stop_ok` (if set) accepts the
/// pose; turn when the heading error exceeds turn_deg / 2. Near the goal a
/// short breadth-first search over action sequences looks for a pose between
/// approach_standoff and success_radius from the goal point, clear of
/// obstacles, facing the goal and accepted by `stop_ok`, so the agent does
/// not run into the object it must still see.
PlanResult plan_step(const SyntheticScene& scene, const AgentState& agent, const PolarGoal& goal,
                     const SimConfig& cfg, const StopCheck& stop_ok = {});

/// False means STOP is overridden with FORWARD.
bool check_stop(const PointCloud& cloud, const AgentState& agent, const DepthMap& depth, const CameraIntrinsics& intr,
                double camera_height, const SimConfig& cfg);

/// Any-angle shortest path length from (x, z) into the goal region: goal
/// object footprints inflated by `radius`. +inf when unreachable.
double geodesic_to_goals(const SyntheticScene& scene, double x, double z, double radius);

/// Planar distance from (x, z) to the nearest goal-labelled object footprint.
double distance_to_goals(const SyntheticScene& scene, double x, double z);

enum class Termination { kStopped, kMaxSteps, kExhaustedCandidates };

const char* termination_name(Termination t);

struct EpisodeResult {
  bool success = false;
  double path_length = 0.0;
  double geodesic_optimum = 0.0;
  int steps = 0;
  int collisions = 0;
  Termination termination = Termination::kMaxSteps;
  int final_candidate = 0;
  int candidate_switches = 0;
  int goal_updates = 0;
  double final_distance = 0.0;

  nlohmann::json to_json() const;
  static EpisodeResult from_json(const nlohmann::json& j);
};

struct TraceRecord {
  int step = 0;
  Action action = Action::kStop;
  double x = 0.0, z = 0.0, heading_deg = 0.0;
  PolarGoal goal;
  int candidate = 0;

  nlohmann::json to_json() const;
};

/// Navigates to the candidates in order, switching when stuck or when the
/// goal is unreachable. The step budget is shared across candidates. The
/// tracked goal point is replaced whenever dynamic_goal yields a strictly
/// nearer point; each replacement counts as a goal update (replan).
EpisodeResult run_episode(const SyntheticScene& scene, const StartState& start, std::span<const GoalCandidate> goals,
                          const SimConfig& cfg, std::vector<TraceRecord>* trace = nullptr);

}  // namespace memloc
