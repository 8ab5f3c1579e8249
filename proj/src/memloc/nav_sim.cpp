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

#include "memloc/nav_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <tuple>

#include "memloc/errors.hpp"

namespace memloc {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

double wrap360(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

// Forward and left unit vectors on the xz-plane for a heading.
struct Frame2 {
  double fx, fz, lx, lz;
};

Frame2 frame_of(double heading_deg) {
  const double h = deg2rad(heading_deg);
  return {std::sin(h), std::cos(h), std::cos(h), -std::sin(h)};
}

}  // namespace

SyntheticScene::SyntheticScene(int rows, int cols, double cell_size, std::vector<std::uint8_t> walls)
    : rows_(rows), cols_(cols), cell_size_(cell_size), walls_(std::move(walls)) {
  require(rows_ > 0 && cols_ > 0, "scene grid must be non-empty");
  require(cell_size_ > 0, "scene cell size must be positive");
  require(walls_.size() == static_cast<std::size_t>(rows_) * cols_, "scene grid size mismatch");
  cell_object_.assign(walls_.size(), -1);
}

void SyntheticScene::add_object(SceneObject obj) {
  require(obj.min_corner.x() < obj.max_corner.x() && obj.min_corner.y() < obj.max_corner.y() &&
              obj.min_corner.z() < obj.max_corner.z(),
          "object '" + obj.label + "': min must be below max");
  const double w = cols_ * cell_size_, d = rows_ * cell_size_;
  require(obj.min_corner.x() >= 0 && obj.min_corner.z() >= 0 && obj.max_corner.x() <= w && obj.max_corner.z() <= d &&
              obj.min_corner.y() >= 0,
          "object '" + obj.label + "' lies outside the scene bounds");
  const int index = static_cast<int>(objects_.size());
  // Cells whose square overlaps the footprint with positive area.
  const double eps = 1e-9;
  const int c0 = col_of(obj.min_corner.x() + eps), c1 = col_of(obj.max_corner.x() - eps);
  const int r0 = row_of(obj.min_corner.z() + eps), r1 = row_of(obj.max_corner.z() - eps);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (in_grid(r, c) && cell_object_[idx(r, c)] < 0) cell_object_[idx(r, c)] = index;
    }
  }
  objects_.push_back(std::move(obj));
}

SyntheticScene SyntheticScene::from_json(const json& j) {
  try {
    const auto grid = j.at("grid").get<std::vector<std::string>>();
    require(!grid.empty() && !grid.front().empty(), "scene grid is empty");
    const int rows = static_cast<int>(grid.size());
    const int cols = static_cast<int>(grid.front().size());
    std::vector<std::uint8_t> walls(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
      require(static_cast<int>(grid[r].size()) == cols, "scene grid rows must have equal length");
      for (int c = 0; c < cols; ++c) {
        const char ch = grid[r][c];
        require(ch == '#' || ch == '.', std::string("scene grid: unexpected character '") + ch + "'");
        walls[static_cast<std::size_t>(r) * cols + c] = ch == '#' ? 1 : 0;
      }
    }
    SyntheticScene s(rows, cols, j.at("cell_size").get<double>(), std::move(walls));
    s.wall_height = j.value("wall_height", 2.5);
    s.camera_height = j.value("camera_height", 0.88);
    for (const auto& o : j.value("objects", json::array())) {
      const auto mn = o.at("min").get<std::array<double, 3>>();
      const auto mx = o.at("max").get<std::array<double, 3>>();
      s.add_object({o.at("label").get<std::string>(), Vec3(mn[0], mn[1], mn[2]), Vec3(mx[0], mx[1], mx[2])});
    }
    for (const auto& st : j.value("starts", json::array())) {
      const auto p = st.at("position").get<std::array<double, 2>>();
      s.starts.push_back({p[0], p[1], st.value("heading", 0.0)});
    }
    s.goal_labels = j.value("goal_labels", std::vector<std::string>{});
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("scene file: ") + e.what());
  }
}

SyntheticScene SyntheticScene::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open scene file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return from_json(j);
}

json SyntheticScene::to_json() const {
  std::vector<std::string> grid(rows_, std::string(cols_, '.'));
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      if (is_wall(r, c)) grid[r][c] = '#';
    }
  }
  json objs = json::array();
  for (const auto& o : objects_) {
    objs.push_back({{"label", o.label},
                    {"min", {o.min_corner.x(), o.min_corner.y(), o.min_corner.z()}},
                    {"max", {o.max_corner.x(), o.max_corner.y(), o.max_corner.z()}}});
  }
  json st = json::array();
  for (const auto& s : starts) st.push_back({{"position", {s.x, s.z}}, {"heading", s.heading_deg}});
  return {{"grid", grid},           {"cell_size", cell_size_}, {"wall_height", wall_height},
          {"camera_height", camera_height}, {"objects", objs}, {"starts", st},
          {"goal_labels", goal_labels}};
}

bool SyntheticScene::segment_free(double x0, double z0, double x1, double z1) const {
  int c = col_of(x0), r = row_of(z0);
  const int c_end = col_of(x1), r_end = row_of(z1);
  if (blocked(r, c)) return false;
  const double dx = x1 - x0, dz = z1 - z0;
  const int step_c = dx > 0 ? 1 : -1, step_r = dz > 0 ? 1 : -1;
  const double t_delta_x = dx != 0 ? cell_size_ / std::abs(dx) : kInf;
  const double t_delta_z = dz != 0 ? cell_size_ / std::abs(dz) : kInf;
  double t_max_x = dx != 0 ? ((dx > 0 ? (c + 1) * cell_size_ : c * cell_size_) - x0) / dx : kInf;
  double t_max_z = dz != 0 ? ((dz > 0 ? (r + 1) * cell_size_ : r * cell_size_) - z0) / dz : kInf;
  const int max_iter = std::abs(c_end - c) + std::abs(r_end - r) + 2;
  for (int i = 0; i < max_iter && (c != c_end || r != r_end); ++i) {
    if (std::abs(t_max_x - t_max_z) < 1e-12) {
      // Exact corner crossing: both side cells must be free.
      if (blocked(r, c + step_c) || blocked(r + step_r, c)) return false;
      c += step_c;
      r += step_r;
      t_max_x += t_delta_x;
      t_max_z += t_delta_z;
    } else if (t_max_x < t_max_z) {
      if (t_max_x > 1.0) break;
      c += step_c;
      t_max_x += t_delta_x;
    } else {
      if (t_max_z > 1.0) break;
      r += step_r;
      t_max_z += t_delta_z;
    }
    if (blocked(r, c)) return false;
  }
  return true;
}

bool SyntheticScene::corridor_free(double x0, double z0, double x1, double z1, double clearance) const {
  const double dx = x1 - x0, dz = z1 - z0;
  const double len = std::hypot(dx, dz);
  if (len < 1e-12) return !blocked_at(x0, z0);
  const double nx = -dz / len, nz = dx / len;
  const int n = static_cast<int>(std::ceil(clearance / (0.5 * cell_size_)));
  for (int k = -n; k <= n; ++k) {
    const double off = n == 0 ? 0.0 : clearance * k / n;
    if (!segment_free(x0 + off * nx, z0 + off * nz, x1 + off * nx, z1 + off * nz)) return false;
  }
  return true;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::kStop:
      return "STOP";
    case Action::kForward:
      return "FORWARD";
    case Action::kTurnLeft:
      return "TURN_LEFT";
    case Action::kTurnRight:
      return "TURN_RIGHT";
  }
  return "?";
}

Pose agent_camera_pose(const AgentState& agent, double camera_height) {
  const Frame2 f = frame_of(agent.heading_deg);
  Pose p;
  p.rotation.col(0) = Vec3(-f.lx, 0.0, -f.lz);  // right
  p.rotation.col(1) = Vec3(0.0, -1.0, 0.0);     // down
  p.rotation.col(2) = Vec3(f.fx, 0.0, f.fz);    // forward
  p.translation = Vec3(agent.x, camera_height, agent.z);
  return p;
}

void SimConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kConfig, std::string("sim config: ") + what);
  };
  check(turn_deg > 0 && step_m > 0, "turn_deg and step_m must be positive");
  check(hfov_deg > 0 && hfov_deg < 180, "hfov_deg must be in (0, 180)");
  check(max_steps > 0, "max_steps must be positive");
  check(success_radius > 0, "success_radius must be positive");
  check(stop_visibility_floor > 0 && stop_visibility_floor <= 1, "stop_visibility_floor must be in (0, 1]");
  check(stuck_window > 0 && stuck_displacement > 0, "stuck parameters must be positive");
  check(visibility_margin >= 0 && clearance >= 0, "margins must be non-negative");
  check(approach_standoff >= 0 && approach_standoff < success_radius,
        "approach_standoff must be in [0, success_radius)");
  check(image_width > 0 && image_height > 0, "image size must be positive");
}

namespace {

struct Segment {
  double t0, t1, ylo, yhi;
  int label;
};

// Blocked cells along a planar ray, in order, up to t_max (planar meters).
void traverse(const SyntheticScene& s, double x, double z, double dx, double dz, double t_max,
              std::vector<Segment>& out) {
  out.clear();
  const double cs = s.cell_size();
  int c = s.col_of(x), r = s.row_of(z);
  const int step_c = dx > 0 ? 1 : -1, step_r = dz > 0 ? 1 : -1;
  const double t_delta_x = dx != 0 ? cs / std::abs(dx) : kInf;
  const double t_delta_z = dz != 0 ? cs / std::abs(dz) : kInf;
  double t_max_x = dx != 0 ? ((dx > 0 ? (c + 1) * cs : c * cs) - x) / dx : kInf;
  double t_max_z = dz != 0 ? ((dz > 0 ? (r + 1) * cs : r * cs) - z) / dz : kInf;
  double t_in = 0.0;
  while (t_in <= t_max && s.in_grid(r, c)) {
    const double t_out = std::min(t_max_x, t_max_z);
    if (s.is_wall(r, c)) {
      out.push_back({t_in, t_out, 0.0, s.wall_height, kLabelWall});
    } else if (const int o = s.object_at(r, c); o >= 0) {
      const auto& obj = s.objects()[o];
      out.push_back({t_in, t_out, obj.min_corner.y(), obj.max_corner.y(), o});
    }
    t_in = t_out;
    if (t_max_x < t_max_z) {
      c += step_c;
      t_max_x += t_delta_x;
    } else {
      r += step_r;
      t_max_z += t_delta_z;
    }
  }
}

}  // namespace

RenderResult render(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr) {
  if (scene.blocked_at(agent.x, agent.z)) fail(ErrorCode::kInvalidArgument, "render: agent inside an occupied cell");
  intr.validate();
  RenderResult out{DepthMap(intr.width, intr.height, 0.001),
                   std::vector<int>(static_cast<std::size_t>(intr.width) * intr.height, kLabelNone)};
  const Frame2 f = frame_of(agent.heading_deg);
  const double rx = -f.lx, rz = -f.lz;
  const double cam_h = scene.camera_height;
  std::vector<Segment> segs;
  for (int u = 0; u < intr.width; ++u) {
    const double xn = (u - intr.cx) / intr.fx;
    const double s = std::sqrt(1.0 + xn * xn);
    const double dx = (f.fx + xn * rx) / s, dz = (f.fz + xn * rz) / s;
    const double t_max = kMaxRenderDepth * s;
    traverse(scene, agent.x, agent.z, dx, dz, t_max, segs);
    for (int v = 0; v < intr.height; ++v) {
      const double yn = (v - intr.cy) / intr.fy;
      const double k = yn / s;  // world height drop per planar meter
      double best = kInf;
      int label = kLabelNone;
      if (k > 0) {
        best = cam_h / k;
        label = kLabelFloor;
      }
      for (const auto& seg : segs) {
        if (seg.t0 >= best) break;
        double lo, hi;
        if (k == 0) {
          if (cam_h < seg.ylo || cam_h > seg.yhi) continue;
          lo = seg.t0;
          hi = seg.t1;
        } else {
          const double a = (cam_h - seg.yhi) / k, b = (cam_h - seg.ylo) / k;
          lo = std::max(seg.t0, std::min(a, b));
          hi = std::min(seg.t1, std::max(a, b));
        }
        if (lo <= hi && lo < best) {
          best = lo;
          label = seg.label;
          break;
        }
      }
      const double depth = best / s;
      if (std::isfinite(depth) && depth > 0 && depth <= kMaxRenderDepth) {
        out.depth.at(u, v) = static_cast<float>(depth);
        out.labels[static_cast<std::size_t>(v) * intr.width + u] = label;
      }
    }
  }
  return out;
}

DepthMap render_depth(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr) {
  return render(scene, agent, intr).depth;
}

PolarGoal to_polar(const AgentState& agent, const Vec3& point) {
  const Frame2 f = frame_of(agent.heading_deg);
  const double vx = point.x() - agent.x, vz = point.z() - agent.z;
  const double rho = std::hypot(vx, vz);
  const double theta = rho > 0 ? rad2deg(std::atan2(vx * f.lx + vz * f.lz, vx * f.fx + vz * f.fz)) : 0.0;
  return {rho, theta};
}

Vec3 from_polar(const AgentState& agent, const PolarGoal& goal) {
  const Frame2 f = frame_of(agent.heading_deg);
  const double t = deg2rad(goal.theta_deg);
  const double dx = std::cos(t) * f.fx + std::sin(t) * f.lx;
  const double dz = std::cos(t) * f.fz + std::sin(t) * f.lz;
  return {agent.x + goal.rho * dx, 0.0, agent.z + goal.rho * dz};
}

TrackedGoal dynamic_goal(const PointCloud& cloud, const AgentState& agent, const DepthMap& depth,
                         const CameraIntrinsics& intr, double camera_height, double margin) {
  require(!cloud.empty(), "dynamic_goal: empty cloud");
  const Pose pose = agent_camera_pose(agent, camera_height);
  auto planar = [&](const Vec3& p) { return std::hypot(p.x() - agent.x, p.z() - agent.z); };
  std::size_t best_visible = cloud.size(), best_any = 0;
  double d_visible = kInf, d_any = kInf;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = planar(cloud[i]);
    if (d < d_any) {
      d_any = d;
      best_any = i;
    }
    if (d < d_visible && confirmed_visible(project_point(cloud[i], intr, pose), depth, margin)) {
      d_visible = d;
      best_visible = i;
    }
  }
  TrackedGoal g;
  g.visible = best_visible < cloud.size();
  g.point = cloud[g.visible ? best_visible : best_any];
  g.polar = to_polar(agent, g.point);
  return g;
}

namespace {

struct GridNode {
  double cost;
  int cell;
  bool operator>(const GridNode& o) const { return cost > o.cost || (cost == o.cost && cell > o.cell); }
};

// Degrees kept between a goal bearing and the image border before stopping.
constexpr double kStopViewMargin = 10.0;

constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};

bool diagonal_ok(const SyntheticScene& s, int r, int c, int k) {
  if (k < 4) return true;
  return !s.blocked(r + kDr[k], c) && !s.blocked(r, c + kDc[k]);
}

// Extra traversal cost near obstacles keeps planned paths off the walls.
std::vector<double> clearance_penalty(const SyntheticScene& s) {
  std::vector<double> pen(static_cast<std::size_t>(s.rows()) * s.cols(), 0.0);
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      int nearest = 3;
      for (int dr = -2; dr <= 2; ++dr) {
        for (int dc = -2; dc <= 2; ++dc) {
          if (s.blocked(r + dr, c + dc)) nearest = std::min(nearest, std::max(std::abs(dr), std::abs(dc)));
        }
      }
      const double cs = s.cell_size();
      pen[static_cast<std::size_t>(r) * s.cols() + c] = nearest == 1 ? 2.0 * cs : nearest == 2 ? 0.75 * cs : 0.0;
    }
  }
  return pen;
}

// Planar distance from (x, z) to the nearest blocked cell, capped at `cap`.
double obstacle_distance(const SyntheticScene& s, double x, double z, double cap) {
  const int reach = static_cast<int>(std::ceil(cap / s.cell_size())) + 1;
  const int r0 = s.row_of(z), c0 = s.col_of(x);
  double best = cap;
  for (int r = r0 - reach; r <= r0 + reach; ++r) {
    for (int c = c0 - reach; c <= c0 + reach; ++c) {
      if (!s.blocked(r, c)) continue;
      const double lx = c * s.cell_size(), hx = lx + s.cell_size();
      const double lz = r * s.cell_size(), hz = lz + s.cell_size();
      const double dx = std::max({lx - x, 0.0, x - hx}), dz = std::max({lz - z, 0.0, z - hz});
      best = std::min(best, std::hypot(dx, dz));
    }
  }
  return best;
}

// Actions of a final approach, searched breadth first.
constexpr int kApproachDepth = 6;

struct ApproachNode {
  AgentState state;
  Action first;
  int depth;
};

std::optional<Action> approach_search(const SyntheticScene& scene, const AgentState& agent, const Vec3& target,
                                      const SimConfig& cfg, const std::function<bool(const AgentState&)>& stop_ok) {
  const double view = cfg.hfov_deg / 2.0 - kStopViewMargin;
  auto good_stop = [&](const AgentState& s) {
    const PolarGoal g = to_polar(s, target);
    if (g.rho < cfg.approach_standoff || g.rho > cfg.success_radius || std::abs(g.theta_deg) > view) return false;
    if (obstacle_distance(scene, s.x, s.z, cfg.approach_standoff) < cfg.approach_standoff) return false;
    const double eps = 1e-3;
    const double ux = (target.x() - s.x) / g.rho, uz = (target.z() - s.z) / g.rho;
    if (!scene.segment_free(s.x, s.z, target.x() - eps * ux, target.z() - eps * uz)) return false;
    return !stop_ok || stop_ok(s);
  };
  auto key = [](const AgentState& s) {
    return std::make_tuple(std::llround(s.x * 1e6), std::llround(s.z * 1e6), std::llround(s.heading_deg * 1e3));
  };
  std::set<std::tuple<long long, long long, long long>> seen{key(agent)};
  std::deque<ApproachNode> queue;
  auto expand = [&](const ApproachNode& n) {
    for (Action a : {Action::kForward, Action::kTurnLeft, Action::kTurnRight}) {
      AgentState s = n.state;
      if (a == Action::kForward) {
        const Frame2 f = frame_of(s.heading_deg);
        const double nx = s.x + cfg.step_m * f.fx, nz = s.z + cfg.step_m * f.fz;
        if (!scene.segment_free(s.x, s.z, nx, nz)) continue;
        s.x = nx;
        s.z = nz;
      } else {
        s.heading_deg = wrap360(s.heading_deg + (a == Action::kTurnLeft ? cfg.turn_deg : -cfg.turn_deg));
      }
      if (!seen.insert(key(s)).second) continue;
      queue.push_back({s, n.depth == 0 ? a : n.first, n.depth + 1});
    }
  };
  expand({agent, Action::kStop, 0});
  while (!queue.empty()) {
    const ApproachNode n = queue.front();
    queue.pop_front();
    if (good_stop(n.state)) return n.first;
    if (n.depth < kApproachDepth) expand(n);
  }
  return std::nullopt;
}

}  // namespace

PlanResult plan_step(const SyntheticScene& scene, const AgentState& agent, const PolarGoal& goal,
                     const SimConfig& cfg, const StopCheck& stop_ok) {
  auto turn_toward = [](double bearing) {
    if (std::abs(bearing) >= 180.0 - 1e-9) return Action::kTurnLeft;
    return bearing > 0 ? Action::kTurnLeft : Action::kTurnRight;
  };
  const bool in_view = std::abs(goal.theta_deg) <= cfg.hfov_deg / 2.0 - kStopViewMargin;
  if (goal.rho <= cfg.success_radius && in_view && (!stop_ok || stop_ok(agent))) return {Action::kStop, true};
  const Vec3 target = from_polar(agent, goal);
  if (goal.rho <= cfg.success_radius + 2.0 * cfg.step_m) {
    if (const auto a = approach_search(scene, agent, target, cfg, stop_ok)) return {*a, true};
  }
  if (goal.rho <= cfg.success_radius) {
    // No better pose nearby. A STOP with the goal outside the view would
    // only be overridden, so face it first.
    if (in_view) return {Action::kStop, true};
    return {turn_toward(goal.theta_deg), true};
  }
  // The goal point lies on an object surface; test the line just short of it.
  const double eps = 1e-3;
  const double ux = (target.x() - agent.x) / goal.rho, uz = (target.z() - agent.z) / goal.rho;
  const bool target_in_sight = scene.segment_free(agent.x, agent.z, target.x() - eps * ux, target.z() - eps * uz);
  const int rows = scene.rows(), cols = scene.cols();
  const int ar = scene.row_of(agent.z), ac = scene.col_of(agent.x);
  if (scene.blocked(ar, ac)) return {Action::kStop, false};

  // Nearest free cell to the goal point.
  int goal_cell = -1;
  double goal_d = kInf;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (scene.blocked(r, c)) continue;
      const Vec3 cc = scene.cell_center(r, c);
      const double d = std::hypot(cc.x() - target.x(), cc.z() - target.z());
      // Tolerance keeps ties (goal on a cell corner) stable under rounding.
      if (d < goal_d - 1e-9) {
        goal_d = d;
        goal_cell = r * cols + c;
      }
    }
  }
  if (goal_cell < 0) return {Action::kStop, false};

  // Dijkstra from the goal cell; next[] points one step closer to it.
  const auto penalty = clearance_penalty(scene);
  std::vector<double> dist(static_cast<std::size_t>(rows) * cols, kInf);
  std::vector<int> next(dist.size(), -1);
  std::priority_queue<GridNode, std::vector<GridNode>, std::greater<>> pq;
  dist[goal_cell] = 0.0;
  pq.push({0.0, goal_cell});
  const int agent_cell = ar * cols + ac;
  while (!pq.empty()) {
    const GridNode n = pq.top();
    pq.pop();
    if (n.cost > dist[n.cell]) continue;
    if (n.cell == agent_cell) break;
    const int r = n.cell / cols, c = n.cell % cols;
    for (int k = 0; k < 8; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (scene.blocked(nr, nc) || !diagonal_ok(scene, r, c, k)) continue;
      const int m = nr * cols + nc;
      const double step = (k < 4 ? 1.0 : std::numbers::sqrt2) * scene.cell_size() + penalty[n.cell];
      if (n.cost + step < dist[m]) {
        dist[m] = n.cost + step;
        next[m] = n.cell;
        pq.push({dist[m], m});
      }
    }
  }
  if (!std::isfinite(dist[agent_cell])) return {Action::kStop, false};

  std::vector<int> path{agent_cell};
  while (path.back() != goal_cell) path.push_back(next[path.back()]);

  double aim_x = target.x(), aim_z = target.z();
  const double lead = std::max(0.0, goal.rho - (cfg.clearance + 0.15));
  const bool direct =
      target_in_sight && scene.corridor_free(agent.x, agent.z, agent.x + lead * ux, agent.z + lead * uz, cfg.clearance);
  if (!direct && path.size() > 1) {
    const std::size_t lookahead = std::min<std::size_t>(path.size() - 1, 40);
    std::size_t chosen = 0;
    for (std::size_t j = lookahead; j >= 1; --j) {
      const Vec3 p = scene.cell_center(path[j] / cols, path[j] % cols);
      if (scene.corridor_free(agent.x, agent.z, p.x(), p.z(), cfg.clearance)) {
        chosen = j;
        break;
      }
    }
    if (chosen == 0) chosen = 1;
    const Vec3 p = scene.cell_center(path[chosen] / cols, path[chosen] % cols);
    aim_x = p.x();
    aim_z = p.z();
  }

  const double err = to_polar(agent, Vec3(aim_x, 0.0, aim_z)).theta_deg;
  if (std::abs(err) <= cfg.turn_deg / 2.0) return {Action::kForward, true};
  return {turn_toward(err), true};
}

bool check_stop(const PointCloud& cloud, const AgentState& agent, const DepthMap& depth, const CameraIntrinsics& intr,
                double camera_height, const SimConfig& cfg) {
  const double frac =
      visible_fraction(cloud, depth, intr, agent_camera_pose(agent, camera_height), cfg.visibility_margin);
  return frac >= cfg.stop_visibility_floor;
}

namespace {

double footprint_distance(const SceneObject& o, double x, double z) {
  const double dx = std::max({o.min_corner.x() - x, 0.0, x - o.max_corner.x()});
  const double dz = std::max({o.min_corner.z() - z, 0.0, z - o.max_corner.z()});
  return std::hypot(dx, dz);
}

bool is_goal(const SyntheticScene& s, const SceneObject& o) {
  return std::find(s.goal_labels.begin(), s.goal_labels.end(), o.label) != s.goal_labels.end();
}

}  // namespace

double distance_to_goals(const SyntheticScene& scene, double x, double z) {
  double best = kInf;
  for (const auto& o : scene.objects()) {
    if (is_goal(scene, o)) best = std::min(best, footprint_distance(o, x, z));
  }
  return best;
}

namespace {

// Length of a free straight leg from (x, z) into the goal region, else +inf.
double region_leg(const SyntheticScene& scene, double x, double z, double radius) {
  double best = kInf;
  for (const auto& o : scene.objects()) {
    if (!is_goal(scene, o)) continue;
    const double nx = std::clamp(x, o.min_corner.x(), o.max_corner.x());
    const double nz = std::clamp(z, o.min_corner.z(), o.max_corner.z());
    const double d = std::hypot(x - nx, z - nz);
    if (d <= radius) return 0.0;
    const double tx = nx + (x - nx) * radius / d, tz = nz + (z - nz) * radius / d;
    if (scene.segment_free(x, z, tx, tz)) best = std::min(best, d - radius);
  }
  return best;
}

}  // namespace

double geodesic_to_goals(const SyntheticScene& scene, double x, double z, double radius) {
  const int rows = scene.rows(), cols = scene.cols();
  const int sr = scene.row_of(z), sc = scene.col_of(x);
  if (scene.blocked(sr, sc) || !std::isfinite(distance_to_goals(scene, x, z))) return kInf;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;

  // Any-angle Dijkstra (Theta* without heuristic). The start node sits at the
  // exact start position rather than its cell center. Each settled node closes
  // with a straight leg to the inflated goal region, so the result never
  // exceeds what a continuous agent needs.
  const int start = sr * cols + sc;
  auto pos = [&](int cell) -> std::pair<double, double> {
    if (cell == start) return {x, z};
    const Vec3 cc = scene.cell_center(cell / cols, cell % cols);
    return {cc.x(), cc.z()};
  };
  auto euclid = [&](int a, int b) {
    const auto [ax, az] = pos(a);
    const auto [bx, bz] = pos(b);
    return std::hypot(ax - bx, az - bz);
  };
  auto los = [&](int a, int b) {
    const auto [ax, az] = pos(a);
    const auto [bx, bz] = pos(b);
    return scene.segment_free(ax, az, bx, bz);
  };
  std::vector<double> g(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  std::priority_queue<GridNode, std::vector<GridNode>, std::greater<>> pq;
  g[start] = 0.0;
  parent[start] = start;
  pq.push({0.0, start});
  double best = kInf;
  while (!pq.empty()) {
    const GridNode cur = pq.top();
    pq.pop();
    if (cur.cost >= best) break;
    if (closed[cur.cell]) continue;
    closed[cur.cell] = 1;
    const auto [px, pz] = pos(cur.cell);
    best = std::min(best, cur.cost + region_leg(scene, px, pz, radius));
    const int r = cur.cell / cols, c = cur.cell % cols;
    for (int k = 0; k < 8; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (scene.blocked(nr, nc) || !diagonal_ok(scene, r, c, k)) continue;
      const int m = nr * cols + nc;
      if (closed[m]) continue;
      const int p = parent[cur.cell];
      double cost;
      int par;
      if (los(p, m)) {
        cost = g[p] + euclid(p, m);
        par = p;
      } else {
        cost = g[cur.cell] + euclid(cur.cell, m);
        par = cur.cell;
      }
      if (cost < g[m]) {
        g[m] = cost;
        parent[m] = par;
        pq.push({cost, m});
      }
    }
  }
  return best;
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kStopped:
      return "stopped";
    case Termination::kMaxSteps:
      return "max_steps";
    case Termination::kExhaustedCandidates:
      return "exhausted_candidates";
  }
  return "?";
}

json EpisodeResult::to_json() const {
  return {{"success", success ? 1 : 0},
          {"path_length", path_length},
          {"geodesic_optimum", std::isfinite(geodesic_optimum) ? json(geodesic_optimum) : json(nullptr)},
          {"steps", steps},
          {"collisions", collisions},
          {"termination", termination_name(termination)},
          {"final_candidate", final_candidate},
          {"candidate_switches", candidate_switches},
          {"goal_updates", goal_updates},
          {"final_distance", std::isfinite(final_distance) ? json(final_distance) : json(nullptr)}};
}

EpisodeResult EpisodeResult::from_json(const json& j) {
  try {
    EpisodeResult r;
    r.success = j.at("success").get<int>() != 0;
    r.path_length = j.at("path_length").get<double>();
    const auto& g = j.at("geodesic_optimum");
    r.geodesic_optimum = g.is_null() ? std::numeric_limits<double>::infinity() : g.get<double>();
    r.steps = j.value("steps", 0);
    r.collisions = j.value("collisions", 0);
    const std::string t = j.value("termination", "max_steps");
    r.termination = t == "stopped" ? Termination::kStopped
                    : t == "exhausted_candidates" ? Termination::kExhaustedCandidates
                                                  : Termination::kMaxSteps;
    r.final_candidate = j.value("final_candidate", 0);
    r.candidate_switches = j.value("candidate_switches", 0);
    r.goal_updates = j.value("goal_updates", 0);
    const auto fd = j.value("final_distance", json(nullptr));
    r.final_distance = fd.is_null() ? std::numeric_limits<double>::infinity() : fd.get<double>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed episode result: ") + e.what());
  }
}

json TraceRecord::to_json() const {
  return {{"step", step},
          {"action", action_name(action)},
          {"pose", {x, z, heading_deg}},
          {"goal", {goal.rho, goal.theta_deg}},
          {"candidate", candidate}};
}

EpisodeResult run_episode(const SyntheticScene& scene, const StartState& start, std::span<const GoalCandidate> goals,
                          const SimConfig& cfg, std::vector<TraceRecord>* trace) {
  cfg.validate();
  if (scene.blocked_at(start.x, start.z)) fail(ErrorCode::kInvalidArgument, "start in occupied space");
  require(!goals.empty(), "run_episode: no goal candidates");
  for (const auto& g : goals) require(!g.fused_cloud.empty(), "run_episode: goal candidate without points");

  const CameraIntrinsics intr = cfg.intrinsics();
  AgentState agent{start.x, start.z, wrap360(start.heading_deg), 0, 0};
  EpisodeResult res;
  res.geodesic_optimum = geodesic_to_goals(scene, start.x, start.z, cfg.success_radius);

  std::size_t cand = 0;
  std::vector<std::pair<double, double>> history{{agent.x, agent.z}};
  std::optional<Vec3> last_goal;
  auto switch_candidate = [&] {
    ++cand;
    ++res.candidate_switches;
    history.assign(1, {agent.x, agent.z});
    last_goal.reset();
  };

  for (;;) {
    if (agent.step_count >= cfg.max_steps) {
      res.termination = Termination::kMaxSteps;
      break;
    }
    if (cand >= goals.size()) {
      res.termination = Termination::kExhaustedCandidates;
      break;
    }
    const PointCloud& cloud = goals[cand].fused_cloud;
    const DepthMap depth = render_depth(scene, agent, intr);
    // The goal moves only to a strictly nearer point, so turning in place
    // cannot make it jump back and forth between faces.
    const TrackedGoal seen = dynamic_goal(cloud, agent, depth, intr, scene.camera_height, cfg.visibility_margin);
    if (!last_goal) {
      last_goal = seen.point;
    } else if (seen.polar.rho < to_polar(agent, *last_goal).rho - 1e-9) {
      last_goal = seen.point;
      ++res.goal_updates;
    }
    TrackedGoal tracked{to_polar(agent, *last_goal), *last_goal, seen.visible};

    const StopCheck stop_ok = [&](const AgentState& s) {
      return check_stop(cloud, s, render_depth(scene, s, intr), intr, scene.camera_height, cfg);
    };
    const PlanResult plan = plan_step(scene, agent, tracked.polar, cfg, stop_ok);
    if (!plan.reachable) {
      switch_candidate();
      continue;
    }
    Action action = plan.action;
    if (action == Action::kStop) {
      if (check_stop(cloud, agent, depth, intr, scene.camera_height, cfg)) {
        ++agent.step_count;
        if (trace) trace->push_back({agent.step_count, action, agent.x, agent.z, agent.heading_deg, tracked.polar,
                                     static_cast<int>(cand)});
        res.termination = Termination::kStopped;
        break;
      }
      action = Action::kForward;
    }

    switch (action) {
      case Action::kForward: {
        const Frame2 f = frame_of(agent.heading_deg);
        const double nx = agent.x + cfg.step_m * f.fx, nz = agent.z + cfg.step_m * f.fz;
        if (scene.segment_free(agent.x, agent.z, nx, nz)) {
          agent.x = nx;
          agent.z = nz;
          res.path_length += cfg.step_m;
        } else {
          ++agent.collision_count;
        }
        break;
      }
      case Action::kTurnLeft:
        agent.heading_deg = wrap360(agent.heading_deg + cfg.turn_deg);
        break;
      case Action::kTurnRight:
        agent.heading_deg = wrap360(agent.heading_deg - cfg.turn_deg);
        break;
      case Action::kStop:
        break;
    }
    ++agent.step_count;
    if (trace) trace->push_back({agent.step_count, action, agent.x, agent.z, agent.heading_deg, tracked.polar,
                                 static_cast<int>(cand)});

    history.emplace_back(agent.x, agent.z);
    const std::size_t w = static_cast<std::size_t>(cfg.stuck_window);
    if (history.size() > w) {
      const auto& then = history[history.size() - 1 - w];
      if (std::hypot(agent.x - then.first, agent.z - then.second) < cfg.stuck_displacement) switch_candidate();
    }
  }

  res.steps = agent.step_count;
  res.collisions = agent.collision_count;
  res.final_candidate = static_cast<int>(std::min(cand, goals.size() - 1));
  res.final_distance = distance_to_goals(scene, agent.x, agent.z);
  res.success = res.termination == Termination::kStopped && res.final_distance <= cfg.success_radius;
  return res;
}

}  // namespace memloc
