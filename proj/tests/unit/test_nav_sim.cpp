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


#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "memloc/errors.hpp"
#include "memloc/nav_sim.hpp"
#include "memloc/synth.hpp"
#include "oracles.hpp"

using namespace memloc;
using memloc::testing::ascii_scene;
using memloc::testing::open_room;

namespace {

AgentState agent_at(double x, double z, double heading) { return {x, z, heading, 0, 0}; }

/// Open room with one goal box.
SyntheticScene room_with_box(int rows, int cols, const SceneObject& box) {
  SyntheticScene s = open_room(rows, cols);
  s.add_object(box);
  s.goal_labels = {box.label};
  return s;
}

/// 32x32 cells with a walled pocket around (2.3, 0.7) and open space elsewhere.
SyntheticScene pocket_scene() {
  std::vector<std::string> g(32, std::string(32, '.'));
  for (int i = 0; i < 32; ++i) g[0][i] = g[31][i] = g[i][0] = g[i][31] = '#';
  for (int r = 2; r <= 11; ++r) {
    for (int c = 18; c <= 28; ++c) {
      if (r == 2 || r == 11 || c == 18 || c == 28) g[r][c] = '#';
    }
  }
  SyntheticScene s = ascii_scene(g);
  s.add_object({"decoy", Vec3(2.2, 0, 0.6), Vec3(2.4, 0.6, 0.8)});
  s.add_object({"target", Vec3(0.5, 0, 2.2), Vec3(0.8, 0.6, 2.5)});
  s.goal_labels = {"target"};
  return s;
}

/// 32x32 room split by a wall at column 15 that leaves a gap in rows 22..30.
SyntheticScene corner_scene() {
  std::vector<std::string> g(32, std::string(32, '.'));
  for (int i = 0; i < 32; ++i) g[0][i] = g[31][i] = g[i][0] = g[i][31] = '#';
  for (int r = 0; r <= 21; ++r) g[r][15] = '#';
  SyntheticScene s = ascii_scene(g);
  s.add_object({"target", Vec3(2.0, 0, 0.4), Vec3(2.3, 0.7, 0.7)});
  s.goal_labels = {"target"};
  return s;
}

double forward_distance(const std::vector<TraceRecord>& trace, const StartState& start) {
  double total = 0.0, x = start.x, z = start.z;
  for (const auto& t : trace) {
    if (t.action == Action::kForward && (t.x != x || t.z != z)) total += std::hypot(t.x - x, t.z - z);
    x = t.x;
    z = t.z;
  }
  return total;
}

}  // namespace

TEST_SUITE("nav_sim") {
  TEST_CASE("scene grid and objects") {
    SyntheticScene s = open_room(10, 10);
    CHECK(s.rows() == 12);
    CHECK(s.blocked(0, 5));
    CHECK(s.blocked(-1, 5));
    CHECK(!s.blocked(5, 5));
    s.add_object({"box", Vec3(0.3, 0, 0.3), Vec3(0.5, 1, 0.5)});
    // Footprint [0.3, 0.5] covers cells 3 and 4 only.
    CHECK(s.object_at(3, 3) == 0);
    CHECK(s.object_at(4, 4) == 0);
    CHECK(s.object_at(5, 5) == -1);
    CHECK(s.object_at(2, 3) == -1);
    CHECK(!s.segment_free(0.25, 0.25, 0.65, 0.65));
    CHECK(s.segment_free(0.25, 0.65, 0.95, 0.65));
    CHECK(s.corridor_free(0.25, 0.8, 0.95, 0.8, 0.05));
    CHECK(!s.corridor_free(0.25, 0.6, 0.95, 0.6, 0.15));
    CHECK_THROWS_AS(s.add_object({"bad", Vec3(0.5, 0, 0.5), Vec3(0.4, 1, 0.6)}), Error);
    CHECK_THROWS_AS(s.add_object({"out", Vec3(1.0, 0, 1.0), Vec3(1.5, 1, 1.5)}), Error);
  }

  TEST_CASE("scene json round trip and errors") {
    SyntheticScene s = pocket_scene();
    s.starts.push_back({1.5, 1.0, 30.0});
    const SyntheticScene back = SyntheticScene::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK(back.objects().size() == 2);
    CHECK(back.starts.size() == 1);
    CHECK(back.goal_labels == std::vector<std::string>{"target"});

    const nlohmann::json bad_char{{"grid", {"#x#"}}, {"cell_size", 0.1}};
    CHECK_THROWS_AS(SyntheticScene::from_json(bad_char), Error);
    const nlohmann::json ragged{{"grid", {"###", "##"}}, {"cell_size", 0.1}};
    CHECK_THROWS_AS(SyntheticScene::from_json(ragged), Error);
    try {
      SyntheticScene::from_json(nlohmann::json{{"grid", {"#"}}});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
    CHECK_THROWS_AS(SyntheticScene::load("/nonexistent/scene.json"), Error);
  }

  TEST_CASE("sim config validation") {
    SimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.approach_standoff = cfg.success_radius;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SimConfig{};
    cfg.hfov_deg = 180;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SimConfig{};
    cfg.max_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(std::string(action_name(Action::kTurnLeft)) == "TURN_LEFT");
    CHECK(std::string(termination_name(Termination::kStopped)) == "stopped");
  }

  TEST_CASE("render matches the analytic room") {
    const SyntheticScene s = open_room(40, 40);
    const auto intr = CameraIntrinsics::from_hfov(161, 121, 79.0);
    const AgentState a = agent_at(2.05, 1.05, 0.0);
    const RenderResult r = render(s, a, intr);
    const int cy = 60;
    // Fronto-parallel far wall at z = 4.1: constant depth along the horizon.
    for (int u = 0; u < intr.width; ++u) {
      const double xn = (u - intr.cx) / intr.fx;
      if (std::abs(xn) * 3.05 > 1.9) continue;
      CHECK(r.depth.at(u, cy) == doctest::Approx(3.05).epsilon(1e-6));
      CHECK(r.labels[static_cast<std::size_t>(cy) * intr.width + u] == kLabelWall);
    }
    // Floor below the horizon: depth = camera_height * fy / (v - cy).
    for (int v : {cy + 30, cy + 40, cy + 60}) {
      CHECK(r.depth.at(80, v) == doctest::Approx(s.camera_height * intr.fy / (v - cy)).epsilon(1e-6));
      CHECK(r.labels[static_cast<std::size_t>(v) * intr.width + 80] == kLabelFloor);
    }
    // Rays above the 2.5 m walls see nothing (no ceiling).
    CHECK(r.depth.at(80, 0) == 0.0f);
    CHECK(r.labels[80] == kLabelNone);
    CHECK_THROWS_AS(render(s, agent_at(0.05, 0.05, 0), intr), Error);
  }

  TEST_CASE("render leaves depth beyond 20 m invalid") {
    const SyntheticScene s = open_room(250, 20);
    const auto intr = CameraIntrinsics::from_hfov(161, 121, 79.0);
    const RenderResult r = render(s, agent_at(1.05, 0.5, 0.0), intr);
    CHECK(r.depth.at(80, 60) == 0.0f);
    CHECK(r.labels[60 * 161 + 80] == kLabelNone);
    CHECK(r.depth.at(80, 120) > 0.0f);
    for (float d : r.depth.values) CHECK(d <= kMaxRenderDepth);
  }

  TEST_CASE("rendered depth backprojects onto the rendered surfaces") {
    SyntheticScene s = open_room(40, 40);
    s.add_object({"box", Vec3(1.0, 0, 3.0), Vec3(1.6, 0.5, 3.4)});
    const auto intr = CameraIntrinsics::from_hfov(96, 72, 79.0);
    for (double h : {0.0, 30.0, 135.0, 250.0}) {
      const AgentState a = agent_at(2.0, 1.6, h);
      const RenderResult r = render(s, a, intr);
      const Pose pose = agent_camera_pose(a, s.camera_height);
      CHECK(pose.translation.y() == s.camera_height);
      for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
          const double d = r.depth.at(u, v);
          if (d <= 0) continue;
          const Vec3 cam((u - intr.cx) / intr.fx * d, (v - intr.cy) / intr.fy * d, d);
          const Vec3 w = pose.rotation * cam + pose.translation;
          const int label = r.labels[static_cast<std::size_t>(v) * intr.width + u];
          if (label == kLabelFloor) {
            CHECK(std::abs(w.y()) < 1e-4);
          } else if (label == kLabelWall) {
            const double dx = std::min(std::abs(w.x() - 0.1), std::abs(w.x() - 4.1));
            const double dz = std::min(std::abs(w.z() - 0.1), std::abs(w.z() - 4.1));
            CHECK(std::min(dx, dz) < 1e-4);
          } else {
            REQUIRE(label == 0);
            const auto& o = s.objects()[0];
            const Vec3 lo = o.min_corner.array() - 1e-4, hi = o.max_corner.array() + 1e-4;
            CHECK((w.array() >= lo.array()).all());
            CHECK((w.array() <= hi.array()).all());
          }
          // The projection of the lifted point lands back on the pixel.
          const Projection p = project_point(w, intr, pose);
          CHECK(std::abs(p.u - u) < 1e-3);
          CHECK(std::abs(p.v - v) < 1e-3);
        }
      }
    }
  }

  TEST_CASE("polar conversions") {
    const AgentState a = agent_at(1.0, 2.0, 0.0);
    const PolarGoal ahead = to_polar(a, Vec3(1.0, 0.3, 3.0));
    CHECK(ahead.rho == doctest::Approx(1.0));
    CHECK(ahead.theta_deg == doctest::Approx(0.0));
    CHECK(to_polar(a, Vec3(2.0, 0, 2.0)).theta_deg == doctest::Approx(90.0));   // +x is to the left
    CHECK(to_polar(a, Vec3(0.0, 0, 2.0)).theta_deg == doctest::Approx(-90.0));
    CHECK(std::abs(to_polar(a, Vec3(1.0, 0, 1.0)).theta_deg) == doctest::Approx(180.0));
    CHECK(to_polar(a, Vec3(1.0, 5.0, 2.0)).rho == 0.0);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(-5, 5), head(0, 360);
    for (int i = 0; i < 1000; ++i) {
      const AgentState b = agent_at(pos(rng), pos(rng), head(rng));
      const Vec3 p(pos(rng), 0.0, pos(rng));
      const Vec3 back = from_polar(b, to_polar(b, p));
      CHECK((back - p).norm() < 1e-9);
    }
    // Turning left by the bearing faces the point.
    const AgentState c = agent_at(0, 0, 40);
    const PolarGoal g = to_polar(c, Vec3(3, 0, -1));
    CHECK(std::abs(to_polar(agent_at(0, 0, 40 + g.theta_deg), Vec3(3, 0, -1)).theta_deg) < 1e-9);
  }

  TEST_CASE("dynamic goal prefers the nearest visible point") {
    std::vector<std::string> g(20, std::string(20, '.'));
    for (int i = 0; i < 20; ++i) g[0][i] = g[19][i] = g[i][0] = g[i][19] = '#';
    for (int c = 5; c <= 14; ++c) g[10][c] = '#';
    const SyntheticScene s = ascii_scene(g);
    const auto intr = CameraIntrinsics::from_hfov(80, 60, 79.0);
    const AgentState a = agent_at(1.0, 0.15, 0.0);
    const DepthMap depth = render_depth(s, a, intr);
    // Hidden point behind the wall at row 10 versus a visible one farther off.
    const PointCloud cloud{Vec3(1.0, 0.5, 1.3), Vec3(0.35, 0.5, 1.2)};
    const TrackedGoal tg = dynamic_goal(cloud, a, depth, intr, s.camera_height, 0.1);
    CHECK(tg.visible);
    CHECK(tg.point == cloud[1]);
    // Nothing visible: planar-nearest point.
    const PointCloud hidden{Vec3(1.0, 0.5, 1.3), Vec3(1.2, 0.5, 1.6)};
    const TrackedGoal th = dynamic_goal(hidden, a, depth, intr, s.camera_height, 0.1);
    CHECK(!th.visible);
    CHECK(th.point == hidden[0]);
    CHECK(th.polar.rho == doctest::Approx(1.15));
    CHECK_THROWS_AS(dynamic_goal({}, a, depth, intr, s.camera_height, 0.1), Error);
  }

  TEST_CASE("plan_step basic decisions") {
    const SyntheticScene s = open_room(40, 40);
    const SimConfig cfg;
    const AgentState a = agent_at(2.0, 2.0, 0.0);
    CHECK(plan_step(s, a, {1.5, 0.0}, cfg).action == Action::kForward);
    CHECK(plan_step(s, a, {1.5, 10.0}, cfg).action == Action::kForward);
    CHECK(plan_step(s, a, {1.5, 90.0}, cfg).action == Action::kTurnLeft);
    CHECK(plan_step(s, a, {1.5, -90.0}, cfg).action == Action::kTurnRight);
    // Directly behind: the tie goes left.
    CHECK(plan_step(s, a, {1.5, 180.0}, cfg).action == Action::kTurnLeft);
    CHECK(plan_step(s, a, {1.5, -180.0}, cfg).action == Action::kTurnLeft);
    // Within the success radius and in view: STOP.
    const PlanResult stop = plan_step(s, a, {0.2, 5.0}, cfg);
    CHECK(stop.action == Action::kStop);
    CHECK(stop.reachable);
    // Within the radius but outside the view: turn toward it first.
    CHECK(plan_step(s, a, {0.2, 60.0}, cfg).action == Action::kTurnLeft);
    CHECK(plan_step(s, a, {0.2, -60.0}, cfg).action == Action::kTurnRight);
  }

  TEST_CASE("plan_step routes around walls and detects unreachable goals") {
    const SyntheticScene s = pocket_scene();
    const SimConfig cfg;
    const AgentState a = agent_at(1.5, 1.0, 90.0);
    const PlanResult r = plan_step(s, a, to_polar(a, Vec3(2.3, 0.3, 0.7)), cfg);
    CHECK(!r.reachable);
    CHECK(plan_step(s, a, to_polar(a, Vec3(0.65, 0.3, 2.2)), cfg).reachable);
  }

  TEST_CASE("check_stop applies the visibility floor") {
    // Agent faces a box 0.2 m ahead; some goal points sit on its visible face,
    // the rest are hidden behind it.
    const SceneObject box{"box", Vec3(0.8, 0, 1.2), Vec3(1.2, 1.0, 1.5)};
    const SyntheticScene s = room_with_box(30, 30, box);
    const SimConfig cfg;
    const auto intr = cfg.intrinsics();
    const AgentState a = agent_at(1.0, 1.0, 0.0);
    const DepthMap depth = render_depth(s, a, intr);
    auto cloud_with = [](int visible) {
      PointCloud c;
      for (int i = 0; i < visible; ++i) c.emplace_back(0.95 + 0.01 * (i % 10), 0.8 + 0.01 * (i / 10), 1.2);
      for (int i = visible; i < 100; ++i) c.emplace_back(0.9 + 0.002 * i, 0.8, 1.8);
      return c;
    };
    CHECK(check_stop(cloud_with(50), a, depth, intr, s.camera_height, cfg));
    CHECK(check_stop(cloud_with(5), a, depth, intr, s.camera_height, cfg));
    CHECK(!check_stop(cloud_with(3), a, depth, intr, s.camera_height, cfg));
    CHECK(!check_stop(cloud_with(0), a, depth, intr, s.camera_height, cfg));
    // Entirely outside the view.
    CHECK(!check_stop(PointCloud{Vec3(1.0, 0.8, 0.5)}, a, depth, intr, s.camera_height, cfg));
  }

  TEST_CASE("episode: a low-visibility STOP is overridden with FORWARD") {
    const SceneObject box{"box", Vec3(0.8, 0, 1.2), Vec3(1.2, 1.0, 1.5)};
    const SyntheticScene s = room_with_box(30, 30, box);
    SimConfig cfg;
    cfg.max_steps = 3;
    GoalCandidate g;
    for (int i = 0; i < 3; ++i) g.fused_cloud.emplace_back(1.0, 0.5 + 0.1 * i, 1.2);
    for (int i = 3; i < 100; ++i) g.fused_cloud.emplace_back(0.9 + 0.002 * i, 0.6, 1.8);
    std::vector<TraceRecord> trace;
    const auto res = run_episode(s, {1.0, 1.0, 0.0}, std::span(&g, 1), cfg, &trace);
    REQUIRE(!trace.empty());
    CHECK(trace[0].goal.rho == doctest::Approx(0.2));
    CHECK(trace[0].action == Action::kForward);
    CHECK(res.collisions >= 1);
    CHECK(res.termination == Termination::kMaxSteps);
    CHECK(!res.success);
  }

  TEST_CASE("episode: adjacent start stops within two steps") {
    const SceneObject box{"mug", Vec3(0.8, 0, 1.5), Vec3(1.2, 0.8, 1.8)};
    const SyntheticScene s = room_with_box(30, 30, box);
    const GoalCandidate g = box_candidate(box);
    std::vector<TraceRecord> trace;
    const auto res = run_episode(s, {1.0, 1.1, 0.0}, std::span(&g, 1), SimConfig{}, &trace);
    CHECK(res.success);
    CHECK(res.termination == Termination::kStopped);
    CHECK(res.steps <= 2);
    CHECK(res.final_distance <= 0.25);
    CHECK(trace.back().action == Action::kStop);
  }

  TEST_CASE("episode: unreachable first candidate falls back to the second") {
    const SyntheticScene s = pocket_scene();
    const std::vector<GoalCandidate> goals{box_candidate(s.objects()[0]), box_candidate(s.objects()[1])};
    std::vector<TraceRecord> trace;
    const StartState start{1.5, 1.0, 0.0};
    const auto res = run_episode(s, start, goals, SimConfig{}, &trace);
    CHECK(res.success);
    CHECK(res.final_candidate == 1);
    CHECK(res.candidate_switches == 1);
    CHECK(res.path_length == doctest::Approx(forward_distance(trace, start)));
    // Every successful forward moves exactly one step.
    CHECK(std::fmod(res.path_length + 1e-9, 0.25) < 1e-6);
    CHECK(res.path_length / res.geodesic_optimum <= 1.3);

    // Only the unreachable candidate: the episode ends without success.
    const auto lone = run_episode(s, start, std::span(goals.data(), 1), SimConfig{});
    CHECK(lone.termination == Termination::kExhaustedCandidates);
    CHECK(!lone.success);
  }

  TEST_CASE("episode: step budget") {
    const SyntheticScene s = pocket_scene();
    const GoalCandidate g = box_candidate(s.objects()[1]);
    SimConfig cfg;
    cfg.max_steps = 4;
    const auto res = run_episode(s, {2.8, 2.8, 0.0}, std::span(&g, 1), cfg);
    CHECK(res.termination == Termination::kMaxSteps);
    CHECK(res.steps == 4);
    CHECK(!res.success);
    CHECK_THROWS_AS(run_episode(s, {0.05, 0.05, 0.0}, std::span(&g, 1), cfg), Error);
    CHECK_THROWS_AS(run_episode(s, {1.5, 1.5, 0.0}, {}, cfg), Error);
  }

  TEST_CASE("episode: goal around a corner is updated as it comes into view") {
    const SyntheticScene s = corner_scene();
    const GoalCandidate g = box_candidate(s.objects()[0]);
    const StartState start{0.7, 0.5, 0.0};
    std::vector<TraceRecord> trace;
    const auto res = run_episode(s, start, std::span(&g, 1), SimConfig{}, &trace);
    CHECK(res.success);
    CHECK(res.goal_updates >= 1);
    CHECK(res.path_length / res.geodesic_optimum <= 1.3);
    CHECK(res.path_length == doctest::Approx(forward_distance(trace, start)));
  }

  TEST_CASE("episodes are deterministic") {
    const SyntheticScene s = corner_scene();
    const GoalCandidate g = box_candidate(s.objects()[0]);
    std::vector<TraceRecord> t1, t2;
    const auto a = run_episode(s, {0.7, 0.5, 0.0}, std::span(&g, 1), SimConfig{}, &t1);
    const auto b = run_episode(s, {0.7, 0.5, 0.0}, std::span(&g, 1), SimConfig{}, &t2);
    CHECK(a.to_json().dump() == b.to_json().dump());
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].to_json() == t2[i].to_json());
    CHECK(EpisodeResult::from_json(a.to_json()).to_json() == a.to_json());
  }

  TEST_CASE("geodesic optimum") {
    // Line of sight: straight-line distance minus the success radius.
    const SceneObject box{"mug", Vec3(0.8, 0, 1.5), Vec3(1.2, 0.8, 1.8)};
    const SyntheticScene s = room_with_box(30, 30, box);
    CHECK(geodesic_to_goals(s, 1.0, 0.5, 0.25) == doctest::Approx(0.75));
    CHECK(geodesic_to_goals(s, 1.0, 1.3, 0.25) == 0.0);
    CHECK(distance_to_goals(s, 2.0, 1.0) == doctest::Approx(std::hypot(0.8, 0.5)));
    CHECK(std::isinf(geodesic_to_goals(s, 0.05, 0.05, 0.25)));

    // Around obstacles: bracketed by the 8-connected grid oracle.
    const SyntheticScene c = corner_scene();
    const double diag = std::sqrt(2.0) * c.cell_size();
    for (const auto& [x, z] : std::vector<std::pair<double, double>>{{0.7, 0.7}, {0.3, 2.9}, {1.2, 0.2}, {2.9, 2.9}}) {
      const double lib = geodesic_to_goals(c, x, z, 0.25);
      const double grid = oracle::grid_geodesic(c, x, z, 0.25);
      CHECK(lib <= grid + 2 * diag);
      CHECK(lib >= grid / 1.0824 - 2 * diag);
    }
    // Unreachable target.
    SyntheticScene p = pocket_scene();
    p.goal_labels = {"decoy"};
    CHECK(std::isinf(geodesic_to_goals(p, 1.5, 1.0, 0.25)));
  }
}
