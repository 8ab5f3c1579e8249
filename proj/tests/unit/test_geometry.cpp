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

#include <Eigen/Geometry>
#include <random>

#include "fixtures.hpp"
#include "memloc/errors.hpp"
#include "memloc/geometry.hpp"
#include "oracles.hpp"

using namespace memloc;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent, const Vec3& offset = Vec3::Zero()) {
  std::uniform_real_distribution<double> u(0, extent);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.emplace_back(offset + Vec3(u(rng), u(rng), u(rng)));
  return c;
}

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Pose p;
  p.rotation = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized().toRotationMatrix();
  p.translation = Vec3(g(rng), g(rng), g(rng));
  return p;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("backproject closed forms") {
    const CameraIntrinsics k{200, 200, 50, 40, 101, 81};
    DepthMap d(101, 81);
    Mask m(101, 81);
    d.at(50, 40) = 2.0f;
    m.set(50, 40);
    auto c = backproject(d, m, k, Pose::identity(), {});
    REQUIRE(c.size() == 1);
    CHECK((c[0] - Vec3(0, 0, 2)).norm() < 1e-12);

    const CameraIntrinsics k2{200, 200, 50, 40, 201, 81};
    DepthMap d2(201, 81);
    Mask m2(201, 81);
    d2.at(150, 40) = 2.0f;
    m2.set(150, 40);
    c = backproject(d2, m2, k2, Pose::identity(), {});
    REQUIRE(c.size() == 1);
    CHECK((c[0] - Vec3(1, 0, 2)).norm() < 1e-12);

    d2.at(150, 40) = 25.0f;
    CHECK(backproject(d2, m2, k2, Pose::identity(), {0.1, 20.0}).empty());
    d2.at(150, 40) = 0.0f;
    CHECK(backproject(d2, m2, k2, Pose::identity(), {}).empty());
    CHECK_THROWS_AS(backproject(d, m2, k, Pose::identity(), {}), Error);
  }

  TEST_CASE("project degenerate cases") {
    const auto k = CameraIntrinsics::from_hfov(64, 48, 79);
    const Pose p = testing::heading_pose(Vec3(1, 1, 1), 30);
    CHECK(!project_point(Vec3(1, 1, 1), k, p).in_bounds);
    CHECK(project_point(Vec3(1, 1, 1), k, p).z == 0.0);
    const Vec3 behind = p.to_world(Vec3(0, 0, -2));
    CHECK(!project_point(behind, k, p).in_bounds);
    const auto ahead = project_point(p.to_world(Vec3(0, 0, 2)), k, p);
    CHECK(ahead.in_bounds);
    CHECK(ahead.u == doctest::Approx(k.cx));
  }

  TEST_CASE("project inverts backproject on random frames") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> z(0.2, 15.0);
    for (int t = 0; t < 10; ++t) {
      const auto k = CameraIntrinsics::from_hfov(40, 30, 60 + 5 * t);
      const Pose pose = random_pose(rng);
      DepthMap d(40, 30);
      for (auto& v : d.values) v = static_cast<float>(std::round(z(rng) / d.quantization) * d.quantization);
      const auto cloud = backproject(d, Mask::full(40, 30), k, pose, {});
      REQUIRE(cloud.size() == 1200);
      const auto proj = project(cloud, k, pose);
      for (std::size_t i = 0; i < proj.size(); ++i) {
        const int u = static_cast<int>(i % 40), v = static_cast<int>(i / 40);
        CHECK(proj[i].in_bounds);
        CHECK(std::abs(proj[i].u - u) < 0.5);
        CHECK(std::abs(proj[i].v - v) < 0.5);
        CHECK(std::abs(proj[i].z - d.at(u, v)) < d.quantization);
      }
    }
  }

  TEST_CASE("median masked depth") {
    DepthMap d(3, 1);
    Mask m = Mask::full(3, 1);
    d.values = {1, 2, 100};
    CHECK(median_masked_depth(d, m) == 2.0);
    d.values = {1, 2, 0};
    CHECK(median_masked_depth(d, m) == 1.5);
    DepthMap plane(4, 4);
    for (auto& v : plane.values) v = 3.0f;
    CHECK(median_masked_depth(plane, Mask::full(4, 4)) == 3.0);
    CHECK(median_masked_depth(plane, Mask(4, 4)) == kDiscardedView);
  }

  TEST_CASE("cloud overlap") {
    std::mt19937_64 rng(8);
    const auto a = random_cloud(rng, 100, 1.0);
    CHECK(cloud_overlap(a, a, 0.1) == 1.0);
    CHECK(cloud_overlap(a, random_cloud(rng, 100, 1.0, Vec3(10, 0, 0)), 0.1) == 0.0);
    CHECK(cloud_overlap(a, {}, 0.1) == 0.0);
    CHECK_THROWS_AS(cloud_overlap(a, a, 0.0), Error);

    // 100-point cloud, exactly 20 points coincide with b.
    PointCloud small, big;
    for (int i = 0; i < 100; ++i) small.emplace_back(i * 1.0, 0, 0);
    for (int i = 0; i < 20; ++i) big.push_back(small[static_cast<std::size_t>(i * 5)]);
    for (int i = 0; i < 200; ++i) big.emplace_back(i * 1.0, 50, 0);
    CHECK(cloud_overlap(small, big, 0.1) == 0.2);
    CHECK(oracle::overlap(small, big, 0.1) == 0.2);

    for (int t = 0; t < 30; ++t) {
      const auto x = random_cloud(rng, 50 + t * 7, 1.0);
      const auto y = random_cloud(rng, 80, 1.0, Vec3(0.5, 0.2, 0));
      const double r = 0.02 + 0.01 * t;
      const double got = cloud_overlap(x, y, r);
      CHECK(got == oracle::overlap(x, y, r));
      CHECK(got >= 0.0);
      CHECK(got <= 1.0);
    }
    const auto p = random_cloud(rng, 60, 1.0), q = random_cloud(rng, 60, 1.0, Vec3(0.3, 0, 0));
    CHECK(cloud_overlap(p, q, 0.1) == cloud_overlap(q, p, 0.1));
  }

  TEST_CASE("min point distance") {
    const PointCloud a{Vec3(0, 0, 0)}, b{Vec3(1, 0, 0)};
    CHECK(min_point_distance(a, b) == 1.0);
    CHECK(min_point_distance(a, a) == 0.0);
    CHECK_THROWS_AS(min_point_distance(a, {}), Error);
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
      const auto x = random_cloud(rng, 200, 2.0), y = random_cloud(rng, 200, 2.0, Vec3(1.5 + 0.1 * t, 0, 0));
      const double got = min_point_distance(x, y);
      CHECK(got == oracle::min_distance(x, y));
      CHECK(got == min_point_distance(y, x));
      const Vec3 delta(0.05, -0.1, 0.02);
      PointCloud moved = y;
      for (auto& p : moved) p += delta;
      CHECK(std::abs(min_point_distance(x, moved) - got) <= delta.norm() + 1e-12);
    }
  }

  TEST_CASE("frustum_contains") {
    const auto k = CameraIntrinsics::from_hfov(64, 48, 79);
    const PointCloud axis{Vec3(0, 0, 2), Vec3(0.01, 0, 2)};
    CHECK(frustum_contains(k, Pose::identity(), axis));
    const PointCloud behind{Vec3(0, 0, -2)};
    CHECK(!frustum_contains(k, Pose::identity(), behind));
    PointCloud half{Vec3(0, 0, 2), Vec3(0, 0, 3), Vec3(0, 0, -1), Vec3(0, 0, -2)};
    CHECK(frustum_contains(k, Pose::identity(), half));
    half.emplace_back(0, 0, -3);
    CHECK(!frustum_contains(k, Pose::identity(), half));
    const PointCloud far{Vec3(0, 0, 20.5)};
    CHECK(!frustum_contains(k, Pose::identity(), far));
  }

  TEST_CASE("visible fraction against a depth buffer") {
    const auto k = CameraIntrinsics::from_hfov(64, 48, 79);
    const auto wall = testing::plane_keyframe(0, 64, 48, 79, 3.0);
    const auto surface = backproject(wall.depth, Mask::full(64, 48), k, Pose::identity(), {});
    CHECK(visible_fraction(surface, wall.depth, k, Pose::identity(), 0.1) == 1.0);
    // The same cloud pushed behind a nearer wall.
    const auto near_wall = testing::plane_keyframe(0, 64, 48, 79, 1.0);
    CHECK(visible_fraction(surface, near_wall.depth, k, Pose::identity(), 0.1) == 0.0);
    const PointCloud out_of_view{Vec3(0, 0, -1)};
    CHECK(visible_fraction(out_of_view, wall.depth, k, Pose::identity(), 0.1) == 0.0);
    DepthMap holes = wall.depth;
    std::fill(holes.values.begin(), holes.values.end(), 0.0f);
    CHECK(visible_fraction(surface, holes, k, Pose::identity(), 0.1) == 0.0);
    CHECK_THROWS_AS(visible_fraction(surface, wall.depth, k, Pose::identity(), -0.1), Error);
  }

  TEST_CASE("bounding box and PLY export") {
    testing::TempDir tmp;
    const PointCloud c{Vec3(0, 1, 2), Vec3(-1, 3, 0.5), Vec3(2, 0, 1)};
    const auto b = BoundingBox::of(c);
    CHECK(b.center() == Vec3(0.5, 1.5, 1.25));
    CHECK_THROWS_AS(BoundingBox::of({}), Error);
    write_ply(tmp / "c.ply", c);
    const auto back = read_ply(tmp / "c.ply");
    REQUIRE(back.size() == 3);
    CHECK((back[1] - c[1]).norm() < 1e-6);
    CHECK(testing::slurp(tmp / "c.ply").find("format binary_little_endian 1.0") != std::string::npos);
  }
}
