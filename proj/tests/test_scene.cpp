// Copyright 2026 The graspfactory Authors
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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "graspfactory/scene.hpp"

using namespace gf;

namespace {

InMemoryAssets cube_assets() {
  CategoryRegistry reg;
  reg.add({"block", 0.04, 0.08, false});
  return InMemoryAssets({make_box(1, 1, 1, "block", "cube")}, reg);
}

InMemoryAssets library() { return InMemoryAssets(builtin_meshes(), builtin_categories()); }

void check_layout_invariants(const SceneLayout& layout) {
  CHECK(layout.table_height >= kTableHeightMin);
  CHECK(layout.table_height <= kTableHeightMax);
  for (const auto& p : layout.placements) {
    CHECK(layout.workspace.contains(p.pose.translation().head<2>()));
    REQUIRE(p.mesh);
    const Vertices w = p.pose * p.mesh->vertices();
    CHECK(w.row(2).minCoeff() == doctest::Approx(layout.table_height).epsilon(1e-9));
  }
  // Exhaustive pairwise bounding-circle check.
  for (std::size_t i = 0; i < layout.placements.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.placements.size(); ++j) {
      const auto& a = layout.placements[i];
      const auto& b = layout.placements[j];
      CHECK((a.footprint_center - b.footprint_center).norm() >=
            a.footprint_radius + b.footprint_radius - 1e-12);
      CHECK(a.instance_id != b.instance_id);
    }
  }
  CHECK(placements_disjoint(layout));
}

// Pinhole projection built from the lookat geometry alone.
Eigen::Vector2d pinhole(const Vec3& world, const Vec3& position, const Vec3& lookat,
                        const Intrinsics& k) {
  const Vec3 z = (lookat - position).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  const Vec3 y = z.cross(x);
  const Vec3 d = world - position;
  return {k.fx * d.dot(x) / d.dot(z) + k.cx, k.fy * d.dot(y) / d.dot(z) + k.cy};
}

}  // namespace

TEST_CASE("generate_layout with one cube") {
  auto assets = cube_assets();
  Rng rng(1);
  const SceneLayout layout = generate_layout(assets, 1, rng);
  REQUIRE(layout.placements.size() == 1);
  check_layout_invariants(layout);
}

TEST_CASE("generate_layout with a target and five distractors") {
  auto assets = library();
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const SceneLayout layout = generate_layout(assets, 6, rng);
    CHECK(layout.placements.size() >= 1);
    CHECK(layout.placements.size() <= 6);
    check_layout_invariants(layout);
  }
}

TEST_CASE("generate_layout errors and determinism") {
  InMemoryAssets empty({}, CategoryRegistry{});
  Rng rng(0);
  CHECK_THROWS_AS(generate_layout(empty, 1, rng), EmptyRegistry);
  auto assets = library();
  Rng a(77), b(77);
  const SceneLayout la = generate_layout(assets, 4, a);
  const SceneLayout lb = generate_layout(assets, 4, b);
  CHECK(la.table_height == lb.table_height);
  CHECK(la.randomization_seed == lb.randomization_seed);
  REQUIRE(la.placements.size() == lb.placements.size());
  for (std::size_t i = 0; i < la.placements.size(); ++i) {
    CHECK(la.placements[i].instance_id == lb.placements[i].instance_id);
    CHECK(la.placements[i].pose.matrix() == lb.placements[i].pose.matrix());
  }
}

TEST_CASE("table heights are uniform on [-0.1, 0.2]") {
  auto assets = cube_assets();
  constexpr int n = 10000;
  std::vector<double> h;
  h.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(99, i));
    h.push_back(generate_layout(assets, 1, rng).table_height);
  }
  std::sort(h.begin(), h.end());
  CHECK(h.front() >= -0.1);
  CHECK(h.back() <= 0.2);
  // Kolmogorov-Smirnov statistic against U(-0.1, 0.2); critical value at
  // alpha = 0.01 is 1.628 / sqrt(n).
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = (h[i] + 0.1) / 0.3;
    d = std::max({d, (i + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("randomize_cameras") {
  Rng still(3);
  const CameraRig nominal = randomize_cameras(still, CameraRandomization{0.0, 0.0});
  CHECK(nominal.views[0].position == Vec3(1.35, 0.0, 0.54));
  CHECK(nominal.views[1].position == Vec3(0.5, 0.69, 0.50));
  CHECK(nominal.views[0].lookat.isApprox(Vec3(0.2, 0, 0)));
  CHECK(nominal.views[1].lookat.isApprox(Vec3(0.5, 0, 0.1)));

  const CameraRig reference = nominal_rig();
  double worst = 0.0, worst_angle = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(5, i));
    const CameraRig rig = randomize_cameras(rng);
    for (int v = 0; v < 2; ++v) {
      worst = std::max(worst, (rig.views[v].position - reference.views[v].position).norm());
      worst_angle = std::max(worst_angle, rotation_distance(rig.views[v].world_from_camera,
                                                            reference.views[v].world_from_camera));
      CHECK((rig.views[v].position - rig.views[v].lookat).norm() > 0);
    }
  }
  CHECK(worst <= 0.15);
  CHECK(worst > 0.12);  // the ball is actually explored
  // Three independent rotations of at most 5 degrees each.
  CHECK(worst_angle <= deg2rad(15.0));

  Rng a(8), b(8);
  const CameraRig ra = randomize_cameras(a), rb = randomize_cameras(b);
  for (int v = 0; v < 2; ++v) {
    CHECK(ra.views[v].position == rb.views[v].position);
    CHECK(ra.views[v].world_from_camera == rb.views[v].world_from_camera);
  }
}

TEST_CASE("nominal camera frames match the lookat construction") {
  const CameraRig rig = nominal_rig();
  for (const auto& v : rig.views) {
    const Vec3 p = v.lookat + Vec3(0.05, -0.02, 0.03);
    const auto px = v.project(p);
    REQUIRE(px);
    CHECK((*px - pinhole(p, v.position, v.lookat, v.intrinsics)).norm() < 1e-9);
    const auto center = v.project(v.lookat);
    REQUIRE(center);
    CHECK((*center - Eigen::Vector2d(320, 240)).norm() < 1e-9);
  }
}

namespace {

SceneLayout single(const Mesh& mesh, const Vec3& at) {
  SceneLayout layout;
  Placement p;
  p.instance_id = "obj";
  p.category = "block";
  p.pose = make_pose(Mat3::Identity(), at);
  p.mesh = std::make_shared<const Mesh>(mesh);
  layout.placements.push_back(p);
  return layout;
}

}  // namespace

TEST_CASE("project_bbox of a point-like object at the front lookat") {
  const Mesh dot = make_box(0.002, 0.002, 0.002);
  const SceneLayout layout = single(dot, kFrontCameraLookat);
  const auto boxes = project_bbox(layout, nominal_rig(), "obj");
  REQUIRE(!boxes.empty());
  REQUIRE(boxes[0].view == ViewId::kFront);
  CHECK(boxes[0].x_min <= 320);
  CHECK(boxes[0].x_max >= 320);
  CHECK(boxes[0].y_min <= 240);
  CHECK(boxes[0].y_max >= 240);
  CHECK(boxes[0].x_max - boxes[0].x_min < 3);
}

TEST_CASE("project_bbox errors") {
  const Mesh cube = make_box(0.05, 0.05, 0.05);
  const SceneLayout behind = single(cube, Vec3(3.0, 2.0, 0.5));
  CHECK_THROWS_AS(project_bbox(behind, nominal_rig(), "obj"), NotVisible);
  CHECK_THROWS_AS(project_bbox(behind, nominal_rig(), "ghost"), UnknownInstance);
}

TEST_CASE("shrinking an object about its centroid shrinks its boxes") {
  auto assets = library();
  for (std::uint64_t s = 0; s < 30; ++s) {
    Rng rng(s);
    SceneLayout layout = generate_layout(assets, 1, rng);
    const CameraRig rig = randomize_cameras(rng);
    const std::string id = layout.placements[0].instance_id;
    std::vector<BBox2D> big;
    try {
      big = project_bbox(layout, rig, id);
    } catch (const NotVisible&) {
      continue;
    }
    const Mesh& m = *layout.placements[0].mesh;
    const Vec3 c = m.bounds().center();
    Pose shrink = Pose::Identity();
    shrink.linear() *= 0.5;
    shrink.translation() = 0.5 * c;
    layout.placements[0].mesh = std::make_shared<const Mesh>(transformed(m, shrink));
    const auto small = project_bbox(layout, rig, id);
    for (const auto& b : small) {
      const auto match = std::find_if(big.begin(), big.end(),
                                      [&](const BBox2D& o) { return o.view == b.view; });
      REQUIRE(match != big.end());
      CHECK(b.x_min >= match->x_min - 1e-9);
      CHECK(b.y_min >= match->y_min - 1e-9);
      CHECK(b.x_max <= match->x_max + 1e-9);
      CHECK(b.y_max <= match->y_max + 1e-9);
    }
  }
}

TEST_CASE("project_bbox agrees with a rasterizing oracle within a pixel") {
  auto assets = library();
  int compared = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(100 + s);
    const SceneLayout layout = generate_layout(assets, 1, rng);
    const CameraRig rig = nominal_rig();
    const Placement& p = layout.placements[0];
    std::vector<BBox2D> boxes;
    try {
      boxes = project_bbox(layout, rig, p.instance_id);
    } catch (const NotVisible&) {
      continue;
    }
    const Mesh world = transformed(*p.mesh, p.pose);
    for (const auto& b : boxes) {
      const CameraView& v = rig.views[static_cast<int>(b.view)];
      double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
      // Dense barycentric samples of every triangle.
      constexpr int kGrid = 6;
      for (Eigen::Index f = 0; f < world.triangle_count(); ++f) {
        const Vec3 a = world.vertex(world.triangles()(0, f));
        const Vec3 e1 = world.vertex(world.triangles()(1, f)) - a;
        const Vec3 e2 = world.vertex(world.triangles()(2, f)) - a;
        for (int i = 0; i <= kGrid; ++i) {
          for (int j = 0; i + j <= kGrid; ++j) {
            const Vec3 q = a + (double(i) / kGrid) * e1 + (double(j) / kGrid) * e2;
            const Eigen::Vector2d px = pinhole(q, v.position, v.lookat, v.intrinsics);
            x0 = std::min(x0, px.x()), x1 = std::max(x1, px.x());
            y0 = std::min(y0, px.y()), y1 = std::max(y1, px.y());
          }
        }
      }
      const Intrinsics& k = v.intrinsics;
      CHECK(std::abs(b.x_min - std::clamp(x0, 0.0, double(k.width))) <= 1.0);
      CHECK(std::abs(b.x_max - std::clamp(x1, 0.0, double(k.width))) <= 1.0);
      CHECK(std::abs(b.y_min - std::clamp(y0, 0.0, double(k.height))) <= 1.0);
      CHECK(std::abs(b.y_max - std::clamp(y1, 0.0, double(k.height))) <= 1.0);
      CHECK(bbox_valid(b, k));
      ++compared;
    }
  }
  CHECK(compared > 40);
}
