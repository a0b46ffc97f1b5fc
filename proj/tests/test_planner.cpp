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

#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "graspfactory/planner.hpp"

using namespace gf;

namespace {

std::vector<TrajectoryStep> random_path(Rng& rng, int n) {
  std::vector<TrajectoryStep> steps;
  Pose p = make_pose(from_rotation_vector(Vec3(0.1, 0.2, 0.3)), Vec3(0.4, 0.0, 0.3));
  for (int i = 0; i < n; ++i) {
    steps.push_back({kControlPeriod * i, p, i > n / 2 ? Gripper::kClosed : Gripper::kOpen});
    const Vec3 dt(uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02));
    const Vec3 dr(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
    p = make_pose(from_rotation_vector(dr) * p.linear(), p.translation() + dt);
  }
  return steps;
}

double pose_error(const Pose& a, const Pose& b) {
  return std::max((a.translation() - b.translation()).norm(),
                  rotation_distance(a.linear(), b.linear()));
}

}  // namespace

TEST_CASE("generated episodes satisfy the trajectory invariants") {
  const PlannerConfig cfg;
  for (const Episode& e : gft::sample_episodes()) {
    CAPTURE(e.episode_index);
    const auto& s = e.steps;
    CHECK(s.size() >= 60);
    CHECK(s.size() <= 140);
    CHECK(count_closures(s) == 1);
    CHECK(e.instruction == instruction_for(e.layout.find(e.target_id).category));
    const std::size_t close = closure_index(s);
    REQUIRE(close < s.size());
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(s[i].t - s[i - 1].t == doctest::Approx(kControlPeriod).epsilon(1e-9));
      const double step = (s[i].ee_pose.translation() - s[i - 1].ee_pose.translation()).norm();
      CHECK(step <= cfg.v_max * kControlPeriod + 1e-12);
      if (i < close) {
        // Anti-hesitation.
        CHECK(std::max(step, rotation_distance(s[i].ee_pose.linear(), s[i - 1].ee_pose.linear())) >
              1e-6);
      }
    }
    // The hand closes on the labeled grasp.
    CHECK(pose_error(s[close].ee_pose, e.grasp_label.pose()) < 1e-9);
    // Lift of the object under rigid attachment.
    const double rise = target_pose_at(e, s.size() - 1).translation().z() -
                        target_pose_at(e, 0).translation().z();
    if (e.success) CHECK(rise >= kMinLift);
    CHECK(e.success);
    CHECK(e.bbox_labels.size() == s.size());
  }
}

TEST_CASE("approach third differences respect the quintic bound") {
  for (const Episode& e : gft::sample_episodes()) {
    const auto& s = e.steps;
    const std::size_t n = closure_index(s);  // approach samples 0..n-1, then the grasp
    const Vec3 d = s[n].ee_pose.translation() - s[0].ee_pose.translation();
    // A third forward difference is h^3 f'''(xi); the quintic's third
    // derivative never exceeds 60 in magnitude.
    const double h = 1.0 / static_cast<double>(n);
    const double bound = d.norm() * 60.0 * h * h * h + 1e-12;
    for (std::size_t k = 0; k + 3 <= n; ++k) {
      const Vec3 third = s[k + 3].ee_pose.translation() - 3 * s[k + 2].ee_pose.translation() +
                         3 * s[k + 1].ee_pose.translation() - s[k].ee_pose.translation();
      CHECK(third.norm() <= bound);
    }
  }
}

TEST_CASE("plan_grasp_trajectory: determinism and the approach obstacle") {
  const Episode& e = gft::sample_episodes().front();
  const GripperSpec g;
  Rng a(123), b(123);
  const auto sa = plan_grasp_trajectory(e.layout, e.target_id, e.grasp_label, g, a);
  const auto sb = plan_grasp_trajectory(e.layout, e.target_id, e.grasp_label, g, b);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].ee_pose.matrix() == sb[i].ee_pose.matrix());

  // A distractor sphere sitting on the approach path.
  SceneLayout blocked = e.layout;
  Placement d;
  d.instance_id = "obstacle";
  d.category = "ball";
  d.pose = make_pose(Mat3::Identity(), sa[closure_index(sa) / 2].ee_pose.translation());
  d.bounding_radius = 0.04;
  blocked.placements.push_back(d);
  Rng c(123);
  CHECK_THROWS_AS(plan_grasp_trajectory(blocked, e.target_id, e.grasp_label, g, c), PlanRejected);
}

TEST_CASE("validate_lift") {
  Episode e = gft::sample_episodes().front();
  CHECK(validate_lift(e, 0.15));
  CHECK(e.success);

  // Put the first contact exactly on the cone boundary at mu = 0.15.
  Episode edge = e;
  auto& c = edge.grasp_label.contacts;
  const Vec3 line = (c[1].point - c[0].point).normalized();
  const Vec3 axis = line.unitOrthogonal();
  c[0].inward_normal = Eigen::AngleAxisd(std::atan(0.15), axis) * line;
  c[1].inward_normal = -line;
  CHECK(validate_lift(edge, 0.15));
  CHECK_FALSE(validate_lift(edge, 0.14));
  CHECK_FALSE(edge.success);

  Episode none = e;
  for (auto& s : none.steps) s.gripper = Gripper::kOpen;
  CHECK_FALSE(validate_lift(none, 0.15));
}

TEST_CASE("to_delta_actions chunking and padding") {
  Rng rng(4);
  const auto nine = random_path(rng, 9);
  const auto chunks9 = to_delta_actions(nine);
  CHECK(chunks9.size() == 2);

  const auto ten = random_path(rng, 10);
  const auto chunks10 = to_delta_actions(ten);
  REQUIRE(chunks10.size() == 3);
  const DeltaAction last = chunks10[2].actions[0];  // the ninth delta
  for (int k = 1; k < kChunkSize; ++k) {
    CHECK(chunks10[2].actions[k].translation == last.translation);
    CHECK(chunks10[2].actions[k].rotation == last.rotation);
    CHECK(chunks10[2].actions[k].gripper == last.gripper);
  }
  CHECK_THROWS_AS(to_delta_actions(random_path(rng, 1)), TooShort);
}

TEST_CASE("delta actions of a constant trajectory are zero") {
  std::vector<TrajectoryStep> still;
  const Pose p = make_pose(from_rotation_vector(Vec3(0.5, 0, 0)), Vec3(0.1, 0.2, 0.3));
  for (int i = 0; i < 12; ++i) still.push_back({kControlPeriod * i, p, Gripper::kOpen});
  for (const auto& c : to_delta_actions(still)) {
    for (const auto& a : c.actions) {
      CHECK(a.translation.norm() == 0.0);
      CHECK(a.rotation.norm() < 1e-15);
      CHECK(a.gripper == 0.0);
    }
  }
}

TEST_CASE("delta actions round-trip") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto path = random_path(rng, 100);
    const auto chunks = to_delta_actions(path);
    const Pose end = compose_actions(path.front().ee_pose, chunks, path.size() - 1);
    CHECK((end.translation() - path.back().ee_pose.translation()).norm() < 1e-6);
    CHECK(rotation_distance(end.linear(), path.back().ee_pose.linear()) < 1e-6);
    // Independent stepwise check: each delta maps one pose onto the next.
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const DeltaAction& d = chunks[i / kChunkSize].actions[i % kChunkSize];
      CHECK(d.translation.isApprox(path[i + 1].ee_pose.translation() - path[i].ee_pose.translation()));
      CHECK(pose_error(apply_delta(path[i].ee_pose, d), path[i + 1].ee_pose) < 1e-9);
      CHECK(d.gripper == (path[i + 1].gripper == Gripper::kClosed ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("flat action layout round-trips") {
  DeltaAction d{Vec3(1, 2, 3), Vec3(4, 5, 6), 1.0};
  CHECK(DeltaAction::from_flat(d.flat()).flat() == d.flat());
  ActionChunk c;
  for (int k = 0; k < kChunkSize; ++k) c.actions[k] = DeltaAction{Vec3::Constant(k), Vec3::Constant(-k), k % 2 * 1.0};
  CHECK(ActionChunk::from_flat(c.flat()).flat() == c.flat());
}

TEST_CASE("grasp_pose_supervision schedule") {
  const Episode& e = gft::sample_episodes().front();
  const auto& s = e.steps;
  const std::size_t close = closure_index(s);
  CHECK(pose_error(grasp_pose_supervision(s, e.grasp_label, 0), e.grasp_label.pose()) < 1e-12);
  CHECK(pose_error(grasp_pose_supervision(s, e.grasp_label, close - 1), e.grasp_label.pose()) < 1e-12);
  CHECK(pose_error(grasp_pose_supervision(s, e.grasp_label, close), s[close + 1].ee_pose) < 1e-12);
  CHECK(pose_error(grasp_pose_supervision(s, e.grasp_label, s.size() - 1), s.back().ee_pose) < 1e-12);
}

TEST_CASE("min_jerk profile endpoints") {
  CHECK(min_jerk(0.0) == 0.0);
  CHECK(min_jerk(1.0) == doctest::Approx(1.0));
  CHECK(min_jerk(0.5) == doctest::Approx(0.5));
}
