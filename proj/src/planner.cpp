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

#include "graspfactory/planner.hpp"

#include <algorithm>

namespace gf {
namespace {

int jittered_steps(double seconds, double jitter, Rng& rng) {
  const double scale = 1.0 + uniform(rng, -jitter, jitter);
  return std::max(1, static_cast<int>(std::lround(seconds * scale / kControlPeriod)));
}

bool poses_equal(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm() <= 1e-6 &&
         rotation_distance(a.linear(), b.linear()) <= 1e-6;
}

}  // namespace

std::string instruction_for(const std::string& category) {
  return "pick up the " + category;
}

bool pose_clear(const Pose& tcp, double width, const SceneLayout& layout,
                const std::string& target_id, const GripperSpec& gripper) {
  const auto boxes = gripper_boxes(tcp, width, gripper);
  if (boxes[0].min_z() < layout.table_height || boxes[1].min_z() < layout.table_height)
    return false;
  if (boxes[2].min_z() < layout.table_height + gripper.approach_clearance) return false;
  for (const auto& p : layout.placements) {
    if (p.instance_id == target_id) continue;
    const Vec3 c = p.world_center();
    for (const auto& box : boxes)
      if (box.distance(c) < p.bounding_radius + gripper.approach_clearance) return false;
  }
  return true;
}

std::vector<TrajectoryStep> plan_grasp_trajectory(const SceneLayout& layout,
                                                  const std::string& target_id,
                                                  const GraspPose& grasp,
                                                  const GripperSpec& gripper, Rng& rng,
                                                  const PlannerConfig& config) {
  (void)layout.find(target_id);

  // Start pose: uniform in the start box, pointing down with random yaw/tilt.
  const Eigen::Vector2d wc = layout.workspace.center();
  const Vec3 center(wc.x(), wc.y(), layout.table_height + config.start_height);
  Vec3 start_pos;
  for (int i = 0; i < 3; ++i)
    start_pos[i] = center[i] + config.start_box_size[i] * uniform(rng, -0.5, 0.5);
  const double yaw = deg2rad(uniform(rng, -config.start_max_yaw_deg, config.start_max_yaw_deg));
  const double tilt = deg2rad(uniform(rng, -config.start_max_tilt_deg, config.start_max_tilt_deg));
  const double tilt_axis = uniform(rng, 0.0, 2.0 * M_PI);
  const Mat3 down = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  const Quat start_rot(
      Eigen::AngleAxisd(tilt, Vec3(std::cos(tilt_axis), std::sin(tilt_axis), 0.0)) *
      Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * down);

  const int n_approach = jittered_steps(config.approach_s, config.duration_jitter, rng);
  const int n_close = jittered_steps(config.close_s, config.duration_jitter, rng);
  const int n_lift = jittered_steps(config.lift_s, config.duration_jitter, rng);

  std::vector<TrajectoryStep> steps;
  steps.reserve(n_approach + n_close + n_lift + 1);
  auto push = [&](const Pose& pose, Gripper g) {
    steps.push_back({kControlPeriod * static_cast<double>(steps.size()), pose, g});
  };

  const Quat grasp_rot = grasp.orientation.normalized();
  for (int k = 0; k <= n_approach; ++k) {
    const double s = min_jerk(static_cast<double>(k) / n_approach);
    push(make_pose(start_rot.slerp(s, grasp_rot),
                   (1.0 - s) * start_pos + s * grasp.position),
         Gripper::kOpen);
  }
  const Pose grasp_pose = grasp.pose();
  for (int k = 0; k < n_close; ++k) push(grasp_pose, Gripper::kClosed);
  for (int k = 1; k <= n_lift; ++k) {
    const double s = min_jerk(static_cast<double>(k) / n_lift);
    Pose p = grasp_pose;
    p.translation().z() += s * config.lift_height;
    push(p, Gripper::kClosed);
  }

  const double max_step = config.v_max * kControlPeriod;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!pose_clear(steps[i].ee_pose, grasp.width, layout, target_id, gripper))
      throw PlanRejected("clearance violated at step " + std::to_string(i));
    if (i == 0) continue;
    const Pose& a = steps[i - 1].ee_pose;
    const Pose& b = steps[i].ee_pose;
    if ((b.translation() - a.translation()).norm() > max_step)
      throw PlanRejected("speed bound exceeded at step " + std::to_string(i));
    if (steps[i].gripper == Gripper::kOpen && poses_equal(a, b))
      throw PlanRejected("stationary pre-closure step " + std::to_string(i));
  }
  return steps;
}

std::size_t closure_index(const std::vector<TrajectoryStep>& steps) {
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i].gripper == Gripper::kClosed) return i;
  return steps.size();
}

int count_closures(const std::vector<TrajectoryStep>& steps) {
  int n = 0;
  Gripper prev = Gripper::kOpen;
  for (const auto& s : steps) {
    if (prev == Gripper::kOpen && s.gripper == Gripper::kClosed) ++n;
    prev = s.gripper;
  }
  return n;
}

Pose target_pose_at(const Episode& e, std::size_t step) {
  const Pose& initial = e.layout.find(e.target_id).pose;
  const std::size_t c = closure_index(e.steps);
  if (step < c || c >= e.steps.size()) return initial;
  return e.steps[step].ee_pose * e.steps[c].ee_pose.inverse() * initial;
}

std::vector<std::vector<BBox2D>> label_bboxes(const Episode& e) {
  std::vector<std::vector<BBox2D>> out(e.steps.size());
  for (std::size_t i = 0; i < e.steps.size(); ++i) {
    try {
      out[i] = project_bbox(e.layout, e.rig, e.target_id, target_pose_at(e, i));
    } catch (const NotVisible&) {
    }
  }
  return out;
}

bool validate_lift(Episode& e, double mu) {
  e.success = false;
  const auto& steps = e.steps;
  if (count_closures(steps) != 1) return false;
  const std::size_t c = closure_index(steps);
  for (std::size_t i = c; i < steps.size(); ++i)
    if (steps[i].gripper != Gripper::kClosed) return false;

  // Rigid attachment: contacts ride with the hand.
  const Pose grasp_inv = e.grasp_label.pose().inverse();
  for (std::size_t i = c; i < steps.size(); ++i) {
    const Pose to_step = steps[i].ee_pose * grasp_inv;
    std::array<Contact, 2> moved;
    for (int k = 0; k < 2; ++k) {
      moved[k].point = to_step * e.grasp_label.contacts[k].point;
      moved[k].inward_normal = to_step.linear() * e.grasp_label.contacts[k].inward_normal;
    }
    if (!force_closure(moved, mu)) return false;
  }

  // Center of mass between the fingers: its coordinate along the closing
  // axis lies within the contact span.
  const Vec3 com_local = steps[c].ee_pose.inverse() * e.layout.find(e.target_id).world_com();
  if (std::abs(com_local.y()) > 0.5 * e.grasp_label.width + 1e-9) return false;

  const double lift =
      target_pose_at(e, steps.size() - 1).translation().z() -
      e.layout.find(e.target_id).pose.translation().z();
  if (lift < kMinLift) return false;
  e.success = true;
  return true;
}

Eigen::Matrix<double, kActionDim, 1> DeltaAction::flat() const {
  Eigen::Matrix<double, kActionDim, 1> v;
  v << translation, rotation, gripper;
  return v;
}

DeltaAction DeltaAction::from_flat(const Eigen::Matrix<double, kActionDim, 1>& v) {
  return {v.head<3>(), v.segment<3>(3), v(6)};
}

Eigen::Matrix<double, kChunkSize * kActionDim, 1> ActionChunk::flat() const {
  Eigen::Matrix<double, kChunkSize * kActionDim, 1> v;
  for (int i = 0; i < kChunkSize; ++i) v.segment<kActionDim>(i * kActionDim) = actions[i].flat();
  return v;
}

ActionChunk ActionChunk::from_flat(const Eigen::Matrix<double, kChunkSize * kActionDim, 1>& v) {
  ActionChunk c;
  for (int i = 0; i < kChunkSize; ++i)
    c.actions[i] = DeltaAction::from_flat(v.segment<kActionDim>(i * kActionDim));
  return c;
}

DeltaAction delta_between(const Pose& from, const Pose& to, Gripper next_state) {
  return {to.translation() - from.translation(),
          rotation_vector(to.linear() * from.linear().transpose()),
          next_state == Gripper::kClosed ? 1.0 : 0.0};
}

Pose apply_delta(const Pose& pose, const DeltaAction& d) {
  return make_pose(Mat3(from_rotation_vector(d.rotation) * pose.linear()),
                   Vec3(pose.translation() + d.translation));
}

std::vector<ActionChunk> to_delta_actions(const std::vector<TrajectoryStep>& steps) {
  if (steps.size() < 2) throw TooShort("need at least two steps for delta actions");
  const std::size_t n = steps.size() - 1;
  std::vector<ActionChunk> chunks((n + kChunkSize - 1) / kChunkSize);
  for (std::size_t i = 0; i < chunks.size() * kChunkSize; ++i) {
    const std::size_t k = std::min(i, n - 1);
    chunks[i / kChunkSize].actions[i % kChunkSize] =
        delta_between(steps[k].ee_pose, steps[k + 1].ee_pose, steps[k + 1].gripper);
  }
  return chunks;
}

Pose compose_actions(const Pose& initial, const std::vector<ActionChunk>& chunks,
                     std::size_t n_deltas) {
  Pose p = initial;
  for (std::size_t i = 0; i < n_deltas && i / kChunkSize < chunks.size(); ++i)
    p = apply_delta(p, chunks[i / kChunkSize].actions[i % kChunkSize]);
  return p;
}

Pose grasp_pose_supervision(const std::vector<TrajectoryStep>& steps,
                            const GraspPose& grasp_label, std::size_t step_index) {
  if (step_index >= steps.size()) throw PreconditionError("step index out of range");
  if (step_index < closure_index(steps)) return grasp_label.pose();
  if (step_index + 1 < steps.size()) return steps[step_index + 1].ee_pose;
  return steps[step_index].ee_pose;
}

}  // namespace gf
