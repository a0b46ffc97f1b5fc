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

#ifndef GRASPFACTORY_PLANNER_HPP_
#define GRASPFACTORY_PLANNER_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graspfactory/grasp.hpp"
#include "graspfactory/scene.hpp"

namespace gf {

inline constexpr double kControlPeriod = 0.1;  // 10 Hz
inline constexpr int kChunkSize = 4;
inline constexpr int kActionDim = 7;  // dx dy dz rx ry rz gripper
inline constexpr double kMinLift = 0.15;

enum class Gripper : std::uint8_t { kOpen = 0, kClosed = 1 };

struct TrajectoryStep {
  double t = 0.0;
  Pose ee_pose = Pose::Identity();
  Gripper gripper = Gripper::kOpen;
};

struct Episode {
  std::uint64_t episode_index = 0;
  std::string instruction;
  SceneLayout layout;
  CameraRig rig;
  std::string target_id;
  std::vector<TrajectoryStep> steps;
  GraspPose grasp_label;
  std::vector<std::vector<BBox2D>> bbox_labels;  // per step, visible views only
  bool success = false;
};

std::string instruction_for(const std::string& category);

struct PlannerConfig {
  // Start region: box centered above the workspace center.
  Vec3 start_box_size{0.3, 0.4, 0.2};
  double start_height = 0.35;  // above the table
  double start_max_yaw_deg = 45.0;
  double start_max_tilt_deg = 10.0;
  double approach_s = 6.0;
  double close_s = 0.5;
  double lift_s = 2.5;
  double duration_jitter = 0.2;  // relative, per phase
  double lift_height = 0.18;
  double v_max = 0.5;  // m/s
};

// Quintic minimum-jerk time scaling s(tau), tau in [0, 1].
inline double min_jerk(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

// Approach, close, lift. Throws PlanRejected when any step violates the
// clearance rule or the speed bound, or when two pre-closure poses coincide.
std::vector<TrajectoryStep> plan_grasp_trajectory(const SceneLayout& layout,
                                                  const std::string& target_id,
                                                  const GraspPose& grasp,
                                                  const GripperSpec& gripper, Rng& rng,
                                                  const PlannerConfig& config = {});

// Clearance rule for one end-effector pose: finger boxes above the table,
// palm at least approach_clearance above it, and every box at least
// approach_clearance away from each non-target bounding sphere.
bool pose_clear(const Pose& tcp, double width, const SceneLayout& layout,
                const std::string& target_id, const GripperSpec& gripper);

// Index of the first closed step, or steps.size() when there is none.
std::size_t closure_index(const std::vector<TrajectoryStep>& steps);
int count_closures(const std::vector<TrajectoryStep>& steps);

// Object pose at a step under rigid attachment after closure.
Pose target_pose_at(const Episode& episode, std::size_t step);

// Per-step bbox labels of the target; steps where it is not visible get an
// empty list.
std::vector<std::vector<BBox2D>> label_bboxes(const Episode& episode);

// Quasi-static lift check; sets episode.success.
bool validate_lift(Episode& episode, double mu);

struct DeltaAction {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // rotation vector of R_next * R^T
  double gripper = 0.0;          // commanded state after the step, 0 open, 1 closed

  Eigen::Matrix<double, kActionDim, 1> flat() const;
  static DeltaAction from_flat(const Eigen::Matrix<double, kActionDim, 1>& v);
};

struct ActionChunk {
  std::array<DeltaAction, kChunkSize> actions;

  Eigen::Matrix<double, kChunkSize * kActionDim, 1> flat() const;
  static ActionChunk from_flat(const Eigen::Matrix<double, kChunkSize * kActionDim, 1>& v);
};

DeltaAction delta_between(const Pose& from, const Pose& to, Gripper next_state);
Pose apply_delta(const Pose& pose, const DeltaAction& delta);

// Throws TooShort for fewer than two steps.
std::vector<ActionChunk> to_delta_actions(const std::vector<TrajectoryStep>& steps);

// Applies the first `n_deltas` deltas (padding excluded) starting at `initial`.
Pose compose_actions(const Pose& initial, const std::vector<ActionChunk>& chunks,
                     std::size_t n_deltas);

// Grasp-pose target for a step: the open-loop grasp before closure, the next
// step's pose from closure on, and the step itself at the end.
Pose grasp_pose_supervision(const std::vector<TrajectoryStep>& steps,
                            const GraspPose& grasp_label, std::size_t step_index);

}  // namespace gf

#endif  // GRASPFACTORY_PLANNER_HPP_
