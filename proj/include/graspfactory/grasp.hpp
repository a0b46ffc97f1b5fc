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

#ifndef GRASPFACTORY_GRASP_HPP_
#define GRASPFACTORY_GRASP_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "graspfactory/assets.hpp"
#include "graspfactory/scene.hpp"

namespace gf {

inline constexpr double kDefaultFriction = 0.15;

struct Contact {
  Vec3 point = Vec3::Zero();
  Vec3 inward_normal = Vec3::UnitX();  // unit, pointing into the object
};

// Parallel-jaw hand. Frame convention: +z is the approach direction (palm
// towards fingertips), +y the closing axis, x = y cross z. The origin (TCP)
// sits midway between the contacts.
struct GripperSpec {
  double max_width = 0.08;
  double finger_length = 0.045;
  double finger_extension = 0.02;
  double approach_clearance = 0.01;
  double finger_thickness = 0.01;  // along y
  double finger_breadth = 0.02;    // along x
  double palm_width = 0.2;         // along y
  double palm_depth = 0.06;        // along x
  double palm_thickness = 0.06;    // along z
  double tip_overshoot = 0.005;    // fingertip reach past the TCP along z

  double reach() const { return finger_length + finger_extension; }
};

struct GraspPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  double width = 0.0;
  std::array<Contact, 2> contacts;

  Pose pose() const { return make_pose(orientation, position); }
};

// Two-contact test: the contact line lies within both friction cones. The
// cone boundary counts as inside.
bool force_closure(const std::array<Contact, 2>& contacts, double mu);

// Largest angle between the contact line and either inward normal.
double closure_angle(const std::array<Contact, 2>& contacts);

struct AntipodalOptions {
  Vec3 approach_hint = -Vec3::UnitZ();  // preferred approach direction
  double max_approach_tilt_deg = 30.0;  // random roll about the closing axis
  double min_width = 0.002;
  int casts_per_grasp = 100;            // rejection budget multiplier
};

// Rejection sampler: cast from area-weighted surface points along the
// inward normal, keep pairs within width bounds that pass force_closure.
// Throws NoGraspFound when the budget yields nothing.
std::vector<GraspPose> sample_antipodal(const Mesh& mesh, const GripperSpec& gripper,
                                        double mu, int n, Rng& rng,
                                        const AntipodalOptions& options = {});

// Nearest ray/mesh intersection beyond t_min (Moller-Trumbore).
struct RayHit {
  double t = 0.0;
  int triangle = -1;
};
std::optional<RayHit> raycast(const Mesh& mesh, const Vec3& origin, const Vec3& dir,
                              double t_min);

struct OrientedBox {
  Pose frame = Pose::Identity();  // box center and axes in the world
  Vec3 half_extents = Vec3::Zero();

  std::array<Vec3, 8> corners() const;
  double min_z() const;
  // Distance from a point to the box, zero inside.
  double distance(const Vec3& p) const;
};

// Two finger boxes (covering the stroke between `width` and fully open)
// and the palm, posed at `tcp`.
std::array<OrientedBox, 3> gripper_boxes(const Pose& tcp, double width,
                                         const GripperSpec& gripper);

// Fingers and palm clear of the table plane and of every non-target
// bounding sphere. Throws UnknownInstance.
bool grasp_collision_free(const GraspPose& grasp, const SceneLayout& layout,
                          const std::string& target_id,
                          const GripperSpec& gripper = {});

}  // namespace gf

#endif  // GRASPFACTORY_GRASP_HPP_
