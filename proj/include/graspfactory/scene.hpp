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

#ifndef GRASPFACTORY_SCENE_HPP_
#define GRASPFACTORY_SCENE_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graspfactory/assets.hpp"

namespace gf {

inline constexpr double kTableHeightMin = -0.1;
inline constexpr double kTableHeightMax = 0.2;

// Axis-aligned placement rectangle on the table, robot frame.
struct Workspace {
  Eigen::Vector2d min{0.3, -0.25};
  Eigen::Vector2d max{0.7, 0.25};

  Eigen::Vector2d center() const { return 0.5 * (min + max); }
  bool contains(const Eigen::Vector2d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct Placement {
  std::string instance_id;
  std::string category;
  Pose pose = Pose::Identity();  // object frame -> robot frame
  double extent = 0.0;           // largest bbox extent after scaling
  Vec3 local_center = Vec3::Zero();  // bounding sphere center, object frame
  double bounding_radius = 0.0;
  Vec3 local_com = Vec3::Zero();
  Eigen::Vector2d footprint_center = Eigen::Vector2d::Zero();  // robot xy
  double footprint_radius = 0.0;
  // Scaled object-frame geometry. Not serialized; absent after decoding.
  std::shared_ptr<const Mesh> mesh;

  Vec3 world_center() const { return pose * local_center; }
  Vec3 world_com() const { return pose * local_com; }
};

struct SceneLayout {
  double table_height = 0.0;
  std::vector<Placement> placements;
  Workspace workspace;
  std::uint64_t randomization_seed = 0;  // stands in for texture/light draws

  // Throws UnknownInstance.
  const Placement& find(const std::string& instance_id) const;
};

// A mesh already scaled for one scene plus the rotations it may rest in.
struct PreparedAsset {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const std::vector<Mat3>> stable_rotations;
};

// What generate_layout draws objects from.
class AssetSource {
 public:
  virtual ~AssetSource() = default;
  virtual std::size_t size() const = 0;
  virtual const CategorySpec& spec(std::size_t index) const = 0;
  // Scaled to (approximately, for bucketing sources) `extent`.
  virtual PreparedAsset prepare(std::size_t index, double extent) = 0;
};

// Holds meshes in memory; stable rotations are computed once per asset
// (they do not depend on uniform scale).
class InMemoryAssets : public AssetSource {
 public:
  InMemoryAssets(std::vector<Mesh> meshes, CategoryRegistry registry);

  std::size_t size() const override { return meshes_.size(); }
  const CategorySpec& spec(std::size_t index) const override;
  PreparedAsset prepare(std::size_t index, double extent) override;

 private:
  std::vector<Mesh> meshes_;
  CategoryRegistry registry_;
  std::vector<std::shared_ptr<const std::vector<Mat3>>> rotations_;
};

struct LayoutOptions {
  Workspace workspace;
  int placement_attempts = 50;
};

// Throws EmptyRegistry for an empty source.
SceneLayout generate_layout(AssetSource& assets, int n_objects, Rng& rng,
                            const LayoutOptions& options = {});

// Places a prepared asset at footprint center `xy` with rotation `r` on the
// table. Exposed for tests and hand-built scenes.
Placement place_object(const PreparedAsset& asset, const Mat3& r,
                       const Eigen::Vector2d& xy, double table_height);

// True iff every pair of footprint circles is disjoint.
bool placements_disjoint(const SceneLayout& layout);

struct Intrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
};

// Camera axes follow the pinhole convention: x right, y down, z forward.
struct CameraView {
  Vec3 position = Vec3::Zero();
  Vec3 lookat = Vec3::UnitX();
  Mat3 world_from_camera = Mat3::Identity();
  Intrinsics intrinsics;

  Vec3 to_camera(const Vec3& world) const {
    return world_from_camera.transpose() * (world - position);
  }
  // Pixel coordinates, or nothing for points at or behind the image plane.
  std::optional<Eigen::Vector2d> project(const Vec3& world) const;
};

enum class ViewId : std::uint8_t { kFront = 0, kSide = 1 };

struct CameraRig {
  std::array<CameraView, 2> views;
};

struct CameraRandomization {
  double ball_radius = 0.15;
  double max_angle_deg = 5.0;
};

inline const Vec3 kFrontCameraPosition{1.35, 0.0, 0.54};
inline const Vec3 kFrontCameraLookat{0.2, 0.0, 0.0};
inline const Vec3 kSideCameraPosition{0.5, 0.69, 0.50};
inline const Vec3 kSideCameraLookat{0.5, 0.0, 0.1};

// Base orientation looking from `position` to `lookat` with world +z up.
Mat3 lookat_rotation(const Vec3& position, const Vec3& lookat);
CameraRig nominal_rig();
CameraRig randomize_cameras(Rng& rng, const CameraRandomization& config = {});

struct BBox2D {
  ViewId view = ViewId::kFront;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

bool bbox_valid(const BBox2D& box, const Intrinsics& intrinsics);

// Tight projection of the object's mesh vertices, clamped to each image.
// Views where nothing is visible are omitted; throws NotVisible when both
// are, UnknownInstance for a missing id.
std::vector<BBox2D> project_bbox(const SceneLayout& layout, const CameraRig& rig,
                                 const std::string& instance_id);
// Same, with the object moved to `object_pose` (e.g. while being lifted).
std::vector<BBox2D> project_bbox(const SceneLayout& layout, const CameraRig& rig,
                                 const std::string& instance_id,
                                 const Pose& object_pose);

}  // namespace gf

#endif  // GRASPFACTORY_SCENE_HPP_
