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

#include "graspfactory/scene.hpp"

#include <algorithm>
#include <limits>

namespace gf {

const Placement& SceneLayout::find(const std::string& instance_id) const {
  for (const auto& p : placements)
    if (p.instance_id == instance_id) return p;
  throw UnknownInstance("no placement '" + instance_id + "' in layout");
}

InMemoryAssets::InMemoryAssets(std::vector<Mesh> meshes,
                               CategoryRegistry registry)
    : meshes_(std::move(meshes)),
      registry_(std::move(registry)),
      rotations_(meshes_.size()) {
  for (const auto& m : meshes_) (void)registry_.at(m.category());
}

const CategorySpec& InMemoryAssets::spec(std::size_t index) const {
  return registry_.at(meshes_.at(index).category());
}

PreparedAsset InMemoryAssets::prepare(std::size_t index, double extent) {
  const Mesh& base = meshes_.at(index);
  if (!rotations_[index]) {
    rotations_[index] = std::make_shared<const std::vector<Mat3>>(
        stable_poses(base, spec(index).upright_only));
  }
  return {std::make_shared<const Mesh>(scale_to_extent(base, extent)),
          rotations_[index]};
}

Placement place_object(const PreparedAsset& asset, const Mat3& r,
                       const Eigen::Vector2d& xy, double table_height) {
  const Mesh& mesh = *asset.mesh;
  const Vertices rotated = r * mesh.vertices();
  const Eigen::Vector2d lo = rotated.topRows<2>().rowwise().minCoeff();
  const Eigen::Vector2d hi = rotated.topRows<2>().rowwise().maxCoeff();
  const Eigen::Vector2d c = 0.5 * (lo + hi);
  const double zmin = rotated.row(2).minCoeff();

  Placement p;
  p.instance_id = mesh.instance_id();
  p.category = mesh.category();
  p.pose = make_pose(r, Vec3(xy.x() - c.x(), xy.y() - c.y(), table_height - zmin));
  const AlignedBox box = mesh.bounds();
  p.extent = box.extent().maxCoeff();
  p.local_center = box.center();
  p.bounding_radius =
      (mesh.vertices().colwise() - p.local_center).colwise().norm().maxCoeff();
  p.local_com = mesh.center_of_mass();
  p.footprint_center = xy;
  p.footprint_radius = (rotated.topRows<2>().colwise() - c).colwise().norm().maxCoeff();
  p.mesh = asset.mesh;
  return p;
}

bool placements_disjoint(const SceneLayout& layout) {
  const auto& ps = layout.placements;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i + 1; j < ps.size(); ++j)
      if ((ps[i].footprint_center - ps[j].footprint_center).norm() <
          ps[i].footprint_radius + ps[j].footprint_radius)
        return false;
  return true;
}

SceneLayout generate_layout(AssetSource& assets, int n_objects, Rng& rng,
                            const LayoutOptions& options) {
  if (assets.size() == 0) throw EmptyRegistry("asset source is empty");
  if (n_objects < 1) throw PreconditionError("n_objects must be >= 1");

  SceneLayout layout;
  layout.workspace = options.workspace;
  layout.table_height = uniform(rng, kTableHeightMin, kTableHeightMax);
  layout.randomization_seed = rng();

  int suffix = 0;
  for (int k = 0; k < n_objects; ++k) {
    const std::size_t idx = uniform_index(rng, assets.size());
    const double extent = draw_category_extent(assets.spec(idx), rng);
    const PreparedAsset asset = assets.prepare(idx, extent);
    const auto& rotations = *asset.stable_rotations;
    const Mat3 stable = rotations[uniform_index(rng, rotations.size())];
    const double yaw = uniform(rng, 0.0, 2.0 * M_PI);
    const Mat3 r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix() * stable;

    for (int attempt = 0; attempt < options.placement_attempts; ++attempt) {
      const Eigen::Vector2d xy(
          uniform(rng, layout.workspace.min.x(), layout.workspace.max.x()),
          uniform(rng, layout.workspace.min.y(), layout.workspace.max.y()));
      Placement candidate = place_object(asset, r, xy, layout.table_height);
      const bool clear = std::all_of(
          layout.placements.begin(), layout.placements.end(), [&](const Placement& q) {
            return (q.footprint_center - xy).norm() >=
                   q.footprint_radius + candidate.footprint_radius;
          });
      if (!clear) continue;
      // The same asset may appear twice; instance ids stay unique per layout.
      for (const auto& q : layout.placements) {
        if (q.instance_id == candidate.instance_id) {
          candidate.instance_id += "#" + std::to_string(++suffix);
          break;
        }
      }
      layout.placements.push_back(std::move(candidate));
      break;
    }
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Cameras

std::optional<Eigen::Vector2d> CameraView::project(const Vec3& world) const {
  const Vec3 pc = to_camera(world);
  if (pc.z() <= 1e-9) return std::nullopt;
  return Eigen::Vector2d(intrinsics.fx * pc.x() / pc.z() + intrinsics.cx,
                         intrinsics.fy * pc.y() / pc.z() + intrinsics.cy);
}

Mat3 lookat_rotation(const Vec3& position, const Vec3& lookat) {
  const Vec3 forward = (lookat - position).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitY();
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r;
}

namespace {

CameraView make_view(const Vec3& position, const Vec3& lookat) {
  CameraView v;
  v.position = position;
  v.lookat = lookat;
  v.world_from_camera = lookat_rotation(position, lookat);
  return v;
}

CameraView perturb_view(const Vec3& nominal_pos, const Vec3& nominal_lookat,
                        Rng& rng, const CameraRandomization& config) {
  // Uniform in the ball: direction from a normal triple, radius ~ cbrt(u).
  Vec3 dir(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  if (dir.norm() < 1e-12) dir = Vec3::UnitX();
  dir.normalize();
  const double radius = config.ball_radius * std::cbrt(uniform01(rng));
  const double max_angle = deg2rad(config.max_angle_deg);
  const double ax = uniform(rng, -max_angle, max_angle);
  const double ay = uniform(rng, -max_angle, max_angle);
  const double az = uniform(rng, -max_angle, max_angle);

  CameraView v;
  v.position = nominal_pos + radius * dir;
  // Rotate about x, then y, then z (camera frame).
  const Mat3 perturbation = (Eigen::AngleAxisd(az, Vec3::UnitZ()) *
                             Eigen::AngleAxisd(ay, Vec3::UnitY()) *
                             Eigen::AngleAxisd(ax, Vec3::UnitX()))
                                .toRotationMatrix();
  v.world_from_camera = lookat_rotation(nominal_pos, nominal_lookat) * perturbation;
  v.lookat = v.position +
             (nominal_lookat - nominal_pos).norm() * v.world_from_camera.col(2);
  return v;
}

}  // namespace

CameraRig nominal_rig() {
  return {{make_view(kFrontCameraPosition, kFrontCameraLookat),
           make_view(kSideCameraPosition, kSideCameraLookat)}};
}

CameraRig randomize_cameras(Rng& rng, const CameraRandomization& config) {
  CameraRig rig;
  rig.views[0] = perturb_view(kFrontCameraPosition, kFrontCameraLookat, rng, config);
  rig.views[1] = perturb_view(kSideCameraPosition, kSideCameraLookat, rng, config);
  return rig;
}

bool bbox_valid(const BBox2D& b, const Intrinsics& k) {
  return 0.0 <= b.x_min && b.x_min < b.x_max && b.x_max <= k.width &&
         0.0 <= b.y_min && b.y_min < b.y_max && b.y_max <= k.height;
}

std::vector<BBox2D> project_bbox(const SceneLayout& layout, const CameraRig& rig,
                                 const std::string& instance_id) {
  return project_bbox(layout, rig, instance_id, layout.find(instance_id).pose);
}

std::vector<BBox2D> project_bbox(const SceneLayout& layout, const CameraRig& rig,
                                 const std::string& instance_id,
                                 const Pose& object_pose) {
  const Placement& p = layout.find(instance_id);
  if (!p.mesh) throw PreconditionError("placement has no geometry attached");
  const Vertices world = object_pose * p.mesh->vertices();

  std::vector<BBox2D> out;
  for (std::size_t v = 0; v < rig.views.size(); ++v) {
    const CameraView& view = rig.views[v];
    const Intrinsics& k = view.intrinsics;
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    bool any = false;
    for (Eigen::Index i = 0; i < world.cols(); ++i) {
      const auto px = view.project(world.col(i));
      if (!px) continue;
      any = true;
      x0 = std::min(x0, px->x());
      y0 = std::min(y0, px->y());
      x1 = std::max(x1, px->x());
      y1 = std::max(y1, px->y());
    }
    if (!any) continue;
    BBox2D b{static_cast<ViewId>(v),
             std::clamp(x0, 0.0, static_cast<double>(k.width)),
             std::clamp(y0, 0.0, static_cast<double>(k.height)),
             std::clamp(x1, 0.0, static_cast<double>(k.width)),
             std::clamp(y1, 0.0, static_cast<double>(k.height))};
    if (b.x_min < b.x_max && b.y_min < b.y_max) out.push_back(b);
  }
  if (out.empty()) throw NotVisible("'" + instance_id + "' is outside both views");
  return out;
}

}  // namespace gf
