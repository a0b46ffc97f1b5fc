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

#include "graspfactory/grasp.hpp"

#include <algorithm>
#include <limits>

namespace gf {
namespace {

// Robust angle between two vectors.
double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Absorbs rounding in atan/atan2 so that an exact-boundary contact, built
// by rotating a normal through atan(mu), is classified as closed.
constexpr double kConeSlack = 1e-12;

}  // namespace

double closure_angle(const std::array<Contact, 2>& c) {
  const Vec3 d = c[1].point - c[0].point;
  return std::max(angle_between(d, c[0].inward_normal),
                  angle_between(-d, c[1].inward_normal));
}

bool force_closure(const std::array<Contact, 2>& contacts, double mu) {
  if (!(mu > 0.0)) return false;
  return closure_angle(contacts) <= std::atan(mu) + kConeSlack;
}

std::optional<RayHit> raycast(const Mesh& mesh, const Vec3& origin, const Vec3& dir,
                              double t_min) {
  std::optional<RayHit> best;
  const auto& tris = mesh.triangles();
  for (Eigen::Index f = 0; f < tris.cols(); ++f) {
    const Vec3 a = mesh.vertex(tris(0, f));
    const Vec3 e1 = mesh.vertex(tris(1, f)) - a;
    const Vec3 e2 = mesh.vertex(tris(2, f)) - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = origin - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(qv) * inv;
    if (t > t_min && (!best || t < best->t)) best = RayHit{t, static_cast<int>(f)};
  }
  return best;
}

std::vector<GraspPose> sample_antipodal(const Mesh& mesh, const GripperSpec& gripper,
                                        double mu, int n, Rng& rng,
                                        const AntipodalOptions& options) {
  if (!(mu > 0.0)) throw PreconditionError("mu must be positive");
  if (n < 1) throw PreconditionError("n must be >= 1");

  const Eigen::Index n_tris = mesh.triangles().cols();
  std::vector<double> cumulative(n_tris);
  double total = 0.0;
  for (Eigen::Index f = 0; f < n_tris; ++f) cumulative[f] = total += mesh.face_area(f);
  // Face normals point outward for positively oriented meshes.
  const double orientation = mesh.signed_volume() >= 0.0 ? 1.0 : -1.0;
  const double t_min = 1e-9 * std::max(mesh.bounds().extent().maxCoeff(), 1e-12);
  const double max_tilt = deg2rad(options.max_approach_tilt_deg);

  std::vector<GraspPose> out;
  const long budget = static_cast<long>(options.casts_per_grasp) * n;
  for (long cast = 0; cast < budget && static_cast<int>(out.size()) < n; ++cast) {
    const double pick = uniform01(rng) * total;
    const Eigen::Index f = std::min<Eigen::Index>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
        n_tris - 1);
    double r1 = uniform01(rng), r2 = uniform01(rng);
    if (r1 + r2 > 1.0) r1 = 1.0 - r1, r2 = 1.0 - r2;
    const auto& tri = mesh.triangles().col(f);
    const Vec3 a = mesh.vertex(tri(0));
    const Vec3 p1 = a + r1 * (mesh.vertex(tri(1)) - a) + r2 * (mesh.vertex(tri(2)) - a);
    const Vec3 n1 = -orientation * mesh.face_normal(f);
    const double roll = uniform(rng, -max_tilt, max_tilt);

    const auto hit = raycast(mesh, p1, n1, t_min);
    if (!hit) continue;
    const Vec3 p2 = p1 + hit->t * n1;
    const Vec3 n2 = -orientation * mesh.face_normal(hit->triangle);
    const double width = hit->t;
    if (width > gripper.max_width || width < options.min_width) continue;
    const std::array<Contact, 2> contacts{Contact{p1, n1}, Contact{p2, n2}};
    if (!force_closure(contacts, mu)) continue;

    const Vec3 y = (p2 - p1) / width;
    Vec3 z = options.approach_hint - options.approach_hint.dot(y) * y;
    z = z.norm() < 1e-6 ? Vec3(y.unitOrthogonal()) : Vec3(z.normalized());
    z = Eigen::AngleAxisd(roll, y) * z;
    Mat3 r;
    r.col(0) = y.cross(z);
    r.col(1) = y;
    r.col(2) = z;

    GraspPose g;
    g.position = 0.5 * (p1 + p2);
    g.orientation = Quat(r).normalized();
    g.width = width;
    g.contacts = contacts;
    out.push_back(g);
  }
  if (out.empty())
    throw NoGraspFound("no antipodal grasp on '" + mesh.instance_id() + "' within budget");
  return out;
}

std::array<Vec3, 8> OrientedBox::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = frame * Vec3(s.cwiseProduct(half_extents));
  }
  return out;
}

double OrientedBox::min_z() const {
  // Support function along -z.
  const Vec3 down = frame.linear().transpose() * Vec3::UnitZ();
  return frame.translation().z() - down.cwiseAbs().dot(half_extents);
}

double OrientedBox::distance(const Vec3& p) const {
  const Vec3 local = frame.inverse() * p;
  const Vec3 outside = (local.cwiseAbs() - half_extents).cwiseMax(0.0);
  return outside.norm();
}

std::array<OrientedBox, 3> gripper_boxes(const Pose& tcp, double width,
                                         const GripperSpec& g) {
  const double tip = g.tip_overshoot;
  const double base = tip - g.reach();
  const double y_in = 0.5 * width;
  const double y_out = 0.5 * g.max_width + g.finger_thickness;
  const Vec3 finger_half(0.5 * g.finger_breadth, 0.5 * (y_out - y_in), 0.5 * g.reach());

  std::array<OrientedBox, 3> boxes;
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    boxes[side].frame =
        tcp * Eigen::Translation3d(0.0, sign * 0.5 * (y_in + y_out), 0.5 * (tip + base));
    boxes[side].half_extents = finger_half;
  }
  boxes[2].frame = tcp * Eigen::Translation3d(0.0, 0.0, base - 0.5 * g.palm_thickness);
  boxes[2].half_extents =
      Vec3(0.5 * g.palm_depth, 0.5 * g.palm_width, 0.5 * g.palm_thickness);
  return boxes;
}

bool grasp_collision_free(const GraspPose& grasp, const SceneLayout& layout,
                          const std::string& target_id, const GripperSpec& gripper) {
  (void)layout.find(target_id);
  const auto boxes = gripper_boxes(grasp.pose(), grasp.width, gripper);
  for (const auto& box : boxes) {
    if (box.min_z() < layout.table_height) return false;
    for (const auto& p : layout.placements) {
      if (p.instance_id == target_id) continue;
      if (box.distance(p.world_center()) <= p.bounding_radius) return false;
    }
  }
  return true;
}

}  // namespace gf
