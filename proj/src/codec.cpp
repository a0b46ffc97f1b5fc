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

#include "graspfactory/codec.hpp"

#include <bit>
#include <cstring>

namespace gf {
namespace {

static_assert(std::endian::native == std::endian::little,
              "codec assumes a little-endian host");

void append_le64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t read_le64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

// Field tags. Kept stable; new fields take new numbers.
namespace tag {
enum Episode : std::uint8_t {
  kIndex = 1, kInstruction, kLayout, kRig, kTarget, kStep, kGrasp, kBoxes, kSuccess
};
enum Layout : std::uint8_t { kTable = 1, kWorkspace, kSeed, kPlacement };
enum Placement : std::uint8_t {
  kId = 1, kCategory, kPose, kExtent, kLocalCenter, kRadius, kLocalCom,
  kFootprintCenter, kFootprintRadius
};
enum View : std::uint8_t { kView = 1 };
enum ViewField : std::uint8_t { kPosition = 1, kLookat, kRotation, kIntrinsics, kImageSize };
enum Step : std::uint8_t { kTime = 1, kStepPose, kGripper };
enum Grasp : std::uint8_t { kGraspPosition = 1, kOrientation, kWidth, kContact };
enum ContactField : std::uint8_t { kPoint = 1, kNormal };
enum Boxes : std::uint8_t { kBox = 1 };
}  // namespace tag

void put_pose(Encoder& e, std::uint8_t t, const Pose& p) {
  double v[12];
  Eigen::Map<Mat3> rot(v);
  rot = p.linear();
  Eigen::Map<Vec3> trans(v + 9);
  trans = p.translation();
  e.put_reals(t, v, 12);
}

Pose get_pose(const Decoder& d) {
  double v[12];
  d.as_reals(v, 12);
  return make_pose(Mat3(Eigen::Map<const Mat3>(v)), Vec3(Eigen::Map<const Vec3>(v + 9)));
}

Vec3 get_vec3(const Decoder& d) {
  Vec3 v;
  d.as_reals(v.data(), 3);
  return v;
}

std::string encode_placement(const Placement& p) {
  Encoder e;
  e.put_bytes(tag::kId, p.instance_id);
  e.put_bytes(tag::kCategory, p.category);
  put_pose(e, tag::kPose, p.pose);
  e.put_f64(tag::kExtent, p.extent);
  e.put_reals(tag::kLocalCenter, p.local_center.data(), 3);
  e.put_f64(tag::kRadius, p.bounding_radius);
  e.put_reals(tag::kLocalCom, p.local_com.data(), 3);
  e.put_reals(tag::kFootprintCenter, p.footprint_center.data(), 2);
  e.put_f64(tag::kFootprintRadius, p.footprint_radius);
  return e.release();
}

Placement decode_placement(std::string_view bytes) {
  Placement p;
  Decoder d(bytes);
  while (d.next()) {
    switch (d.tag()) {
      case tag::kId: p.instance_id = d.as_string(); break;
      case tag::kCategory: p.category = d.as_string(); break;
      case tag::kPose: p.pose = get_pose(d); break;
      case tag::kExtent: p.extent = d.as_f64(); break;
      case tag::kLocalCenter: p.local_center = get_vec3(d); break;
      case tag::kRadius: p.bounding_radius = d.as_f64(); break;
      case tag::kLocalCom: p.local_com = get_vec3(d); break;
      case tag::kFootprintCenter: d.as_reals(p.footprint_center.data(), 2); break;
      case tag::kFootprintRadius: p.footprint_radius = d.as_f64(); break;
      default: break;
    }
  }
  return p;
}

std::string encode_view(const CameraView& v) {
  Encoder e;
  e.put_reals(tag::kPosition, v.position.data(), 3);
  e.put_reals(tag::kLookat, v.lookat.data(), 3);
  e.put_reals(tag::kRotation, v.world_from_camera.data(), 9);
  const double k[4] = {v.intrinsics.fx, v.intrinsics.fy, v.intrinsics.cx, v.intrinsics.cy};
  e.put_reals(tag::kIntrinsics, k, 4);
  e.put_u64(tag::kImageSize, (static_cast<std::uint64_t>(v.intrinsics.width) << 32) |
                                 static_cast<std::uint32_t>(v.intrinsics.height));
  return e.release();
}

CameraView decode_view(std::string_view bytes) {
  CameraView v;
  Decoder d(bytes);
  while (d.next()) {
    switch (d.tag()) {
      case tag::kPosition: v.position = get_vec3(d); break;
      case tag::kLookat: v.lookat = get_vec3(d); break;
      case tag::kRotation: d.as_reals(v.world_from_camera.data(), 9); break;
      case tag::kIntrinsics: {
        double k[4];
        d.as_reals(k, 4);
        v.intrinsics.fx = k[0], v.intrinsics.fy = k[1];
        v.intrinsics.cx = k[2], v.intrinsics.cy = k[3];
        break;
      }
      case tag::kImageSize: {
        const std::uint64_t s = d.as_u64();
        v.intrinsics.width = static_cast<int>(s >> 32);
        v.intrinsics.height = static_cast<int>(s & 0xffffffffu);
        break;
      }
      default: break;
    }
  }
  return v;
}

std::string encode_step(const TrajectoryStep& s) {
  Encoder e;
  e.put_f64(tag::kTime, s.t);
  put_pose(e, tag::kStepPose, s.ee_pose);
  e.put_u64(tag::kGripper, static_cast<std::uint64_t>(s.gripper));
  return e.release();
}

TrajectoryStep decode_step(std::string_view bytes) {
  TrajectoryStep s;
  Decoder d(bytes);
  while (d.next()) {
    switch (d.tag()) {
      case tag::kTime: s.t = d.as_f64(); break;
      case tag::kStepPose: s.ee_pose = get_pose(d); break;
      case tag::kGripper:
        s.gripper = d.as_u64() ? Gripper::kClosed : Gripper::kOpen;
        break;
      default: break;
    }
  }
  return s;
}

std::string encode_grasp(const GraspPose& g) {
  Encoder e;
  e.put_reals(tag::kGraspPosition, g.position.data(), 3);
  const double q[4] = {g.orientation.w(), g.orientation.x(), g.orientation.y(),
                       g.orientation.z()};
  e.put_reals(tag::kOrientation, q, 4);
  e.put_f64(tag::kWidth, g.width);
  for (const auto& c : g.contacts) {
    Encoder ce;
    ce.put_reals(tag::kPoint, c.point.data(), 3);
    ce.put_reals(tag::kNormal, c.inward_normal.data(), 3);
    e.put_bytes(tag::kContact, ce.bytes());
  }
  return e.release();
}

GraspPose decode_grasp(std::string_view bytes) {
  GraspPose g;
  Decoder d(bytes);
  std::size_t n_contacts = 0;
  while (d.next()) {
    switch (d.tag()) {
      case tag::kGraspPosition: g.position = get_vec3(d); break;
      case tag::kOrientation: {
        double q[4];
        d.as_reals(q, 4);
        g.orientation = Quat(q[0], q[1], q[2], q[3]);
        break;
      }
      case tag::kWidth: g.width = d.as_f64(); break;
      case tag::kContact: {
        if (n_contacts >= 2) throw ParseError("grasp has more than two contacts");
        Decoder cd(d.value());
        Contact& c = g.contacts[n_contacts++];
        while (cd.next()) {
          if (cd.tag() == tag::kPoint) c.point = get_vec3(cd);
          if (cd.tag() == tag::kNormal) c.inward_normal = get_vec3(cd);
        }
        break;
      }
      default: break;
    }
  }
  return g;
}

std::string encode_boxes(const std::vector<BBox2D>& boxes) {
  Encoder e;
  for (const auto& b : boxes) {
    const double v[5] = {static_cast<double>(b.view), b.x_min, b.y_min, b.x_max, b.y_max};
    e.put_reals(tag::kBox, v, 5);
  }
  return e.release();
}

std::vector<BBox2D> decode_boxes(std::string_view bytes) {
  std::vector<BBox2D> out;
  Decoder d(bytes);
  while (d.next()) {
    if (d.tag() != tag::kBox) continue;
    double v[5];
    d.as_reals(v, 5);
    if (v[0] != 0.0 && v[0] != 1.0) throw ParseError("bad view id");
    out.push_back({static_cast<ViewId>(static_cast<int>(v[0])), v[1], v[2], v[3], v[4]});
  }
  return out;
}

}  // namespace

void Encoder::header(std::uint8_t t, std::size_t length) {
  out_.push_back(static_cast<char>(t));
  std::uint64_t n = length;
  do {
    std::uint8_t byte = n & 0x7f;
    n >>= 7;
    if (n) byte |= 0x80;
    out_.push_back(static_cast<char>(byte));
  } while (n);
}

void Encoder::put_u64(std::uint8_t t, std::uint64_t v) {
  header(t, 8);
  append_le64(out_, v);
}

void Encoder::put_f64(std::uint8_t t, double v) {
  put_u64(t, std::bit_cast<std::uint64_t>(v));
}

void Encoder::put_reals(std::uint8_t t, const double* data, std::size_t n) {
  header(t, 8 * n);
  for (std::size_t i = 0; i < n; ++i) append_le64(out_, std::bit_cast<std::uint64_t>(data[i]));
}

void Encoder::put_bytes(std::uint8_t t, std::string_view bytes) {
  header(t, bytes.size());
  out_.append(bytes);
}

bool Decoder::next() {
  if (pos_ >= in_.size()) return false;
  tag_ = static_cast<std::uint8_t>(in_[pos_++]);
  std::uint64_t length = 0;
  for (int shift = 0;; shift += 7) {
    if (pos_ >= in_.size() || shift > 63) throw ParseError("truncated field header");
    const auto byte = static_cast<std::uint8_t>(in_[pos_++]);
    length |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if (!(byte & 0x80)) break;
  }
  if (length > in_.size() - pos_) throw ParseError("field overruns record");
  value_ = in_.substr(pos_, length);
  pos_ += length;
  return true;
}

std::uint64_t Decoder::as_u64() const {
  if (value_.size() != 8) throw ParseError("expected 8-byte integer");
  return read_le64(value_.data());
}

double Decoder::as_f64() const { return std::bit_cast<double>(as_u64()); }

void Decoder::as_reals(double* out, std::size_t n) const {
  if (value_.size() != 8 * n) throw ParseError("unexpected vector length");
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::bit_cast<double>(read_le64(value_.data() + 8 * i));
}

std::string encode_layout(const SceneLayout& l) {
  Encoder e;
  e.put_f64(tag::kTable, l.table_height);
  const double ws[4] = {l.workspace.min.x(), l.workspace.min.y(), l.workspace.max.x(),
                        l.workspace.max.y()};
  e.put_reals(tag::kWorkspace, ws, 4);
  e.put_u64(tag::kSeed, l.randomization_seed);
  for (const auto& p : l.placements) e.put_bytes(tag::kPlacement, encode_placement(p));
  return e.release();
}

SceneLayout decode_layout(std::string_view bytes) {
  SceneLayout l;
  Decoder d(bytes);
  while (d.next()) {
    switch (d.tag()) {
      case tag::kTable: l.table_height = d.as_f64(); break;
      case tag::kWorkspace: {
        double ws[4];
        d.as_reals(ws, 4);
        l.workspace.min = {ws[0], ws[1]};
        l.workspace.max = {ws[2], ws[3]};
        break;
      }
      case tag::kSeed: l.randomization_seed = d.as_u64(); break;
      case tag::kPlacement: l.placements.push_back(decode_placement(d.value())); break;
      default: break;
    }
  }
  return l;
}

std::string encode_episode(const Episode& ep) {
  Encoder e;
  e.put_u64(tag::kIndex, ep.episode_index);
  e.put_bytes(tag::kInstruction, ep.instruction);
  e.put_bytes(tag::kLayout, encode_layout(ep.layout));
  Encoder rig;
  for (const auto& v : ep.rig.views) rig.put_bytes(tag::kView, encode_view(v));
  e.put_bytes(tag::kRig, rig.bytes());
  e.put_bytes(tag::kTarget, ep.target_id);
  for (const auto& s : ep.steps) e.put_bytes(tag::kStep, encode_step(s));
  e.put_bytes(tag::kGrasp, encode_grasp(ep.grasp_label));
  for (const auto& b : ep.bbox_labels) e.put_bytes(tag::kBoxes, encode_boxes(b));
  e.put_u64(tag::kSuccess, ep.success ? 1 : 0);
  return e.release();
}

Episode decode_episode(std::string_view bytes) {
  Episode ep;
  Decoder d(bytes);
  std::size_t n_views = 0;
  while (d.next()) {
    switch (d.tag()) {
      case tag::kIndex: ep.episode_index = d.as_u64(); break;
      case tag::kInstruction: ep.instruction = d.as_string(); break;
      case tag::kLayout: ep.layout = decode_layout(d.value()); break;
      case tag::kRig: {
        Decoder rd(d.value());
        while (rd.next()) {
          if (rd.tag() != tag::kView) continue;
          if (n_views >= ep.rig.views.size()) throw ParseError("too many camera views");
          ep.rig.views[n_views++] = decode_view(rd.value());
        }
        break;
      }
      case tag::kTarget: ep.target_id = d.as_string(); break;
      case tag::kStep: ep.steps.push_back(decode_step(d.value())); break;
      case tag::kGrasp: ep.grasp_label = decode_grasp(d.value()); break;
      case tag::kBoxes: ep.bbox_labels.push_back(decode_boxes(d.value())); break;
      case tag::kSuccess: ep.success = d.as_u64() != 0; break;
      default: break;
    }
  }
  return ep;
}

}  // namespace gf
