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

#ifndef GRASPFACTORY_COMMON_HPP_
#define GRASPFACTORY_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace gf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Pose = Eigen::Isometry3d;

// Every stochastic operation takes a caller-owned stream of this type.
using Rng = std::mt19937_64;

// Error hierarchy. Each documented failure mode has its own type so callers
// can branch on it without string matching.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define GF_DEFINE_ERROR(Name) \
  struct Name : Error {       \
    using Error::Error;       \
  }

GF_DEFINE_ERROR(ParseError);
GF_DEFINE_ERROR(DegenerateMesh);
GF_DEFINE_ERROR(PreconditionError);
GF_DEFINE_ERROR(NoStablePose);
GF_DEFINE_ERROR(NoGraspFound);
GF_DEFINE_ERROR(UnknownInstance);
GF_DEFINE_ERROR(EmptyRegistry);
GF_DEFINE_ERROR(NotVisible);
GF_DEFINE_ERROR(PlanRejected);
GF_DEFINE_ERROR(TooShort);
GF_DEFINE_ERROR(IoError);
GF_DEFINE_ERROR(QueueClosed);
GF_DEFINE_ERROR(EmptyStore);
GF_DEFINE_ERROR(OutOfBounds);
GF_DEFINE_ERROR(NotSynthetic);
GF_DEFINE_ERROR(EmptyInput);
GF_DEFINE_ERROR(ConfigError);

#undef GF_DEFINE_ERROR

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t a,
                                    std::uint64_t b = 0) {
  return mix64(mix64(mix64(global_seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

// Uniform double in [0, 1) from the top 53 bits. Unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Box-Muller; consumes two draws per call.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * static_cast<Scalar>(M_PI) / static_cast<Scalar>(180);
}

inline Pose make_pose(const Mat3& rotation, const Vec3& translation) {
  Pose p = Pose::Identity();
  p.linear() = rotation;
  p.translation() = translation;
  return p;
}

inline Pose make_pose(const Quat& rotation, const Vec3& translation) {
  return make_pose(rotation.normalized().toRotationMatrix(), translation);
}

// Rotation vector (axis * angle) of a rotation matrix.
inline Vec3 rotation_vector(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

inline Mat3 from_rotation_vector(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

// Geodesic angle between two rotations.
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

}  // namespace gf

#endif  // GRASPFACTORY_COMMON_HPP_
