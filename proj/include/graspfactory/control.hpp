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

// Command shaping between a chunked policy and a position-controlled arm.

#ifndef GRASPFACTORY_CONTROL_HPP_
#define GRASPFACTORY_CONTROL_HPP_

#include <array>
#include <complex>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include "graspfactory/common.hpp"
#include "graspfactory/planner.hpp"

namespace gf {

// N identical first-order low-pass sections in series,
// y <- y + alpha (u - y) per section.
template <int Sections = 3, typename Scalar = double>
class LowPassCascade {
  static_assert(Sections >= 1);

 public:
  LowPassCascade(Scalar cutoff_hz, Scalar sample_rate_hz)
      : cutoff_(cutoff_hz), sample_rate_(sample_rate_hz) {
    if (!(cutoff_hz > 0) || !(sample_rate_hz > 0) || !(cutoff_hz < sample_rate_hz / 2)) {
      throw ConfigError("need 0 < cutoff < sample_rate / 2");
    }
    const Scalar dt = Scalar(1) / sample_rate_;
    alpha_ = dt / (tau() + dt);
  }

  Scalar cutoff() const { return cutoff_; }
  Scalar sample_rate() const { return sample_rate_; }
  Scalar tau() const { return Scalar(1) / (Scalar(2 * M_PI) * cutoff_); }
  Scalar alpha() const { return alpha_; }
  bool initialized() const { return initialized_; }
  const std::array<Scalar, Sections>& state() const { return y_; }

  void reset(Scalar value) {
    y_.fill(value);
    initialized_ = true;
  }

  // The first call seeds every section to `u`, so constant input passes
  // through unchanged.
  Scalar step(Scalar u) {
    if (!initialized_) reset(u);
    Scalar in = u;
    for (auto& y : y_) {
      y += alpha_ * (in - y);
      in = y;
    }
    return in;
  }

 private:
  Scalar cutoff_;
  Scalar sample_rate_;
  Scalar alpha_{};
  std::array<Scalar, Sections> y_{};
  bool initialized_ = false;
};

using CascadedFilter = LowPassCascade<3, double>;
using FirstOrderFilter = LowPassCascade<1, double>;

// Unit-step response from rest (state 0), n samples.
template <int Sections, typename Scalar>
std::vector<Scalar> step_response(LowPassCascade<Sections, Scalar> filter, std::size_t n) {
  if (n < 1) throw PreconditionError("step response needs at least one sample");
  filter.reset(Scalar(0));
  std::vector<Scalar> out(n);
  for (auto& v : out) v = filter.step(Scalar(1));
  return out;
}

// Rational discrete filter, b(z)/a(z) with a[0] == 1, transposed direct form II.
class IirFilter {
 public:
  IirFilter(std::vector<double> b, std::vector<double> a);
  double step(double u);
  void reset() { std::fill(state_.begin(), state_.end(), 0.0); }
  const std::vector<double>& b() const { return b_; }
  const std::vector<double>& a() const { return a_; }
  double dc_gain() const;

 private:
  std::vector<double> b_, a_, state_;
};

struct AnalogZpk {
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double gain = 1.0;
};

// Analog low-pass prototypes with their -3 dB point at 1 rad/s.
AnalogZpk butterworth_prototype(int order);
AnalogZpk chebyshev2_prototype(int order, double stopband_db);
AnalogZpk bessel_prototype(int order);

// Bilinear transform with prewarping so the -3 dB point lands on cutoff_hz;
// the result is rescaled to unit DC gain.
IirFilter discretize(const AnalogZpk& prototype, double cutoff_hz, double sample_rate_hz);

struct StepResponses {
  std::vector<double> cascade;      // three first-order sections
  std::vector<double> first_order;  // one section
  std::vector<double> butterworth3;
  std::vector<double> chebyshev2;
  std::vector<double> bessel3;
};
StepResponses compare_step_responses(double cutoff_hz, double sample_rate_hz, std::size_t n);
// One CSV per variant (sample, t, y) under `dir`; returns the files written.
std::vector<std::filesystem::path> write_step_responses(const StepResponses& r,
                                                        double sample_rate_hz,
                                                        const std::filesystem::path& dir);

// Next setpoint along `path`: the point nearest to `current` advanced by at
// most `max_step` of arc length. Orientation follows the same arc parameter.
Pose interpolate_positional(const Pose& current, const std::vector<Pose>& path,
                            double max_step);

// Arc-length parameter of the point on `path` nearest to `p`.
double nearest_arc(const Vec3& p, const std::vector<Pose>& path);

// Pending absolute setpoints derived from action chunks, plus the last
// command that went out. Commands move toward the head of the path by at most
// max_step per tick, so the output is continuous however the path changes.
struct CommandStream {
  Pose last_command = Pose::Identity();
  std::deque<Pose> pending;
  double max_step = 0.01;          // meters per tick
  double max_rotation_step = 0.05; // radians per tick

  explicit CommandStream(const Pose& start = Pose::Identity(), double step = 0.01)
      : last_command(start), max_step(step) {}

  Pose tick();  // emits and records the next command
};

// Keeps the first `latency_steps` pending setpoints and replaces the rest with
// the chunk's deltas integrated from the retained tail (or from the last
// command when nothing is retained).
void receding_merge(CommandStream& stream, const ActionChunk& chunk, std::size_t latency_steps);

// Component-wise cascade over translation and rotation vector.
class PoseFilter {
 public:
  PoseFilter(double cutoff_hz, double sample_rate_hz);
  Pose step(const Pose& target);

 private:
  std::vector<CascadedFilter> channels_;
};

// Latest-wins single-slot handoff from a chunk producer to the control loop.
template <typename T>
class Mailbox {
 public:
  void post(T value) {
    std::lock_guard lock(mutex_);
    slot_ = std::move(value);
    ++posted_;
  }
  std::optional<T> take() {
    std::lock_guard lock(mutex_);
    std::optional<T> out;
    out.swap(slot_);
    return out;
  }
  std::size_t posted() const {
    std::lock_guard lock(mutex_);
    return posted_;
  }

 private:
  mutable std::mutex mutex_;
  std::optional<T> slot_;
  std::size_t posted_ = 0;
};

}  // namespace gf

#endif  // GRASPFACTORY_CONTROL_HPP_
