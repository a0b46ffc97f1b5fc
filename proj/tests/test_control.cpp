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
#include <complex>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "graspfactory/control.hpp"

using namespace gf;

namespace {

// Three identical sections from rest: y[n] = P(Bin(n + 3, alpha) >= 3).
double cascade_step_closed_form(double alpha, std::size_t n) {
  const double m = static_cast<double>(n) + 3.0;
  const double q = 1.0 - alpha;
  const double tail = std::pow(q, m) + m * alpha * std::pow(q, m - 1) +
                      0.5 * m * (m - 1) * alpha * alpha * std::pow(q, m - 2);
  return 1.0 - tail;
}

double magnitude(const IirFilter& f, double freq_hz, double fs) {
  const std::complex<double> z = std::polar(1.0, -2.0 * M_PI * freq_hz / fs);  // z^-1
  std::complex<double> num = 0, den = 0, zk = 1;
  for (std::size_t k = 0; k < std::max(f.b().size(), f.a().size()); ++k) {
    if (k < f.b().size()) num += f.b()[k] * zk;
    if (k < f.a().size()) den += f.a()[k] * zk;
    zk *= z;
  }
  return std::abs(num / den);
}

std::vector<Pose> straight_path(double length, int n) {
  std::vector<Pose> p;
  for (int i = 0; i <= n; ++i) p.push_back(make_pose(Mat3::Identity(), Vec3(length * i / n, 0, 0.3)));
  return p;
}

ActionChunk random_chunk(Rng& rng, double scale) {
  ActionChunk c;
  for (auto& a : c.actions) {
    for (int i = 0; i < 3; ++i) {
      a.translation(i) = uniform(rng, -scale, scale);
      a.rotation(i) = uniform(rng, -0.05, 0.05);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("cascade: constant input is a fixed point") {
  CascadedFilter f(10.0, 1000.0);
  for (int i = 0; i < 1000; ++i) CHECK(f.step(0.37) == 0.37);
  CHECK(f.alpha() == doctest::Approx(0.001 / (1.0 / (20 * M_PI) + 0.001)).epsilon(1e-14));
}

TEST_CASE("cascade: step response matches the closed form") {
  const CascadedFilter f(10.0, 1000.0);
  const auto y = step_response(f, 10000);
  double prev = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    CHECK(std::abs(y[n] - cascade_step_closed_form(f.alpha(), n)) < 1e-12);
    CHECK(y[n] >= prev);
    CHECK(y[n] <= 1.0);
    prev = y[n];
  }
  const double a = f.alpha();
  CHECK(y[0] == doctest::Approx(a * a * a).epsilon(1e-15));
  CHECK(step_response(f, 1) == std::vector<double>{y[0]});
  CHECK(step_response(FirstOrderFilter(10.0, 1000.0), 1)[0] == doctest::Approx(a));
  CHECK_THROWS_AS(step_response(f, 0), PreconditionError);
}

TEST_CASE("cascade: second difference changes sign once") {
  for (double fc : {1.0, 10.0, 100.0}) {
    const auto y = step_response(CascadedFilter(fc, 1000.0), 5000);
    int changes = 0;
    double last_sign = 0.0;
    double prev = 0.0, prev2 = 0.0;  // rest before the step
    for (double v : y) {
      const double d2 = v - 2 * prev + prev2;
      prev2 = prev;
      prev = v;
      if (std::abs(d2) < 1e-15) continue;
      const double s = d2 > 0 ? 1.0 : -1.0;
      if (last_sign != 0.0 && s != last_sign) ++changes;
      last_sign = s;
    }
    INFO("cutoff " << fc);
    CHECK(changes <= 1);
  }
}

TEST_CASE("cascade: no overshoot on monotone inputs") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    CascadedFilter f(uniform(rng, 0.5, 40.0), 1000.0);
    double u = uniform(rng, -1, 1);
    f.reset(u);
    double running_max = u;
    for (int i = 0; i < 500; ++i) {
      if (uniform01(rng) < 0.3) u += uniform(rng, 0, 0.5);
      running_max = std::max(running_max, u);
      CHECK(f.step(u) <= running_max + 1e-12);
    }
  }
}

TEST_CASE("cascade: bad cutoffs") {
  CHECK_THROWS_AS(CascadedFilter(0.0, 1000.0), ConfigError);
  CHECK_THROWS_AS(CascadedFilter(500.0, 1000.0), ConfigError);
  CHECK_THROWS_AS(CascadedFilter(10.0, -1.0), ConfigError);
}

TEST_CASE("iir comparison filters: unit DC gain and -3 dB at the cutoff") {
  const double fs = 1000.0, fc = 10.0;
  const std::pair<const char*, AnalogZpk> protos[] = {
      {"butterworth", butterworth_prototype(3)},
      {"chebyshev2", chebyshev2_prototype(3, 40.0)},
      {"bessel", bessel_prototype(3)},
  };
  for (const auto& [name, p] : protos) {
    INFO(name);
    const IirFilter f = discretize(p, fc, fs);
    CHECK(f.a()[0] == doctest::Approx(1.0));
    CHECK(f.dc_gain() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(magnitude(f, 0.0, fs) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(magnitude(f, fc, fs) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  }
}

TEST_CASE("butterworth magnitude follows the prewarped formula") {
  const double fs = 1000.0, fc = 25.0;
  const IirFilter f = discretize(butterworth_prototype(3), fc, fs);
  const double wc = std::tan(M_PI * fc / fs);
  for (double freq = 1.0; freq < 490.0; freq += 7.0) {
    const double w = std::tan(M_PI * freq / fs);
    const double want = 1.0 / std::sqrt(1.0 + std::pow(w / wc, 6));
    CHECK(std::abs(magnitude(f, freq, fs) - want) < 1e-9);
  }
}

TEST_CASE("chebyshev II stopband sits at -40 dB") {
  const double fs = 1000.0, fc = 10.0;
  const IirFilter f = discretize(chebyshev2_prototype(3, 40.0), fc, fs);
  double peak = 0.0;
  for (double freq = 3 * fc; freq < fs / 2; freq += 0.05) peak = std::max(peak, magnitude(f, freq, fs));
  CHECK(peak == doctest::Approx(0.01).epsilon(0.01));
}

TEST_CASE("iir filter from a step") {
  IirFilter f({0.5}, {1.0, -0.5});  // y = 0.5 u + 0.5 y[-1]
  CHECK(f.step(1.0) == 0.5);
  CHECK(f.step(1.0) == 0.75);
  f.reset();
  CHECK(f.step(1.0) == 0.5);
  CHECK_THROWS(IirFilter({1.0}, {0.0, 1.0}));
}

TEST_CASE("step response comparison and csv") {
  const auto r = compare_step_responses(10.0, 1000.0, 300);
  CHECK(r.cascade.size() == 300);
  CHECK(r.first_order.size() == 300);
  CHECK(r.cascade[0] < r.first_order[0]);
  CHECK(r.cascade[0] == doctest::Approx(std::pow(r.first_order[0], 3)).epsilon(1e-12));
  gft::TempDir dir("steps");
  const auto files = write_step_responses(r, 1000.0, dir.path());
  CHECK(files.size() == 5);
  for (const auto& p : files) {
    std::ifstream in(p);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 301);
  }
}

TEST_CASE("positional interpolation") {
  const auto path = straight_path(1.0, 10);
  const Pose end = path.back();
  CHECK(interpolate_positional(end, path, 0.05).translation() == end.translation());

  // Tracking a perfect controller takes at least length / max_step setpoints.
  Pose cur = path.front();
  int n = 0;
  while ((cur.translation() - end.translation()).norm() > 1e-12 && n < 1000) {
    const Pose next = interpolate_positional(cur, path, 0.05);
    CHECK((next.translation() - cur.translation()).norm() <= 0.05 + 1e-12);
    cur = next;
    ++n;
  }
  CHECK(n >= 20);
  CHECK(n <= 21);

  // A stalled controller never lets the setpoint run away.
  const Pose stalled = make_pose(Mat3::Identity(), Vec3(0.3, 0.02, 0.3));
  const Pose first = interpolate_positional(stalled, path, 0.05);
  for (int i = 0; i < 100; ++i) CHECK(interpolate_positional(stalled, path, 0.05).translation() == first.translation());
  CHECK(first.translation().x() == doctest::Approx(0.35));

  CHECK(nearest_arc(Vec3(0.42, 1.0, 0.3), path) == doctest::Approx(0.42));
  CHECK_THROWS_AS(interpolate_positional(cur, {}, 0.05), PreconditionError);
  CHECK_THROWS_AS(interpolate_positional(cur, path, 0.0), PreconditionError);
}

TEST_CASE("receding merge: latency 0 replaces, retained prefix survives") {
  Rng rng(33);
  CommandStream s(make_pose(Mat3::Identity(), Vec3(0.5, 0, 0.3)), 0.01);
  const ActionChunk a = random_chunk(rng, 0.01), b = random_chunk(rng, 0.01);
  receding_merge(s, a, 0);
  REQUIRE(s.pending.size() == kChunkSize);
  const auto after_a = s.pending;
  receding_merge(s, b, 0);
  Pose anchor = s.last_command;
  for (int i = 0; i < kChunkSize; ++i) {
    anchor = apply_delta(anchor, b.actions[i]);
    CHECK((s.pending[i].translation() - anchor.translation()).norm() < 1e-15);
  }
  s.pending = after_a;
  receding_merge(s, b, 2);
  CHECK(s.pending.size() == 2 + kChunkSize);
  CHECK(s.pending[0].translation() == after_a[0].translation());
  CHECK(s.pending[1].translation() == after_a[1].translation());
}

TEST_CASE("receding merge: an identical chunk leaves the output unchanged") {
  Rng rng(34);
  const Pose start = make_pose(Mat3::Identity(), Vec3(0.5, 0, 0.3));
  const ActionChunk c = random_chunk(rng, 0.008);
  CommandStream ref(start, 0.01), again(start, 0.01);
  receding_merge(ref, c, 0);
  receding_merge(again, c, 0);
  receding_merge(again, c, 0);
  for (int i = 0; i < 12; ++i) {
    const Pose x = ref.tick(), y = again.tick();
    CHECK((x.translation() - y.translation()).norm() == 0.0);
  }

  // Same path expressed as the retained head plus the deltas of its tail.
  CommandStream s(start, 0.01);
  receding_merge(s, c, 0);
  const auto before = s.pending;
  ActionChunk tail;
  for (int i = 0; i < kChunkSize; ++i) {
    const Pose from = i == 0 ? before[1] : (i < kChunkSize - 2 ? before[i + 1] : before.back());
    const Pose to = i + 2 < kChunkSize ? before[i + 2] : before.back();
    tail.actions[i] = delta_between(from, to, Gripper::kOpen);
  }
  receding_merge(s, tail, 2);
  for (int i = 0; i < kChunkSize; ++i) {
    CHECK((s.pending[i].translation() - before[i].translation()).norm() < 1e-12);
  }
}

TEST_CASE("receding merge: splices stay within max_step") {
  Rng rng(35);
  CommandStream s(make_pose(Mat3::Identity(), Vec3(0.5, 0, 0.3)), 0.01);
  Pose prev = s.last_command;
  double worst = 0.0;
  for (int event = 0; event < 1000; ++event) {
    ActionChunk c = random_chunk(rng, 0.01);
    if (event % 10 == 0) c.actions[0].translation += Vec3(0.1, 0, 0);  // 10 cm jump
    receding_merge(s, c, uniform_index(rng, 3));
    const int ticks = 1 + static_cast<int>(uniform_index(rng, 4));
    for (int t = 0; t < ticks; ++t) {
      const Pose now = s.tick();
      worst = std::max(worst, (now.translation() - prev.translation()).norm());
      CHECK(rotation_distance(now.linear(), prev.linear()) <= s.max_rotation_step + 1e-9);
      prev = now;
    }
  }
  CHECK(worst <= 0.01 + 1e-12);
  CHECK(worst > 0.009);  // the jumps did saturate the limiter
}

TEST_CASE("pose filter passes a constant pose") {
  PoseFilter f(10.0, 1000.0);
  const Pose p = make_pose(from_rotation_vector(Vec3(0.1, -0.2, 0.3)), Vec3(0.4, 0.1, 0.2));
  for (int i = 0; i < 50; ++i) {
    const Pose q = f.step(p);
    CHECK((q.translation() - p.translation()).norm() < 1e-12);
    CHECK(rotation_distance(q.linear(), p.linear()) < 1e-9);
  }
}

TEST_CASE("mailbox keeps only the latest value") {
  Mailbox<int> box;
  CHECK_FALSE(box.take().has_value());
  box.post(1);
  box.post(2);
  CHECK(box.take() == 2);
  CHECK_FALSE(box.take().has_value());

  Mailbox<int> shared;
  constexpr int kN = 20000;
  std::thread producer([&] {
    for (int i = 1; i <= kN; ++i) shared.post(i);
  });
  int last = 0;
  bool increasing = true;
  while (last < kN) {
    if (auto v = shared.take()) {
      increasing = increasing && *v > last;
      last = *v;
    }
  }
  producer.join();
  CHECK(increasing);
  CHECK(last == kN);
  CHECK(shared.posted() == kN);
}
