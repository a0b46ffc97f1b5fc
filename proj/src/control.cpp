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

#include "graspfactory/control.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace gf {

using cplx = std::complex<double>;

IirFilter::IirFilter(std::vector<double> b, std::vector<double> a)
    : b_(std::move(b)), a_(std::move(a)) {
  if (a_.empty() || a_[0] == 0.0) throw PreconditionError("a[0] must be nonzero");
  const double a0 = a_[0];
  for (auto& v : a_) v /= a0;
  for (auto& v : b_) v /= a0;
  const std::size_t n = std::max(a_.size(), b_.size());
  a_.resize(n, 0.0);
  b_.resize(n, 0.0);
  state_.assign(n, 0.0);
}

double IirFilter::step(double u) {
  const std::size_t n = b_.size();
  const double y = b_[0] * u + state_[0];
  for (std::size_t i = 1; i < n; ++i) {
    state_[i - 1] = b_[i] * u - a_[i] * y + (i < n - 1 ? state_[i] : 0.0);
  }
  return y;
}

double IirFilter::dc_gain() const {
  return std::accumulate(b_.begin(), b_.end(), 0.0) / std::accumulate(a_.begin(), a_.end(), 0.0);
}

namespace {

cplx response(const AnalogZpk& f, double w) {
  const cplx s(0.0, w);
  cplx h = f.gain;
  for (const auto& z : f.zeros) h *= s - z;
  for (const auto& p : f.poles) h /= s - p;
  return h;
}

AnalogZpk scale_frequency(AnalogZpk f, double w) {
  for (auto& z : f.zeros) z *= w;
  for (auto& p : f.poles) p *= w;
  f.gain *= std::pow(w, static_cast<double>(f.poles.size()) - static_cast<double>(f.zeros.size()));
  return f;
}

// Moves the -3 dB point to 1 rad/s. Assumes |H| decreases through it.
AnalogZpk normalize_cutoff(const AnalogZpk& f) {
  const double dc = std::abs(response(f, 0.0));
  const double target = dc / std::sqrt(2.0);
  double lo = 1e-4, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (std::abs(response(f, mid)) > target) lo = mid; else hi = mid;
  }
  return scale_frequency(f, 1.0 / std::sqrt(lo * hi));
}

std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> c{1.0};
  for (const auto& r : roots) {
    std::vector<cplx> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

}  // namespace

AnalogZpk butterworth_prototype(int order) {
  if (order < 1) throw PreconditionError("order must be >= 1");
  AnalogZpk f;
  for (int k = 1; k <= order; ++k) {
    const double theta = M_PI * (2.0 * k + order - 1) / (2.0 * order);
    f.poles.push_back(std::polar(1.0, theta));
  }
  return f;
}

AnalogZpk chebyshev2_prototype(int order, double stopband_db) {
  if (order < 1 || stopband_db <= 0) throw PreconditionError("bad Chebyshev II parameters");
  AnalogZpk f;
  const double de = 1.0 / std::sqrt(std::pow(10.0, 0.1 * stopband_db) - 1.0);
  const double mu = std::asinh(1.0 / de) / order;
  for (int m = -order + 1; m < order; m += 2) {
    if (m != 0) f.zeros.push_back(cplx(0.0, 1.0 / std::sin(m * M_PI / (2.0 * order))));
    const cplx p = -std::exp(cplx(0.0, M_PI * m / (2.0 * order)));
    f.poles.push_back(1.0 / cplx(std::sinh(mu) * p.real(), std::cosh(mu) * p.imag()));
  }
  f.gain = 1.0;
  f.gain = 1.0 / std::abs(response(f, 0.0));
  return normalize_cutoff(f);
}

AnalogZpk bessel_prototype(int order) {
  if (order < 1) throw PreconditionError("order must be >= 1");
  // Reverse Bessel polynomial coefficients a_k = (2n-k)! / (2^(n-k) k! (n-k)!).
  auto fact = [](int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  };
  std::vector<double> a(order + 1);
  for (int k = 0; k <= order; ++k) {
    a[k] = fact(2 * order - k) / (std::pow(2.0, order - k) * fact(k) * fact(order - k));
  }
  // Roots from the companion matrix of s^n + ... + a_0 / a_n.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < order; ++i) companion(i, order - 1) = -a[i] / a[order];
  const Eigen::VectorXcd roots = companion.eigenvalues();
  AnalogZpk f;
  for (int i = 0; i < order; ++i) f.poles.push_back(roots(i));
  f.gain = 1.0;
  f.gain = 1.0 / std::abs(response(f, 0.0));
  return normalize_cutoff(f);
}

IirFilter discretize(const AnalogZpk& prototype, double cutoff_hz, double sample_rate_hz) {
  if (!(cutoff_hz > 0) || !(cutoff_hz < sample_rate_hz / 2)) {
    throw ConfigError("need 0 < cutoff < sample_rate / 2");
  }
  const double fs2 = 2.0 * sample_rate_hz;
  const double warped = fs2 * std::tan(M_PI * cutoff_hz / sample_rate_hz);
  const AnalogZpk f = scale_frequency(prototype, warped);
  std::vector<cplx> zd, pd;
  for (const auto& z : f.zeros) zd.push_back((fs2 + z) / (fs2 - z));
  for (const auto& p : f.poles) pd.push_back((fs2 + p) / (fs2 - p));
  while (zd.size() < pd.size()) zd.push_back(-1.0);
  std::vector<double> b = poly_from_roots(zd);
  const std::vector<double> a = poly_from_roots(pd);
  const double dc = std::accumulate(b.begin(), b.end(), 0.0) / std::accumulate(a.begin(), a.end(), 0.0);
  for (auto& v : b) v /= dc;
  return IirFilter(std::move(b), a);
}

StepResponses compare_step_responses(double cutoff_hz, double sample_rate_hz, std::size_t n) {
  StepResponses r;
  r.cascade = step_response(CascadedFilter(cutoff_hz, sample_rate_hz), n);
  r.first_order = step_response(FirstOrderFilter(cutoff_hz, sample_rate_hz), n);
  auto run = [n](IirFilter f) {
    std::vector<double> out(n);
    for (auto& v : out) v = f.step(1.0);
    return out;
  };
  r.butterworth3 = run(discretize(butterworth_prototype(3), cutoff_hz, sample_rate_hz));
  r.chebyshev2 = run(discretize(chebyshev2_prototype(3, 40.0), cutoff_hz, sample_rate_hz));
  r.bessel3 = run(discretize(bessel_prototype(3), cutoff_hz, sample_rate_hz));
  return r;
}

std::vector<std::filesystem::path> write_step_responses(const StepResponses& r,
                                                        double sample_rate_hz,
                                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const std::vector<double>*> traces[] = {
      {"step_cascade3.csv", &r.cascade},
      {"step_first_order.csv", &r.first_order},
      {"step_butterworth3.csv", &r.butterworth3},
      {"step_chebyshev2.csv", &r.chebyshev2},
      {"step_bessel3.csv", &r.bessel3},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, trace] : traces) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "sample,t,y\n";
    for (std::size_t i = 0; i < trace->size(); ++i) {
      out << i << ',' << static_cast<double>(i + 1) / sample_rate_hz << ',' << (*trace)[i] << '\n';
    }
    written.push_back(path);
  }
  return written;
}

namespace {

double segment_param(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
}

Pose pose_at_arc(const std::vector<Pose>& path, double s) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec3 a = path[i].translation();
    const Vec3 b = path[i + 1].translation();
    const double len = (b - a).norm();
    if (s <= len || i + 2 == path.size()) {
      const double u = len > 0.0 ? std::clamp(s / len, 0.0, 1.0) : 1.0;
      const Quat qa(path[i].linear());
      const Quat qb(path[i + 1].linear());
      return make_pose(qa.slerp(u, qb), a + u * (b - a));
    }
    s -= len;
  }
  return path.back();
}

}  // namespace

double nearest_arc(const Vec3& p, const std::vector<Pose>& path) {
  if (path.empty()) throw PreconditionError("empty path");
  double best_d = (p - path[0].translation()).squaredNorm();
  double best_s = 0.0;
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec3 a = path[i].translation();
    const Vec3 b = path[i + 1].translation();
    const double u = segment_param(p, a, b);
    const double d = (p - (a + u * (b - a))).squaredNorm();
    const double len = (b - a).norm();
    if (d < best_d) {
      best_d = d;
      best_s = s0 + u * len;
    }
    s0 += len;
  }
  return best_s;
}

Pose interpolate_positional(const Pose& current, const std::vector<Pose>& path,
                            double max_step) {
  if (path.empty()) throw PreconditionError("empty path");
  if (!(max_step > 0)) throw PreconditionError("max_step must be positive");
  if (path.size() == 1) return path[0];
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    total += (path[i + 1].translation() - path[i].translation()).norm();
  }
  const double s = std::min(total, nearest_arc(current.translation(), path) + max_step);
  return pose_at_arc(path, s);
}

Pose CommandStream::tick() {
  // Drop setpoints already reached.
  while (!pending.empty() &&
         (pending.front().translation() - last_command.translation()).norm() < 1e-12 &&
         rotation_distance(pending.front().linear(), last_command.linear()) < 1e-12) {
    pending.pop_front();
  }
  if (pending.empty()) return last_command;
  const Pose& target = pending.front();
  const Vec3 d = target.translation() - last_command.translation();
  const double angle = rotation_distance(last_command.linear(), target.linear());
  double u = 1.0;
  if (d.norm() > max_step) u = std::min(u, max_step / d.norm());
  if (angle > max_rotation_step) u = std::min(u, max_rotation_step / angle);
  if (u >= 1.0) {
    last_command = target;
    pending.pop_front();
  } else {
    const Quat qa(last_command.linear());
    const Quat qb(target.linear());
    last_command = make_pose(qa.slerp(u, qb), last_command.translation() + u * d);
  }
  return last_command;
}

void receding_merge(CommandStream& stream, const ActionChunk& chunk, std::size_t latency_steps) {
  const std::size_t keep = std::min(latency_steps, stream.pending.size());
  stream.pending.resize(keep);
  Pose anchor = keep > 0 ? stream.pending.back() : stream.last_command;
  for (const auto& a : chunk.actions) {
    anchor = apply_delta(anchor, a);
    stream.pending.push_back(anchor);
  }
}

PoseFilter::PoseFilter(double cutoff_hz, double sample_rate_hz)
    : channels_(6, CascadedFilter(cutoff_hz, sample_rate_hz)) {}

Pose PoseFilter::step(const Pose& target) {
  const Vec3 t = target.translation();
  const Vec3 r = rotation_vector(target.linear());
  Vec3 ft, fr;
  for (int i = 0; i < 3; ++i) {
    ft(i) = channels_[i].step(t(i));
    fr(i) = channels_[3 + i].step(r(i));
  }
  return make_pose(from_rotation_vector(fr), ft);
}

}  // namespace gf
