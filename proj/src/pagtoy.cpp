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

#include "graspfactory/pagtoy.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace gf {
namespace {

using Mat = Eigen::MatrixXd;

int quantize(double value, double lo, double hi, int vocab) {
  const double u = (value - lo) / (hi - lo);
  return std::clamp(static_cast<int>(std::floor(u * vocab)), 0, vocab - 1);
}

double bin_center(int token, double lo, double hi, int vocab) {
  return lo + (hi - lo) * (token + 0.5) / vocab;
}

VecX tanh_vec(const VecX& v) { return v.array().tanh(); }

// Stable log-sum-exp of a column.
double log_sum_exp(const Eigen::Ref<const VecX>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

constexpr int kRelativeGraspDim = 9;

Vec3 normalized_position(const Vec3& p) {
  return {(p.x() - 0.5) / 0.2, p.y() / 0.25, (p.z() - 0.05) / 0.15};
}

Vec3 denormalized_position(const Vec3& n) {
  return {0.2 * n.x() + 0.5, 0.25 * n.y(), 0.15 * n.z() + 0.05};
}

int flow_input_dim(const PagConfig& c) {
  return kChunkDim + 1 + c.obs_dim + kTotalTokens + c.proprio_dim + kRelativeGraspDim;
}

Pose detokenize_grasp_tokens(const TokenSeq& tokens, const PagConfig& c);

// The decoded grasp pose seen from the current hand pose (position scaled
// by 10, two rotation columns). Zero when proprio lacks the toy layout.
Eigen::Matrix<double, kRelativeGraspDim, 1> relative_grasp(const FlowContext& ctx,
                                                         const PagConfig& c) {
  Eigen::Matrix<double, kRelativeGraspDim, 1> out = decltype(out)::Zero();
  if (c.proprio_dim < 18) return out;
  const VecX& q = *ctx.proprio;
  Mat3 r;
  r.col(0) = q.segment<3>(12).normalized();
  r.col(1) = (q.segment<3>(15) - r.col(0).dot(q.segment<3>(15)) * r.col(0)).normalized();
  r.col(2) = r.col(0).cross(r.col(1));
  if (!r.allFinite()) return out;
  const Pose ee = make_pose(r, denormalized_position(q.segment<3>(9)));
  const Pose rel = ee.inverse() * detokenize_grasp_tokens(ctx.tokens, c);
  out << 10.0 * rel.translation(), rel.linear().col(0), rel.linear().col(1);
  return out;
}

VecX flow_input(const Chunk& a_t, double t, const FlowContext& ctx, const PagConfig& c) {
  VecX z(flow_input_dim(c));
  z << a_t, t, *ctx.x, VecX::Zero(kTotalTokens), *ctx.proprio, relative_grasp(ctx, c);
  for (int i = 0; i < kTotalTokens; ++i)
    z(kChunkDim + 1 + c.obs_dim + i) = static_cast<double>(ctx.tokens[i]) / c.vocab;
  return z;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tokenizers

BboxTokens tokenize_bbox(const std::vector<BBox2D>& boxes, const Intrinsics& k, int vocab) {
  BboxTokens t{};
  for (const auto& b : boxes) {
    const int base = 4 * static_cast<int>(b.view);
    t[base + 0] = quantize(b.x_min, 0.0, k.width, vocab);
    t[base + 1] = quantize(b.y_min, 0.0, k.height, vocab);
    t[base + 2] = quantize(b.x_max, 0.0, k.width, vocab);
    t[base + 3] = quantize(b.y_max, 0.0, k.height, vocab);
  }
  return t;
}

std::vector<BBox2D> detokenize_bbox(const BboxTokens& t, const Intrinsics& k, int vocab) {
  std::vector<BBox2D> out;
  for (int v = 0; v < 2; ++v) {
    const int b = 4 * v;
    out.push_back({static_cast<ViewId>(v), bin_center(t[b], 0.0, k.width, vocab),
                   bin_center(t[b + 1], 0.0, k.height, vocab),
                   bin_center(t[b + 2], 0.0, k.width, vocab),
                   bin_center(t[b + 3], 0.0, k.height, vocab)});
  }
  return out;
}

Vec3 rpy_from_rotation(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

Mat3 rotation_from_rpy(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

GraspTokens tokenize_grasp(const Pose& pose, const GraspBounds& bounds, int vocab) {
  const Vec3 p = pose.translation();
  if ((p.array() < bounds.min.array()).any() || (p.array() > bounds.max.array()).any())
    throw OutOfBounds("grasp position outside token bounds");
  const Vec3 rpy = rpy_from_rotation(pose.linear());
  GraspTokens t{};
  for (int i = 0; i < 3; ++i) {
    t[i] = quantize(p[i], bounds.min[i], bounds.max[i], vocab);
    t[3 + i] = quantize(rpy[i], -M_PI, M_PI, vocab);
  }
  return t;
}

GraspTokens tokenize_grasp(const GraspPose& grasp, const GraspBounds& bounds, int vocab) {
  return tokenize_grasp(grasp.pose(), bounds, vocab);
}

Pose detokenize_grasp(const GraspTokens& t, const GraspBounds& bounds, int vocab) {
  Vec3 p, rpy;
  for (int i = 0; i < 3; ++i) {
    p[i] = bin_center(t[i], bounds.min[i], bounds.max[i], vocab);
    rpy[i] = bin_center(t[3 + i], -M_PI, M_PI, vocab);
  }
  return make_pose(rotation_from_rpy(rpy), p);
}

namespace {

Pose detokenize_grasp_tokens(const TokenSeq& tokens, const PagConfig& c) {
  GraspTokens g;
  std::copy(tokens.begin() + kBboxTokens, tokens.end(), g.begin());
  return detokenize_grasp(g, c.grasp_bounds, c.vocab);
}

}  // namespace

FlowBatch make_flow_batch(const Chunk& a0, const Chunk& eps, double t) {
  FlowBatch b;
  b.a0 = a0;
  b.eps = eps;
  b.t = t;
  b.a_t = (1.0 - t) * a0 + t * eps;
  return b;
}

FlowBatch make_flow_batch(const Chunk& a0, Rng& rng) {
  Chunk eps;
  for (int i = 0; i < kChunkDim; ++i) eps(i) = standard_normal(rng);
  return make_flow_batch(a0, eps, uniform01(rng));
}

// ---------------------------------------------------------------------------
// Model

PagModel::PagModel(const PagConfig& config) : config_(config) { layout(); }

PagModel::PagModel(const PagConfig& config, Rng& rng) : PagModel(config) {
  for (const auto& s : sections_) {
    const bool is_bias = s.cols == 1;
    const bool is_head = s.name == "bbox.W" || s.name == "grasp.W";
    // Untrained history columns would inject noise for tokens never seen in
    // training, so the history table starts at zero.
    if (is_bias || s.name == "tok.W1h" || (is_head && config_.zero_heads)) continue;
    int fan_in = s.cols;
    if (s.name == "tok.W1pos") fan_in = kTotalTokens;
    const double scale = config_.init_scale / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < s.size(); ++i)
      theta_(s.offset + i) = scale * standard_normal(rng);
  }
}

void PagModel::layout() {
  const PagConfig& c = config_;
  if (c.vocab < 2 || c.obs_dim < 1 || c.proprio_dim < 1 || c.embed < 1 || c.hidden < 1 ||
      c.flow_hidden < 1)
    throw ConfigError("invalid model dimensions");
  Eigen::Index offset = 0;
  auto add = [&](const std::string& name, int rows, int cols) {
    sections_.push_back({name, offset, rows, cols});
    offset += static_cast<Eigen::Index>(rows) * cols;
  };
  add("obs.W", c.embed, c.obs_dim);
  add("obs.b", c.embed, 1);
  add("tok.W1e", c.hidden, c.embed);
  add("tok.W1h", c.hidden, kTotalTokens * c.vocab);
  add("tok.W1pos", c.hidden, kTotalTokens);
  add("tok.W1q", c.hidden, c.proprio_dim);
  add("tok.b1", c.hidden, 1);
  add("tok.W2", c.hidden, c.hidden);
  add("tok.b2", c.hidden, 1);
  add("bbox.W", c.vocab, c.hidden);
  add("bbox.b", c.vocab, 1);
  add("grasp.W", c.vocab, c.hidden);
  add("grasp.b", c.vocab, 1);
  add("flow.W1", c.flow_hidden, flow_input_dim(c));
  add("flow.b1", c.flow_hidden, 1);
  add("flow.W2", c.flow_hidden, c.flow_hidden);
  add("flow.b2", c.flow_hidden, 1);
  add("flow.W3", kChunkDim, c.flow_hidden);
  add("flow.b3", kChunkDim, 1);
  theta_ = VecX::Zero(offset);
}

const PagModel::Section& PagModel::section(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return s;
  throw PreconditionError("no parameter section '" + name + "'");
}

Eigen::Map<Eigen::MatrixXd> PagModel::mat(const std::string& name, VecX& buffer) const {
  const Section& s = section(name);
  return {buffer.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> PagModel::mat(const std::string& name,
                                                const VecX& buffer) const {
  const Section& s = section(name);
  return {buffer.data() + s.offset, s.rows, s.cols};
}

Chunk PagModel::normalize(const ActionChunk& chunk) const {
  Chunk out;
  for (int i = 0; i < kChunkSize; ++i)
    out.segment<kActionDim>(i * kActionDim) =
        (chunk.actions[i].flat() - action_mean).cwiseQuotient(action_std);
  return out;
}

ActionChunk PagModel::denormalize(const Chunk& v) const {
  ActionChunk out;
  for (int i = 0; i < kChunkSize; ++i)
    out.actions[i] = DeltaAction::from_flat(
        v.segment<kActionDim>(i * kActionDim).cwiseProduct(action_std) + action_mean);
  return out;
}

namespace {

// Token predictor activations for positions [0, n_pos).
struct TokenForward {
  VecX e;   // observation embedding
  Mat h1;   // hidden x n_pos
  Mat h2;
  Mat logits;  // vocab x n_pos
};

TokenForward token_forward(const PagModel& m, const ToyObservation& obs,
                           const TokenSeq& tokens, int n_pos) {
  const PagConfig& c = m.config();
  TokenForward f;
  f.e = tanh_vec(m.mat("obs.W") * obs.x + m.mat("obs.b"));
  const VecX base = m.mat("tok.W1e") * f.e + m.mat("tok.b1");
  const VecX qterm = m.mat("tok.W1q") * obs.proprio;
  const auto w1h = m.mat("tok.W1h");
  const auto w1pos = m.mat("tok.W1pos");

  Mat a1(c.hidden, n_pos);
  VecX hist = VecX::Zero(c.hidden);
  for (int j = 0; j < n_pos; ++j) {
    if (j > 0) hist += w1h.col((j - 1) * c.vocab + tokens[j - 1]);
    a1.col(j) = base + w1pos.col(j) + hist;
    if (j >= kBboxTokens) a1.col(j) += qterm;
  }
  f.h1 = a1.array().tanh();
  f.h2 = ((m.mat("tok.W2") * f.h1).colwise() + VecX(m.mat("tok.b2"))).array().tanh();
  f.logits.resize(c.vocab, n_pos);
  const int nb = std::min(n_pos, kBboxTokens);
  f.logits.leftCols(nb) =
      (m.mat("bbox.W") * f.h2.leftCols(nb)).colwise() + VecX(m.mat("bbox.b"));
  if (n_pos > kBboxTokens) {
    const int ng = n_pos - kBboxTokens;
    f.logits.rightCols(ng) =
        (m.mat("grasp.W") * f.h2.rightCols(ng)).colwise() + VecX(m.mat("grasp.b"));
  }
  return f;
}

struct FlowForward {
  VecX z, g1, g2;
  Chunk v;
};

FlowForward flow_forward(const PagModel& m, const Chunk& a_t, double t,
                         const FlowContext& ctx) {
  FlowForward f;
  f.z = flow_input(a_t, t, ctx, m.config());
  f.g1 = tanh_vec(m.mat("flow.W1") * f.z + m.mat("flow.b1"));
  f.g2 = tanh_vec(m.mat("flow.W2") * f.g1 + m.mat("flow.b2"));
  f.v = m.mat("flow.W3") * f.g2 + m.mat("flow.b3");
  return f;
}

int positions_for(const TrainingSample& s) {
  return s.is_synthetic ? kTotalTokens : kBboxTokens;
}

void check_tokens(const TrainingSample& s, int vocab) {
  for (int j = 0; j < positions_for(s); ++j)
    if (s.tokens[j] < 0 || s.tokens[j] >= vocab) throw OutOfBounds("token out of vocabulary");
}

}  // namespace

VecX PagModel::logits(const ToyObservation& obs, const TokenSeq& tokens, int pos) const {
  return token_forward(*this, obs, tokens, pos + 1).logits.col(pos);
}

Chunk PagModel::field(const Chunk& a_t, double t, const FlowContext& ctx) const {
  return flow_forward(*this, a_t, t, ctx).v;
}

VectorField PagModel::field_fn() const {
  return [this](const Chunk& a_t, double t, const FlowContext& ctx) {
    return field(a_t, t, ctx);
  };
}

// ---------------------------------------------------------------------------
// Losses and gradients

double loss_s2(const PagModel& model, const TrainingSample& sample) {
  check_tokens(sample, model.config().vocab);
  const int n = positions_for(sample);
  const TokenForward f = token_forward(model, sample.observation, sample.tokens, n);
  double loss = 0.0;
  for (int j = 0; j < n; ++j)
    loss += log_sum_exp(f.logits.col(j)) - f.logits(sample.tokens[j], j);
  return loss;
}

double loss_s1(const VectorField& field, const TrainingSample& sample,
               const FlowBatch& batch) {
  if (!sample.is_synthetic) throw NotSynthetic("flow loss needs an action label");
  const FlowContext ctx{&sample.observation.x, &sample.observation.proprio, sample.tokens};
  const Chunk u = batch.eps - batch.a0;
  return (field(batch.a_t, batch.t, ctx) - u).squaredNorm();
}

double loss_s1(const PagModel& model, const TrainingSample& sample, const FlowBatch& batch) {
  return loss_s1(model.field_fn(), sample, batch);
}

double total_loss(const PagModel& model, const TrainingSample& sample,
                  const FlowBatch& batch) {
  double l = loss_s2(model, sample);
  if (sample.is_synthetic) l += loss_s1(model, sample, batch);
  return l;
}

LossParts accumulate_grad(const PagModel& m, const TrainingSample& sample,
                          const FlowBatch& batch, VecX& g, double weight) {
  const PagConfig& c = m.config();
  if (g.size() != m.params().size()) g = VecX::Zero(m.params().size());
  check_tokens(sample, c.vocab);
  LossParts parts;

  // Token predictor.
  const int n = positions_for(sample);
  const ToyObservation& obs = sample.observation;
  const TokenForward f = token_forward(m, obs, sample.tokens, n);
  Mat dlogits(c.vocab, n);
  for (int j = 0; j < n; ++j) {
    const double lse = log_sum_exp(f.logits.col(j));
    parts.s2 += lse - f.logits(sample.tokens[j], j);
    dlogits.col(j) = (f.logits.col(j).array() - lse).exp();
    dlogits(sample.tokens[j], j) -= 1.0;
  }
  dlogits *= weight;

  const int nb = std::min(n, kBboxTokens);
  Mat dh2(c.hidden, n);
  m.mat("bbox.W", g) += dlogits.leftCols(nb) * f.h2.leftCols(nb).transpose();
  m.mat("bbox.b", g) += dlogits.leftCols(nb).rowwise().sum();
  dh2.leftCols(nb) = m.mat("bbox.W").transpose() * dlogits.leftCols(nb);
  if (n > kBboxTokens) {
    const int ng = n - kBboxTokens;
    m.mat("grasp.W", g) += dlogits.rightCols(ng) * f.h2.rightCols(ng).transpose();
    m.mat("grasp.b", g) += dlogits.rightCols(ng).rowwise().sum();
    dh2.rightCols(ng) = m.mat("grasp.W").transpose() * dlogits.rightCols(ng);
  }
  const Mat da2 = dh2.array() * (1.0 - f.h2.array().square());
  m.mat("tok.W2", g) += da2 * f.h1.transpose();
  m.mat("tok.b2", g) += da2.rowwise().sum();
  const Mat da1 = (m.mat("tok.W2").transpose() * da2).array() * (1.0 - f.h1.array().square());
  const VecX da1_sum = da1.rowwise().sum();
  m.mat("tok.b1", g) += da1_sum;
  m.mat("tok.W1pos", g).leftCols(n) += da1;
  m.mat("tok.W1e", g) += da1_sum * f.e.transpose();
  if (n > kBboxTokens)
    m.mat("tok.W1q", g) += da1.rightCols(n - kBboxTokens).rowwise().sum() *
                           obs.proprio.transpose();
  // Token i feeds every later position.
  auto w1h = m.mat("tok.W1h", g);
  VecX suffix = VecX::Zero(c.hidden);
  for (int i = n - 2; i >= 0; --i) {
    suffix += da1.col(i + 1);
    w1h.col(i * c.vocab + sample.tokens[i]) += suffix;
  }
  const VecX de = m.mat("tok.W1e").transpose() * da1_sum;
  const VecX dae = de.array() * (1.0 - f.e.array().square());
  m.mat("obs.W", g) += dae * obs.x.transpose();
  m.mat("obs.b", g) += dae;

  // Flow head.
  if (sample.is_synthetic) {
    const FlowContext ctx{&obs.x, &obs.proprio, sample.tokens};
    const FlowForward ff = flow_forward(m, batch.a_t, batch.t, ctx);
    const Chunk r = ff.v - (batch.eps - batch.a0);
    parts.s1 = r.squaredNorm();
    const VecX dv = 2.0 * weight * r;
    m.mat("flow.W3", g) += dv * ff.g2.transpose();
    m.mat("flow.b3", g) += dv;
    const VecX db2 = (m.mat("flow.W3").transpose() * dv).array() * (1.0 - ff.g2.array().square());
    m.mat("flow.W2", g) += db2 * ff.g1.transpose();
    m.mat("flow.b2", g) += db2;
    const VecX db1 = (m.mat("flow.W2").transpose() * db2).array() * (1.0 - ff.g1.array().square());
    m.mat("flow.W1", g) += db1 * ff.z.transpose();
    m.mat("flow.b1", g) += db1;
  }
  return parts;
}

VecX grad(const PagModel& model, const TrainingSample& sample, const FlowBatch& batch) {
  VecX g = VecX::Zero(model.params().size());
  accumulate_grad(model, sample, batch, g);
  return g;
}

// ---------------------------------------------------------------------------
// Training

SampleMixer::SampleMixer(std::vector<TrainingSample> synthetic,
                         std::vector<TrainingSample> grounding, double synthetic_fraction)
    : synthetic_(std::move(synthetic)),
      grounding_(std::move(grounding)),
      synthetic_fraction_(synthetic_fraction) {
  if (synthetic_fraction_ < 0.0 || synthetic_fraction_ > 1.0)
    throw ConfigError("synthetic fraction must lie in [0, 1]");
  if ((synthetic_fraction_ > 0.0 && synthetic_.empty()) ||
      (synthetic_fraction_ < 1.0 && grounding_.empty()))
    throw PreconditionError("mixer has no samples of a required kind");
}

const TrainingSample& SampleMixer::draw(Rng& rng) {
  const bool synthetic = uniform01(rng) < synthetic_fraction_;
  if (synthetic) {
    ++synthetic_drawn_;
    return synthetic_[uniform_index(rng, synthetic_.size())];
  }
  ++grounding_drawn_;
  return grounding_[uniform_index(rng, grounding_.size())];
}

std::string to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

TrainResult train(PagModel& model, SampleMixer& mixer, const TrainConfig& config) {
  if (config.batch_size < 1 || config.steps < 0) throw ConfigError("bad training config");
  VecX m1, m2;
  if (config.optimizer == Optimizer::kAdam) {
    m1 = VecX::Zero(model.params().size());
    m2 = VecX::Zero(model.params().size());
  }
  Rng rng(derive_seed(config.seed, 0x747261696e));
  TrainResult result;
  VecX g(model.params().size());
  const double w = 1.0 / config.batch_size;
  for (int step = 0; step < config.steps; ++step) {
    g.setZero();
    LossRecord rec;
    rec.step = step;
    for (int b = 0; b < config.batch_size; ++b) {
      const TrainingSample& s = mixer.draw(rng);
      FlowBatch batch;
      if (s.is_synthetic) {
        batch = make_flow_batch(s.action, rng);
        ++result.synthetic_samples;
      } else {
        ++result.grounding_samples;
      }
      const LossParts parts = accumulate_grad(model, s, batch, g, w);
      rec.s2 += w * parts.s2;
      rec.s1 += w * parts.s1;
    }
    rec.total = rec.s2 + rec.s1;
    if (config.clip_norm > 0.0) {
      const double norm = g.norm();
      if (norm > config.clip_norm) g *= config.clip_norm / norm;
    }
    if (config.optimizer == Optimizer::kAdam) {
      m1 = config.beta1 * m1 + (1.0 - config.beta1) * g;
      m2 = config.beta2 * m2 + (1.0 - config.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(config.beta1, step + 1);
      const double c2 = 1.0 - std::pow(config.beta2, step + 1);
      model.params().array() -=
          config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + 1e-8);
    } else {
      model.params() -= config.learning_rate * g;
    }
    result.curve.push_back(rec);
  }
  return result;
}

double smoothed_loss(const std::vector<LossRecord>& curve, std::size_t begin,
                     std::size_t window) {
  if (begin >= curve.size()) throw PreconditionError("window outside loss curve");
  const std::size_t end = std::min(curve.size(), begin + window);
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += curve[i].total;
  return s / static_cast<double>(end - begin);
}

void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "step,L_S2,L_S1,total\n";
  for (const auto& r : curve) out << r.step << ',' << r.s2 << ',' << r.s1 << ',' << r.total << '\n';
}

// ---------------------------------------------------------------------------
// Inference

Chunk integrate_field(const VectorField& field, const Chunk& eps, const FlowContext& ctx,
                      int integration_steps) {
  if (integration_steps < 1) throw PreconditionError("integration_steps must be >= 1");
  const double dt = 1.0 / integration_steps;
  Chunk a = eps;
  for (int k = 0; k < integration_steps; ++k) {
    const double t = 1.0 - k * dt;
    a -= dt * field(a, t, ctx);
  }
  return a;
}

SampledActions sample_actions(const PagModel& model, const ToyObservation& obs,
                              int integration_steps, Rng& rng, DecodeTrace* trace) {
  SampledActions out;
  for (int pos = 0; pos < kTotalTokens; ++pos) {
    if (trace) trace->history[pos].assign(out.tokens.begin(), out.tokens.begin() + pos);
    const VecX l = model.logits(obs, out.tokens, pos);
    Eigen::Index best;
    l.maxCoeff(&best);
    out.tokens[pos] = static_cast<int>(best);
  }
  Chunk eps;
  for (int i = 0; i < kChunkDim; ++i) eps(i) = standard_normal(rng);
  const FlowContext ctx{&obs.x, &obs.proprio, out.tokens};
  out.normalized = integrate_field(model.field_fn(), eps, ctx, integration_steps);
  out.chunk = model.denormalize(out.normalized);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "GFPAGCK1", u32 version, model config, section index,
// normalizer, then the parameter array. All little-endian.

namespace {

constexpr char kMagic[8] = {'G', 'F', 'P', 'A', 'G', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const PagModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);
  put(out, kCheckpointVersion);
  const PagConfig& c = model.config();
  for (int v : {c.vocab, c.obs_dim, c.proprio_dim, c.embed, c.hidden, c.flow_hidden})
    put<std::int32_t>(out, v);
  for (int i = 0; i < 3; ++i) put(out, c.grasp_bounds.min(i));
  for (int i = 0; i < 3; ++i) put(out, c.grasp_bounds.max(i));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.sections().size()));
  for (const auto& s : model.sections()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put<std::int64_t>(out, s.offset);
    put<std::int32_t>(out, s.rows);
    put<std::int32_t>(out, s.cols);
  }
  for (int i = 0; i < kActionDim; ++i) put(out, model.action_mean(i));
  for (int i = 0; i < kActionDim; ++i) put(out, model.action_std(i));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(model.params().size()));
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(sizeof(double) * model.params().size()));
  if (!out) throw IoError("failed writing " + path.string());
}

PagModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a checkpoint");
  if (get<std::uint32_t>(in) != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version");
  PagConfig c;
  c.vocab = get<std::int32_t>(in);
  c.obs_dim = get<std::int32_t>(in);
  c.proprio_dim = get<std::int32_t>(in);
  c.embed = get<std::int32_t>(in);
  c.hidden = get<std::int32_t>(in);
  c.flow_hidden = get<std::int32_t>(in);
  for (int i = 0; i < 3; ++i) c.grasp_bounds.min(i) = get<double>(in);
  for (int i = 0; i < 3; ++i) c.grasp_bounds.max(i) = get<double>(in);
  PagModel model(c);
  const auto n_sections = get<std::uint32_t>(in);
  if (n_sections != model.sections().size()) throw ParseError("section count mismatch");
  for (const auto& s : model.sections()) {
    const auto len = get<std::uint32_t>(in);
    if (len > 256) throw ParseError("bad section name");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto offset = get<std::int64_t>(in);
    const auto rows = get<std::int32_t>(in);
    const auto cols = get<std::int32_t>(in);
    if (name != s.name || offset != s.offset || rows != s.rows || cols != s.cols)
      throw ParseError("section index mismatch at '" + name + "'");
  }
  for (int i = 0; i < kActionDim; ++i) model.action_mean(i) = get<double>(in);
  for (int i = 0; i < kActionDim; ++i) model.action_std(i) = get<double>(in);
  if (get<std::uint64_t>(in) != static_cast<std::uint64_t>(model.params().size()))
    throw ParseError("parameter count mismatch");
  in.read(reinterpret_cast<char*>(model.params().data()),
          static_cast<std::streamsize>(sizeof(double) * model.params().size()));
  if (!in) throw ParseError("truncated parameter array");
  return model;
}

// ---------------------------------------------------------------------------
// Toy task

ToyTaskConfig default_toy_task() {
  ToyTaskConfig t;
  t.categories = builtin_categories().names();
  return t;
}

PagConfig toy_model_config(const ToyTaskConfig& task) {
  PagConfig c;
  c.vocab = task.vocab;
  c.obs_dim = toy_obs_dim(task);
  c.proprio_dim = kToyProprioDim;
  c.grasp_bounds = task.grasp_bounds;
  return c;
}

int toy_obs_dim(const ToyTaskConfig& task) {
  // target center, target center in the hand frame, target orientation (two
  // columns), two views x (u, v, visible), extent, table height, distractor
  // slots, instruction one-hot, nuisance noise
  return 3 + 3 + 6 + 6 + 1 + 1 + 4 * task.max_distractors +
         static_cast<int>(task.categories.size()) + task.noise_dims;
}

ToyObservation make_observation(const SceneLayout& layout, const CameraRig& rig,
                                const std::string& target_id, const ToyState& state,
                                const ToyTaskConfig& task) {
  const Placement& target = layout.find(target_id);
  ToyObservation obs;
  obs.x = VecX::Zero(toy_obs_dim(task));
  int i = 0;
  const Vec3 center = state.target_pose * target.local_center;
  obs.x.segment<3>(i) = normalized_position(center);
  i += 3;
  obs.x.segment<3>(i) = 5.0 * (state.ee.linear().transpose() * (center - state.ee.translation()));
  i += 3;
  obs.x.segment<3>(i) = state.target_pose.linear().col(0);
  obs.x.segment<3>(i + 3) = state.target_pose.linear().col(1);
  i += 6;
  for (const auto& view : rig.views) {
    const auto px = view.project(center);
    const Intrinsics& k = view.intrinsics;
    if (px && px->x() >= 0 && px->x() <= k.width && px->y() >= 0 && px->y() <= k.height) {
      obs.x(i) = 2.0 * px->x() / k.width - 1.0;
      obs.x(i + 1) = 2.0 * px->y() / k.height - 1.0;
      obs.x(i + 2) = 1.0;
    }
    i += 3;
  }
  obs.x(i++) = 10.0 * target.extent;
  obs.x(i++) = (layout.table_height - 0.05) / 0.15;
  int slot = 0;
  for (const auto& p : layout.placements) {
    if (p.instance_id == target_id || slot >= task.max_distractors) continue;
    obs.x.segment<3>(i + 4 * slot) = normalized_position(p.world_center());
    obs.x(i + 4 * slot + 3) = 1.0;
    ++slot;
  }
  i += 4 * task.max_distractors;
  const auto it = std::find(task.categories.begin(), task.categories.end(), target.category);
  if (it != task.categories.end()) obs.x(i + static_cast<int>(it - task.categories.begin())) = 1.0;
  i += static_cast<int>(task.categories.size());
  Rng noise(derive_seed(layout.randomization_seed, 0x6e6f697365));
  for (int k = 0; k < task.noise_dims; ++k) obs.x(i++) = task.noise_scale * standard_normal(noise);

  obs.proprio = VecX::Zero(kToyProprioDim);
  int j = 0;
  for (const Pose* p : {&state.ee_prev, &state.ee}) {
    obs.proprio.segment<3>(j) = normalized_position(p->translation());
    obs.proprio.segment<3>(j + 3) = p->linear().col(0);
    obs.proprio.segment<3>(j + 6) = p->linear().col(1);
    j += 9;
  }
  obs.proprio(j) = state.closed ? 1.0 : 0.0;
  return obs;
}

ToyState episode_state(const Episode& e, std::size_t step) {
  ToyState s;
  s.ee = e.steps.at(step).ee_pose;
  s.ee_prev = e.steps[step > 0 ? step - 1 : 0].ee_pose;
  s.closed = e.steps[step].gripper == Gripper::kClosed;
  s.target_pose = target_pose_at(e, step);
  return s;
}

ActionChunk chunk_at(const std::vector<TrajectoryStep>& steps, std::size_t step) {
  if (steps.size() < 2) throw TooShort("need at least two steps");
  ActionChunk c;
  for (int i = 0; i < kChunkSize; ++i) {
    const std::size_t k = step + i;
    if (k + 1 < steps.size()) {
      c.actions[i] = delta_between(steps[k].ee_pose, steps[k + 1].ee_pose, steps[k + 1].gripper);
    } else {
      // Past the end the arm holds still.
      c.actions[i] = DeltaAction{};
      c.actions[i].gripper = steps.back().gripper == Gripper::kClosed ? 1.0 : 0.0;
    }
  }
  return c;
}

TrainingSample make_sample(const Episode& e, std::size_t step, bool synthetic,
                           const PagModel& model, const ToyTaskConfig& task) {
  TrainingSample s;
  s.observation = make_observation(e.layout, e.rig, e.target_id, episode_state(e, step), task);
  static const std::vector<BBox2D> kNone;
  const auto& boxes = step < e.bbox_labels.size() ? e.bbox_labels[step] : kNone;
  const BboxTokens bt = tokenize_bbox(boxes, e.rig.views[0].intrinsics, task.vocab);
  std::copy(bt.begin(), bt.end(), s.tokens.begin());
  s.is_synthetic = synthetic;
  if (synthetic) {
    const GraspTokens gt = tokenize_grasp(
        grasp_pose_supervision(e.steps, e.grasp_label, step), task.grasp_bounds, task.vocab);
    std::copy(gt.begin(), gt.end(), s.tokens.begin() + kBboxTokens);
    s.action = model.normalize(chunk_at(e.steps, step));
  }
  return s;
}

void fit_action_normalizer(PagModel& model, const std::vector<Episode>& episodes) {
  Eigen::Matrix<double, kActionDim, 1> sum = Eigen::Matrix<double, kActionDim, 1>::Zero();
  Eigen::Matrix<double, kActionDim, 1> sq = sum;
  double n = 0.0;
  for (const auto& e : episodes) {
    for (std::size_t k = 0; k + 1 < e.steps.size(); ++k) {
      const auto v =
          delta_between(e.steps[k].ee_pose, e.steps[k + 1].ee_pose, e.steps[k + 1].gripper).flat();
      sum += v;
      sq += v.cwiseProduct(v);
      n += 1.0;
    }
  }
  if (n < 2.0) throw EmptyInput("no actions to normalize");
  model.action_mean = sum / n;
  model.action_std =
      ((sq / n - model.action_mean.cwiseProduct(model.action_mean)).cwiseMax(0.0)).cwiseSqrt();
  model.action_std = model.action_std.cwiseMax(1e-3);
}

ToySet build_toy_set(const std::vector<Episode>& episodes, const PagModel& model,
                     const ToyTaskConfig& task, std::size_t max_frames) {
  ToySet set;
  std::size_t frames = 0;
  for (const auto& e : episodes) {
    for (std::size_t k = 0; k < e.steps.size() && frames < max_frames; ++k) {
      try {
        set.synthetic.push_back(make_sample(e, k, true, model, task));
      } catch (const OutOfBounds&) {
        continue;
      }
      set.grounding.push_back(make_sample(e, k, false, model, task));
      ++frames;
    }
    if (frames >= max_frames) break;
  }
  return set;
}

}  // namespace gf
