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

// Toy-scale progressive action generation: a feed-forward autoregressive
// token predictor (2D boxes, then grasp pose) and a flow-matching action
// head, trained jointly with hand-written reverse-mode gradients.

#ifndef GRASPFACTORY_PAGTOY_HPP_
#define GRASPFACTORY_PAGTOY_HPP_

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "graspfactory/planner.hpp"

namespace gf {

inline constexpr int kBboxTokens = 8;
inline constexpr int kGraspTokens = 6;
inline constexpr int kTotalTokens = kBboxTokens + kGraspTokens;
inline constexpr int kChunkDim = kChunkSize * kActionDim;

using BboxTokens = std::array<int, kBboxTokens>;
using GraspTokens = std::array<int, kGraspTokens>;
using TokenSeq = std::array<int, kTotalTokens>;
using Chunk = Eigen::Matrix<double, kChunkDim, 1>;
using VecX = Eigen::VectorXd;

// Per view (front, side): x_min, y_min, x_max, y_max, each floor(c/extent*V)
// clamped to V-1. A view absent from `boxes` yields zero tokens.
BboxTokens tokenize_bbox(const std::vector<BBox2D>& boxes, const Intrinsics& k, int vocab);
// Bin centers; always returns both views.
std::vector<BBox2D> detokenize_bbox(const BboxTokens& tokens, const Intrinsics& k,
                                    int vocab);

// Position bounds for grasp tokens; rotations are roll/pitch/yaw (about x,
// y, z, composed as Rz*Ry*Rx) quantized over [-pi, pi].
struct GraspBounds {
  Vec3 min{0.15, -0.4, -0.15};
  Vec3 max{0.85, 0.4, 0.65};
};
Vec3 rpy_from_rotation(const Mat3& r);
Mat3 rotation_from_rpy(const Vec3& rpy);
// Throws OutOfBounds for positions outside `bounds`.
GraspTokens tokenize_grasp(const Pose& pose, const GraspBounds& bounds, int vocab);
GraspTokens tokenize_grasp(const GraspPose& grasp, const GraspBounds& bounds, int vocab);
Pose detokenize_grasp(const GraspTokens& tokens, const GraspBounds& bounds, int vocab);

struct ToyObservation {
  VecX x;        // scene features
  VecX proprio;  // last two poses and the gripper state
};

struct TrainingSample {
  ToyObservation observation;
  TokenSeq tokens{};  // grasp part unused unless synthetic
  bool is_synthetic = false;
  Chunk action = Chunk::Zero();  // normalized; unused unless synthetic
};

struct FlowBatch {
  Chunk a0 = Chunk::Zero();
  Chunk eps = Chunk::Zero();
  double t = 0.0;
  Chunk a_t = Chunk::Zero();  // (1 - t) a0 + t eps
};
FlowBatch make_flow_batch(const Chunk& a0, Rng& rng);
FlowBatch make_flow_batch(const Chunk& a0, const Chunk& eps, double t);

struct PagConfig {
  int vocab = 256;
  int obs_dim = 40;
  int proprio_dim = 19;
  int embed = 32;        // observation embedding width
  int hidden = 64;       // token predictor width
  int flow_hidden = 128;
  double init_scale = 1.0;
  bool zero_heads = true;  // start from uniform logits
  GraspBounds grasp_bounds;  // to decode grasp tokens for the field's input
};

// Everything the vector field conditions on besides (A_t, t).
struct FlowContext {
  const VecX* x = nullptr;
  const VecX* proprio = nullptr;
  TokenSeq tokens{};
};

using VectorField = std::function<Chunk(const Chunk& a_t, double t, const FlowContext&)>;

class PagModel {
 public:
  struct Section {
    std::string name;
    Eigen::Index offset = 0;
    int rows = 0;
    int cols = 0;
    Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
  };

  explicit PagModel(const PagConfig& config);
  PagModel(const PagConfig& config, Rng& rng);  // random init

  const PagConfig& config() const { return config_; }
  VecX& params() { return theta_; }
  const VecX& params() const { return theta_; }
  const std::vector<Section>& sections() const { return sections_; }
  const Section& section(const std::string& name) const;
  Eigen::Map<Eigen::MatrixXd> mat(const std::string& name, VecX& buffer) const;
  Eigen::Map<const Eigen::MatrixXd> mat(const std::string& name, const VecX& buffer) const;
  Eigen::Map<const Eigen::MatrixXd> mat(const std::string& name) const {
    return mat(name, theta_);
  }

  // Action normalization (per action dimension, shared across the chunk).
  Eigen::Matrix<double, kActionDim, 1> action_mean =
      Eigen::Matrix<double, kActionDim, 1>::Zero();
  Eigen::Matrix<double, kActionDim, 1> action_std =
      Eigen::Matrix<double, kActionDim, 1>::Ones();
  Chunk normalize(const ActionChunk& chunk) const;
  ActionChunk denormalize(const Chunk& chunk) const;

  // Logits for token position `pos` given the observation and the tokens
  // before it. Only tokens[0..pos) are read.
  VecX logits(const ToyObservation& obs, const TokenSeq& tokens, int pos) const;
  Chunk field(const Chunk& a_t, double t, const FlowContext& ctx) const;
  VectorField field_fn() const;

 private:
  void layout();
  PagConfig config_;
  std::vector<Section> sections_;
  VecX theta_;
};

// Teacher-forced NLL of the box tokens, plus the grasp tokens iff synthetic.
double loss_s2(const PagModel& model, const TrainingSample& sample);
// Squared error of the field against eps - a0. Throws NotSynthetic.
double loss_s1(const PagModel& model, const TrainingSample& sample, const FlowBatch& batch);
double loss_s1(const VectorField& field, const TrainingSample& sample,
               const FlowBatch& batch);
// loss_s2 + loss_s1, the latter only for synthetic samples.
double total_loss(const PagModel& model, const TrainingSample& sample,
                  const FlowBatch& batch);

struct LossParts {
  double s2 = 0.0;
  double s1 = 0.0;
  double total() const { return s2 + s1; }
};

// Reverse-mode gradient of total_loss, accumulated into `grad` (scaled by
// `weight`). Returns the loss parts.
LossParts accumulate_grad(const PagModel& model, const TrainingSample& sample,
                          const FlowBatch& batch, VecX& grad, double weight = 1.0);
VecX grad(const PagModel& model, const TrainingSample& sample, const FlowBatch& batch);

// Draws grounding-only and full samples at a fixed ratio.
class SampleMixer {
 public:
  SampleMixer(std::vector<TrainingSample> synthetic, std::vector<TrainingSample> grounding,
              double synthetic_fraction = 0.5);
  const TrainingSample& draw(Rng& rng);
  std::size_t synthetic_drawn() const { return synthetic_drawn_; }
  std::size_t grounding_drawn() const { return grounding_drawn_; }

 private:
  std::vector<TrainingSample> synthetic_;
  std::vector<TrainingSample> grounding_;
  double synthetic_fraction_;
  std::size_t synthetic_drawn_ = 0;
  std::size_t grounding_drawn_ = 0;
};

enum class Optimizer { kSgd, kAdam };
std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& name);  // throws ConfigError

struct TrainConfig {
  int steps = 2000;
  int batch_size = 16;
  double learning_rate = 0.05;
  Optimizer optimizer = Optimizer::kSgd;
  double beta1 = 0.9;  // Adam moments
  double beta2 = 0.999;
  double clip_norm = 0.0;  // rescale the batch gradient to at most this norm; 0 disables
  std::uint64_t seed = 1;
};

struct LossRecord {
  int step = 0;
  double s2 = 0.0;
  double s1 = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> curve;  // batch means per step
  std::size_t grounding_samples = 0;
  std::size_t synthetic_samples = 0;
};

// Minibatch stochastic gradient descent (plain or Adam); deterministic for a
// given seed.
TrainResult train(PagModel& model, SampleMixer& mixer, const TrainConfig& config);
double smoothed_loss(const std::vector<LossRecord>& curve, std::size_t begin,
                     std::size_t window);
void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path);

// Records which history the decoder fed into each token position.
struct DecodeTrace {
  std::array<std::vector<int>, kTotalTokens> history;
};

struct SampledActions {
  TokenSeq tokens{};
  Chunk normalized = Chunk::Zero();
  ActionChunk chunk;
};

// Greedy boxes, then greedy grasp tokens, then Euler integration of the
// field from t=1 (noise) to t=0.
SampledActions sample_actions(const PagModel& model, const ToyObservation& obs,
                              int integration_steps, Rng& rng,
                              DecodeTrace* trace = nullptr);
Chunk integrate_field(const VectorField& field, const Chunk& eps, const FlowContext& ctx,
                      int integration_steps);

void save_checkpoint(const PagModel& model, const std::filesystem::path& path);
PagModel load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Toy task built from generated episodes.

struct ToyTaskConfig {
  std::vector<std::string> categories;  // instruction vocabulary
  GraspBounds grasp_bounds;
  int vocab = 256;
  int max_distractors = 5;
  int noise_dims = 4;
  double noise_scale = 0.1;
};
ToyTaskConfig default_toy_task();
int toy_obs_dim(const ToyTaskConfig& task);
// Proprio layout: per pose (previous, current) the normalized position and
// the first two rotation columns, then the gripper flag.
inline constexpr int kToyProprioDim = 19;
// Model dimensions matching a toy task.
PagConfig toy_model_config(const ToyTaskConfig& task);

struct ToyState {
  Pose ee_prev = Pose::Identity();
  Pose ee = Pose::Identity();
  bool closed = false;
  Pose target_pose = Pose::Identity();
};

ToyObservation make_observation(const SceneLayout& layout, const CameraRig& rig,
                                const std::string& target_id, const ToyState& state,
                                const ToyTaskConfig& task);
ToyState episode_state(const Episode& episode, std::size_t step);

// Deltas of steps [step, step + 4), padded with the last one.
ActionChunk chunk_at(const std::vector<TrajectoryStep>& steps, std::size_t step);

// Full sample (tokens, action) from one step; `synthetic` false drops the
// grasp and action labels.
TrainingSample make_sample(const Episode& episode, std::size_t step, bool synthetic,
                           const PagModel& model, const ToyTaskConfig& task);

// Mean/std of every action dimension over all chunks of the episodes.
void fit_action_normalizer(PagModel& model, const std::vector<Episode>& episodes);

struct ToySet {
  std::vector<TrainingSample> synthetic;
  std::vector<TrainingSample> grounding;
};
// One sample per kept step; `max_frames` caps the number of steps used.
ToySet build_toy_set(const std::vector<Episode>& episodes, const PagModel& model,
                     const ToyTaskConfig& task, std::size_t max_frames = SIZE_MAX);

}  // namespace gf

#endif  // GRASPFACTORY_PAGTOY_HPP_
