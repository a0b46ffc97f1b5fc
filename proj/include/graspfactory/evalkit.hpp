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

#ifndef GRASPFACTORY_EVALKIT_HPP_
#define GRASPFACTORY_EVALKIT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "graspfactory/pagtoy.hpp"
#include "graspfactory/pipeline.hpp"
#include "graspfactory/planner.hpp"

namespace gf {

inline constexpr int kAttemptLimit = 3;

struct TrialResult {
  int trial_id = 0;
  std::string method_id;
  bool success = false;
  int path_length = 0;  // executed action steps
  int attempts = 0;     // gripper closures
  std::vector<std::uint8_t> gripper_log;  // commanded state per executed step
};

struct SuccessSummary {
  double rate = 0.0;
  int coerced = 0;  // successes reported with too many attempts
};

// Throws EmptyInput. Successes with more than kAttemptLimit attempts count
// as failures and are reported in `coerced`.
SuccessSummary success_summary(const std::vector<TrialResult>& results);
double success_rate(const std::vector<TrialResult>& results);

class TrialSet {
 public:
  // Throws PreconditionError if the method already has this trial.
  void add(const TrialResult& result);
  void add(const std::vector<TrialResult>& results);
  std::size_t trial_count() const { return trials_.size(); }
  std::vector<std::string> methods() const;
  const std::map<int, std::map<std::string, TrialResult>>& trials() const { return trials_; }

 private:
  std::map<int, std::map<std::string, TrialResult>> trials_;
};

// Per method: (1/N) sum S_i l_i / max(p_i, l_i), with l_i the shortest
// successful path in trial i. A method absent from a trial scores 0 there.
std::map<std::string, double> spl(const TrialSet& set);

// What a policy sees each time it is queried.
struct PolicyInput {
  const Episode* scene = nullptr;
  ToyState state;
  int step = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void reset(const Episode& scene, Rng& rng) { (void)scene, (void)rng; }
  virtual ActionChunk act(const PolicyInput& input, Rng& rng) = 0;
};

// Replays the scene's own planned trajectory.
class OracleReplayPolicy : public Policy {
 public:
  std::string name() const override { return "oracle"; }
  ActionChunk act(const PolicyInput& input, Rng& rng) override;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(double max_translation = 0.02, double max_rotation = 0.05,
                        double close_probability = 0.1)
      : max_translation_(max_translation),
        max_rotation_(max_rotation),
        close_probability_(close_probability) {}
  std::string name() const override { return "random"; }
  ActionChunk act(const PolicyInput& input, Rng& rng) override;

 private:
  double max_translation_;
  double max_rotation_;
  double close_probability_;
};

class PagPolicy : public Policy {
 public:
  PagPolicy(const PagModel& model, ToyTaskConfig task, int integration_steps = 10,
            std::string name = "pag")
      : model_(model), task_(std::move(task)), steps_(integration_steps), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  ActionChunk act(const PolicyInput& input, Rng& rng) override;

 private:
  const PagModel& model_;
  ToyTaskConfig task_;
  int steps_;
  std::string name_;
};

// How a closure decides whether the target is held.
//  kPinch: rays from both finger pads along the closing axis through the TCP
//    meet the target within the jaw stroke.
//  kForceClosure: kPinch, and the two contacts pass force_closure at `mu`.
//  kLabel: the TCP is within attach_tolerance of the scene's grasp label and
//    the closing axes agree within axis_tolerance_deg.
// The mesh-based rules fall back to kLabel for scenes without target meshes.
enum class AttachRule { kPinch, kForceClosure, kLabel };
std::string to_string(AttachRule rule);
AttachRule attach_rule_from_string(const std::string& name);  // throws ConfigError

struct BenchmarkConfig {
  int attempt_limit = kAttemptLimit;
  int max_steps = 150;
  AttachRule attach_rule = AttachRule::kPinch;
  double mu = kDefaultFriction;
  GripperSpec gripper;
  double attach_tolerance = 0.02;
  double axis_tolerance_deg = 30.0;  // sign-agnostic
  double lift_threshold = kMinLift;
  std::uint64_t seed = 0;
};

// Grasp check used at each closure.
bool closure_attaches(const Episode& scene, const Pose& target_pose, const Pose& tcp,
                      const BenchmarkConfig& config);

// Kinematic closed-loop rollout in each scene. The hand starts at the
// scene's first trajectory pose; a closure that passes closure_attaches
// fixes the target to the hand, opening releases it back onto the table.
// Trials end on success, after `attempt_limit` closures fail, or at
// `max_steps`.
std::vector<TrialResult> run_benchmark(Policy& policy, const std::vector<Episode>& scenes,
                                       const BenchmarkConfig& config = {});

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

enum class ScalingAxis { kFrames, kCategories, kInstances };
std::string to_string(ScalingAxis axis);
ScalingAxis scaling_axis_from_string(const std::string& name);

struct ScalingRow {
  std::size_t budget = 0;
  std::size_t frames_used = 0;
  double success_rate = 0.0;
  double spl = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct ScalingConfig {
  ScalingAxis axis = ScalingAxis::kFrames;
  PagConfig model;
  TrainConfig train;
  ToyTaskConfig task;
  BenchmarkConfig benchmark;
  double synthetic_fraction = 0.5;
  int integration_steps = 10;
  std::size_t max_frames = SIZE_MAX;  // cap for the category/instance axes
};

// One row per budget: subsample the training pool, train from scratch with
// a fixed seed, evaluate on the held-out scenes. Budgets must ascend.
std::vector<ScalingRow> scaling_report(const std::vector<std::size_t>& budgets,
                                       const std::vector<Episode>& pool,
                                       const std::vector<Episode>& heldout,
                                       const ScalingConfig& config);

void write_trials_csv(const std::vector<TrialResult>& results, const std::filesystem::path& path);
void write_spl_csv(const std::map<std::string, double>& spl_by_method,
                   const std::map<std::string, double>& sr_by_method,
                   const std::filesystem::path& path);
void write_scaling_csv(const std::vector<ScalingRow>& rows, const std::filesystem::path& path);

// Held-out scenes are generated from episode indices starting here, far from
// any training index.
inline constexpr std::uint64_t kHeldoutIndexBase = 1'000'000;

// Settings derived from a pipeline config. The toy vocabulary comes from the
// asset registry when the asset directory has one.
ToyTaskConfig toy_task_for(const PipelineConfig& config);
TrainConfig train_config_for(const PipelineConfig& config);
BenchmarkConfig benchmark_config_for(const PipelineConfig& config);
ScalingConfig scaling_config_for(const PipelineConfig& config);

struct ToyRun {
  PagModel model;
  ToyTaskConfig task;
  TrainResult result;
  double initial_loss = 0.0;  // smoothed over the first and last 5% of steps
  double final_loss = 0.0;
};
// Fresh model (seeded from the train seed) trained on samples from `episodes`.
ToyRun train_toy(const PipelineConfig& config, const std::vector<Episode>& episodes);

// Fraction of scenes where the first sampled action's translation has a
// positive inner product with the planned one, queried at each scene's first
// step.
double first_action_agreement(const PagModel& model, const ToyTaskConfig& task,
                              const std::vector<Episode>& scenes, int integration_steps,
                              std::uint64_t seed);

}  // namespace gf

#endif  // GRASPFACTORY_EVALKIT_HPP_
