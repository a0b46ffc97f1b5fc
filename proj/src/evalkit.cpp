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

#include "graspfactory/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>

namespace gf {

SuccessSummary success_summary(const std::vector<TrialResult>& results) {
  if (results.empty()) throw EmptyInput("no trials");
  SuccessSummary s;
  int ok = 0;
  for (const auto& r : results) {
    if (!r.success) continue;
    if (r.attempts > kAttemptLimit) {
      ++s.coerced;
      continue;
    }
    ++ok;
  }
  s.rate = static_cast<double>(ok) / static_cast<double>(results.size());
  return s;
}

double success_rate(const std::vector<TrialResult>& results) {
  return success_summary(results).rate;
}

void TrialSet::add(const TrialResult& result) {
  auto& slot = trials_[result.trial_id];
  if (!slot.emplace(result.method_id, result).second) {
    throw PreconditionError("duplicate trial " + std::to_string(result.trial_id) + " for " +
                            result.method_id);
  }
}

void TrialSet::add(const std::vector<TrialResult>& results) {
  for (const auto& r : results) add(r);
}

std::vector<std::string> TrialSet::methods() const {
  std::set<std::string> names;
  for (const auto& [id, by_method] : trials_) {
    for (const auto& [m, r] : by_method) names.insert(m);
  }
  return {names.begin(), names.end()};
}

namespace {

bool counts_as_success(const TrialResult& r) {
  return r.success && r.attempts <= kAttemptLimit && r.path_length > 0;
}

}  // namespace

std::map<std::string, double> spl(const TrialSet& set) {
  if (set.trial_count() == 0) throw EmptyInput("no trials");
  std::map<std::string, double> out;
  for (const auto& m : set.methods()) out[m] = 0.0;
  for (const auto& [id, by_method] : set.trials()) {
    int shortest = 0;
    for (const auto& [m, r] : by_method) {
      if (counts_as_success(r) && (shortest == 0 || r.path_length < shortest)) {
        shortest = r.path_length;
      }
    }
    if (shortest == 0) continue;
    for (const auto& [m, r] : by_method) {
      if (!counts_as_success(r)) continue;
      out[m] += static_cast<double>(shortest) / std::max(r.path_length, shortest);
    }
  }
  const double n = static_cast<double>(set.trial_count());
  for (auto& [m, v] : out) v /= n;
  return out;
}

ActionChunk OracleReplayPolicy::act(const PolicyInput& input, Rng&) {
  return chunk_at(input.scene->steps, static_cast<std::size_t>(input.step));
}

ActionChunk RandomPolicy::act(const PolicyInput&, Rng& rng) {
  ActionChunk c;
  for (auto& a : c.actions) {
    for (int i = 0; i < 3; ++i) {
      a.translation(i) = uniform(rng, -max_translation_, max_translation_);
      a.rotation(i) = uniform(rng, -max_rotation_, max_rotation_);
    }
    a.gripper = uniform01(rng) < close_probability_ ? 1.0 : 0.0;
  }
  return c;
}

ActionChunk PagPolicy::act(const PolicyInput& input, Rng& rng) {
  const Episode& scene = *input.scene;
  const ToyObservation obs =
      make_observation(scene.layout, scene.rig, scene.target_id, input.state, task_);
  return sample_actions(model_, obs, steps_, rng).chunk;
}

namespace {

bool label_attaches(const GraspPose& g, const Pose& tcp, const BenchmarkConfig& config) {
  if ((tcp.translation() - g.position).norm() > config.attach_tolerance) return false;
  const Vec3 axis = tcp.linear().col(1);
  const Vec3 label_axis = g.orientation.toRotationMatrix().col(1);
  return std::abs(axis.dot(label_axis)) >= std::cos(deg2rad(config.axis_tolerance_deg));
}

// Contact where a pad moving along `dir` from `origin` first touches the
// mesh, in the object frame. Empty when it misses or starts inside.
std::optional<Contact> pad_contact(const Mesh& mesh, const Vec3& origin, const Vec3& dir,
                                   double stroke) {
  const auto hit = raycast(mesh, origin, dir, 0.0);
  if (!hit || hit->t > stroke) return std::nullopt;
  const Vec3 n = mesh.face_normal(hit->triangle);
  if (n.dot(dir) >= 0.0) return std::nullopt;
  return Contact{origin + hit->t * dir, -n};
}

}  // namespace

std::string to_string(AttachRule rule) {
  switch (rule) {
    case AttachRule::kPinch: return "pinch";
    case AttachRule::kForceClosure: return "force_closure";
    case AttachRule::kLabel: return "label";
  }
  return "?";
}

AttachRule attach_rule_from_string(const std::string& name) {
  if (name == "pinch") return AttachRule::kPinch;
  if (name == "force_closure") return AttachRule::kForceClosure;
  if (name == "label") return AttachRule::kLabel;
  throw ConfigError("unknown attach rule '" + name + "'");
}

bool closure_attaches(const Episode& scene, const Pose& target_pose, const Pose& tcp,
                      const BenchmarkConfig& config) {
  const Placement& target = scene.layout.find(scene.target_id);
  if (config.attach_rule == AttachRule::kLabel || !target.mesh) {
    return label_attaches(scene.grasp_label, tcp, config);
  }
  const Pose to_object = target_pose.inverse();
  const double half = 0.5 * config.gripper.max_width;
  const Vec3 y = to_object.linear() * tcp.linear().col(1);
  const Vec3 c = to_object * tcp.translation();
  const auto a = pad_contact(*target.mesh, c + half * y, -y, 2.0 * half);
  const auto b = pad_contact(*target.mesh, c - half * y, y, 2.0 * half);
  if (!a || !b) return false;
  return config.attach_rule == AttachRule::kPinch || force_closure({*a, *b}, config.mu);
}

namespace {

struct Rollout {
  const Episode& scene;
  const BenchmarkConfig& config;
  ToyState state;
  Pose rest_pose;
  Pose grip_offset = Pose::Identity();
  bool attached = false;
  TrialResult result;

  Rollout(const Episode& s, const BenchmarkConfig& c) : scene(s), config(c) {
    rest_pose = scene.layout.find(scene.target_id).pose;
    state.ee = scene.steps.front().ee_pose;
    state.ee_prev = state.ee;
    state.target_pose = rest_pose;
  }

  // Returns true when the trial is over.
  bool step(const DeltaAction& a) {
    const Pose next = apply_delta(state.ee, a);
    const bool close_cmd = a.gripper >= 0.5;
    ++result.path_length;
    result.gripper_log.push_back(close_cmd ? 1 : 0);
    state.ee_prev = state.ee;
    state.ee = next;
    bool attempt_spent = false;
    if (close_cmd && !state.closed) {
      ++result.attempts;
      if (closure_attaches(scene, state.target_pose, next, config)) {
        attached = true;
        grip_offset = next.inverse() * state.target_pose;
      } else {
        attempt_spent = true;
      }
    } else if (!close_cmd && state.closed && attached) {
      attached = false;
      attempt_spent = true;
      Pose dropped = rest_pose;
      dropped.translation().head<2>() = state.target_pose.translation().head<2>();
      state.target_pose = dropped;
    }
    state.closed = close_cmd;
    if (attached) state.target_pose = next * grip_offset;

    const double rise = state.target_pose.translation().z() - rest_pose.translation().z();
    if (attached && rise >= config.lift_threshold) {
      result.success = true;
      return true;
    }
    if (attempt_spent && result.attempts >= config.attempt_limit) return true;
    return result.path_length >= config.max_steps;
  }
};

}  // namespace

std::vector<TrialResult> run_benchmark(Policy& policy, const std::vector<Episode>& scenes,
                                       const BenchmarkConfig& config) {
  std::vector<TrialResult> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Episode& scene = scenes[i];
    if (scene.steps.empty()) throw PreconditionError("scene without a start pose");
    Rng rng(derive_seed(config.seed, i));
    policy.reset(scene, rng);
    Rollout roll(scene, config);
    roll.result.trial_id = static_cast<int>(i);
    roll.result.method_id = policy.name();
    bool done = false;
    while (!done) {
      const PolicyInput input{&scene, roll.state, roll.result.path_length};
      const ActionChunk chunk = policy.act(input, rng);
      for (const auto& a : chunk.actions) {
        if ((done = roll.step(a))) break;
      }
    }
    out.push_back(std::move(roll.result));
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw PreconditionError("rank series differ in length");
  if (a.size() < 2) throw EmptyInput("need at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  // A constant series carries no ordering information.
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::string to_string(ScalingAxis axis) {
  switch (axis) {
    case ScalingAxis::kFrames: return "frames";
    case ScalingAxis::kCategories: return "categories";
    case ScalingAxis::kInstances: return "instances";
  }
  return "?";
}

ScalingAxis scaling_axis_from_string(const std::string& name) {
  if (name == "frames") return ScalingAxis::kFrames;
  if (name == "categories") return ScalingAxis::kCategories;
  if (name == "instances") return ScalingAxis::kInstances;
  throw ConfigError("unknown scaling axis '" + name + "'");
}

namespace {

std::string base_instance(const std::string& id) { return id.substr(0, id.find('#')); }

const std::string& target_category(const Episode& e) {
  return e.layout.find(e.target_id).category;
}

std::vector<Episode> select_pool(const std::vector<Episode>& pool, ScalingAxis axis,
                                 std::size_t budget) {
  std::vector<Episode> out;
  if (axis == ScalingAxis::kFrames) {
    // Leading episodes covering the frame budget.
    std::size_t frames = 0;
    for (const auto& e : pool) {
      if (frames >= budget) break;
      out.push_back(e);
      frames += e.steps.size();
    }
    return out;
  }
  if (axis == ScalingAxis::kCategories) {
    std::vector<std::string> seen;
    for (const auto& e : pool) {
      const auto& c = target_category(e);
      if (std::find(seen.begin(), seen.end(), c) == seen.end()) seen.push_back(c);
    }
    std::sort(seen.begin(), seen.end());
    seen.resize(std::min(seen.size(), budget));
    for (const auto& e : pool) {
      if (std::find(seen.begin(), seen.end(), target_category(e)) != seen.end()) out.push_back(e);
    }
    return out;
  }
  std::map<std::string, std::vector<std::string>> per_category;
  for (const auto& e : pool) {
    auto& names = per_category[target_category(e)];
    const std::string inst = base_instance(e.target_id);
    if (std::find(names.begin(), names.end(), inst) == names.end()) names.push_back(inst);
  }
  for (auto& [c, names] : per_category) {
    std::sort(names.begin(), names.end());
    names.resize(std::min(names.size(), budget));
  }
  for (const auto& e : pool) {
    const auto& names = per_category[target_category(e)];
    if (std::find(names.begin(), names.end(), base_instance(e.target_id)) != names.end()) {
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace

std::vector<ScalingRow> scaling_report(const std::vector<std::size_t>& budgets,
                                       const std::vector<Episode>& pool,
                                       const std::vector<Episode>& heldout,
                                       const ScalingConfig& config) {
  if (budgets.empty()) throw EmptyInput("no budgets");
  if (pool.empty() || heldout.empty()) throw EmptyInput("empty pool or held-out set");
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw ConfigError("budgets must be ascending");
  }
  std::vector<ScalingRow> rows;
  TrialSet trials;
  for (std::size_t budget : budgets) {
    const std::vector<Episode> subset = select_pool(pool, config.axis, budget);
    if (subset.empty()) throw EmptyInput("budget selects no episodes");
    const std::size_t cap = config.axis == ScalingAxis::kFrames ? budget : config.max_frames;

    Rng init(config.train.seed);
    PagModel model(config.model, init);
    fit_action_normalizer(model, subset);
    ToySet set = build_toy_set(subset, model, config.task, cap);
    ScalingRow row;
    row.budget = budget;
    row.frames_used = set.synthetic.size();
    SampleMixer mixer(std::move(set.synthetic), std::move(set.grounding),
                      config.synthetic_fraction);
    const TrainResult tr = train(model, mixer, config.train);
    const std::size_t window = std::max<std::size_t>(1, tr.curve.size() / 20);
    row.initial_loss = smoothed_loss(tr.curve, 0, window);
    row.final_loss = smoothed_loss(tr.curve, tr.curve.size() - window, window);

    PagPolicy policy(model, config.task, config.integration_steps,
                     "budget_" + std::to_string(budget));
    const auto results = run_benchmark(policy, heldout, config.benchmark);
    row.success_rate = success_rate(results);
    trials.add(results);
    rows.push_back(row);
  }
  const auto by_method = spl(trials);
  for (auto& row : rows) row.spl = by_method.at("budget_" + std::to_string(row.budget));
  return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  return out;
}

}  // namespace

void write_trials_csv(const std::vector<TrialResult>& results, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "trial_id,method_id,S,p,attempts\n";
  for (const auto& r : results) {
    out << r.trial_id << ',' << r.method_id << ',' << (r.success ? 1 : 0) << ',' << r.path_length
        << ',' << r.attempts << '\n';
  }
}

void write_spl_csv(const std::map<std::string, double>& spl_by_method,
                   const std::map<std::string, double>& sr_by_method,
                   const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method_id,success_rate,spl\n";
  for (const auto& [m, v] : spl_by_method) {
    const auto it = sr_by_method.find(m);
    out << m << ',' << (it == sr_by_method.end() ? 0.0 : it->second) << ',' << v << '\n';
  }
}

void write_scaling_csv(const std::vector<ScalingRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "budget,frames,success_rate,spl,initial_loss,final_loss\n";
  for (const auto& r : rows) {
    out << r.budget << ',' << r.frames_used << ',' << r.success_rate << ',' << r.spl << ','
        << r.initial_loss << ',' << r.final_loss << '\n';
  }
}

ToyTaskConfig toy_task_for(const PipelineConfig& config) {
  ToyTaskConfig task = default_toy_task();
  const auto registry = config.assets_dir / "categories.json";
  if (std::filesystem::exists(registry)) task.categories = load_category_registry(registry).names();
  task.vocab = config.vocab;
  return task;
}

TrainConfig train_config_for(const PipelineConfig& config) {
  TrainConfig t;
  t.steps = config.train_steps;
  t.batch_size = config.batch_size;
  t.learning_rate = config.learning_rate;
  t.optimizer = optimizer_from_string(config.optimizer);
  t.seed = derive_seed(config.global_seed, 0x7a11);
  return t;
}

BenchmarkConfig benchmark_config_for(const PipelineConfig& config) {
  BenchmarkConfig b;
  b.attach_rule = attach_rule_from_string(config.attach_rule);
  b.mu = config.mu;
  b.gripper = config.gripper;
  b.attach_tolerance = config.attach_tolerance;
  b.seed = derive_seed(config.global_seed, 0xe7a1);
  return b;
}

ScalingConfig scaling_config_for(const PipelineConfig& config) {
  ScalingConfig s;
  s.axis = scaling_axis_from_string(config.scaling_axis);
  s.task = toy_task_for(config);
  s.task.vocab = config.scaling_vocab;
  s.model = toy_model_config(s.task);
  s.train = train_config_for(config);
  s.train.steps = config.scaling_train_steps;
  s.train.batch_size = config.scaling_batch_size;
  s.train.learning_rate = config.scaling_learning_rate;
  s.benchmark = benchmark_config_for(config);
  s.synthetic_fraction = config.mixer_synthetic_fraction;
  s.integration_steps = config.integration_steps;
  return s;
}

ToyRun train_toy(const PipelineConfig& config, const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw EmptyInput("no training episodes");
  ToyTaskConfig task = toy_task_for(config);
  const TrainConfig tc = train_config_for(config);
  Rng init(tc.seed);
  ToyRun run{PagModel(toy_model_config(task), init), task, {}, 0.0, 0.0};
  fit_action_normalizer(run.model, episodes);
  ToySet set = build_toy_set(episodes, run.model, task);
  SampleMixer mixer(std::move(set.synthetic), std::move(set.grounding),
                    config.mixer_synthetic_fraction);
  run.result = train(run.model, mixer, tc);
  const auto& curve = run.result.curve;
  if (!curve.empty()) {
    const std::size_t window = std::max<std::size_t>(1, curve.size() / 20);
    run.initial_loss = smoothed_loss(curve, 0, window);
    run.final_loss = smoothed_loss(curve, curve.size() - window, window);
  }
  return run;
}

double first_action_agreement(const PagModel& model, const ToyTaskConfig& task,
                              const std::vector<Episode>& scenes, int integration_steps,
                              std::uint64_t seed) {
  if (scenes.empty()) throw EmptyInput("no scenes");
  Rng rng(seed);
  std::size_t agree = 0;
  for (const auto& e : scenes) {
    const auto obs = make_observation(e.layout, e.rig, e.target_id, episode_state(e, 0), task);
    const auto sampled = sample_actions(model, obs, integration_steps, rng);
    const auto truth = chunk_at(e.steps, 0);
    if (sampled.chunk.actions[0].translation.dot(truth.actions[0].translation) > 0) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(scenes.size());
}

}  // namespace gf
