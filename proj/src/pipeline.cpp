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

#include "graspfactory/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "graspfactory/codec.hpp"
#include "graspfactory/evalkit.hpp"
#include "graspfactory/pagtoy.hpp"

namespace gf {
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

struct Field {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof())
    throw ConfigError("bad value for '" + key + "': '" + text + "'");
  return v;
}

template <typename T>
std::string format_value(const T& v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

#define GF_FIELD(key, member, type)                                                 \
  Field {                                                                           \
    key, [](PipelineConfig& c, const std::string& s) { c.member = parse_value<type>(key, s); }, \
        [](const PipelineConfig& c) { return format_value(c.member); }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      GF_FIELD("global_seed", global_seed, std::uint64_t),
      GF_FIELD("n_episodes", n_episodes, int),
      GF_FIELD("n_workers", n_workers, int),
      Field{"assets_dir", [](PipelineConfig& c, const std::string& s) { c.assets_dir = s; },
            [](const PipelineConfig& c) { return c.assets_dir.string(); }},
      Field{"output_root", [](PipelineConfig& c, const std::string& s) { c.output_root = s; },
            [](const PipelineConfig& c) { return c.output_root.string(); }},
      GF_FIELD("mu", mu, double),
      GF_FIELD("objects_min", objects_min, int),
      GF_FIELD("objects_max", objects_max, int),
      GF_FIELD("grasp_candidates", grasp_candidates, int),
      GF_FIELD("plan_attempts", plan_attempts, int),
      GF_FIELD("layout_attempts", layout_attempts, int),
      GF_FIELD("simplify_target", simplify_target, int),
      GF_FIELD("scale_bucket", scale_bucket, double),
      GF_FIELD("cache_capacity", cache_capacity, int),
      GF_FIELD("gripper.max_width", gripper.max_width, double),
      GF_FIELD("gripper.finger_length", gripper.finger_length, double),
      GF_FIELD("gripper.finger_extension", gripper.finger_extension, double),
      GF_FIELD("gripper.approach_clearance", gripper.approach_clearance, double),
      GF_FIELD("planner.start_height", planner.start_height, double),
      GF_FIELD("planner.approach_s", planner.approach_s, double),
      GF_FIELD("planner.close_s", planner.close_s, double),
      GF_FIELD("planner.lift_s", planner.lift_s, double),
      GF_FIELD("planner.duration_jitter", planner.duration_jitter, double),
      GF_FIELD("planner.lift_height", planner.lift_height, double),
      GF_FIELD("planner.v_max", planner.v_max, double),
      GF_FIELD("train_episodes", train_episodes, int),
      GF_FIELD("mixer_synthetic_fraction", mixer_synthetic_fraction, double),
      GF_FIELD("vocab", vocab, int),
      GF_FIELD("train_steps", train_steps, int),
      GF_FIELD("batch_size", batch_size, int),
      GF_FIELD("optimizer", optimizer, std::string),
      GF_FIELD("learning_rate", learning_rate, double),
      GF_FIELD("integration_steps", integration_steps, int),
      GF_FIELD("eval_scenes", eval_scenes, int),
      GF_FIELD("attach_rule", attach_rule, std::string),
      GF_FIELD("attach_tolerance", attach_tolerance, double),
      GF_FIELD("scaling_axis", scaling_axis, std::string),
      Field{"scaling_budgets",
            [](PipelineConfig& c, const std::string& s) { c.scaling_budgets = s; },
            [](const PipelineConfig& c) { return c.scaling_budgets; }},
      GF_FIELD("scaling_pool", scaling_pool, int),
      GF_FIELD("scaling_vocab", scaling_vocab, int),
      GF_FIELD("scaling_train_steps", scaling_train_steps, int),
      GF_FIELD("scaling_batch_size", scaling_batch_size, int),
      GF_FIELD("scaling_learning_rate", scaling_learning_rate, double),
      GF_FIELD("filter_sample_rate", filter_sample_rate, double),
      GF_FIELD("filter_cutoff", filter_cutoff, double),
      GF_FIELD("filter_samples", filter_samples, int),
  };
  return kFields;
}

#undef GF_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid config: ") + what);
  };
  require(n_episodes >= 0, "n_episodes >= 0");
  require(n_workers >= 1 && n_workers <= 256, "n_workers in [1, 256]");
  require(mu > 0.0, "mu > 0");
  require(objects_min >= 1 && objects_max >= objects_min && objects_max <= 16,
          "1 <= objects_min <= objects_max <= 16");
  require(grasp_candidates >= 1, "grasp_candidates >= 1");
  require(plan_attempts >= 1 && layout_attempts >= 1, "attempt budgets >= 1");
  require(simplify_target >= 4, "simplify_target >= 4");
  require(scale_bucket > 0.0, "scale_bucket > 0");
  require(cache_capacity >= 1, "cache_capacity >= 1");
  require(gripper.max_width > 0 && gripper.finger_length > 0 && gripper.finger_extension > 0 &&
              gripper.approach_clearance > 0,
          "gripper dimensions > 0");
  require(planner.approach_s > 0 && planner.close_s > 0 && planner.lift_s > 0,
          "phase durations > 0");
  require(planner.duration_jitter >= 0 && planner.duration_jitter < 1, "jitter in [0, 1)");
  require(planner.lift_height >= kMinLift, "lift_height >= 0.15");
  require(planner.v_max > 0, "v_max > 0");
  require(mixer_synthetic_fraction >= 0 && mixer_synthetic_fraction <= 1,
          "mixer_synthetic_fraction in [0, 1]");
  require(vocab >= 2 && vocab <= 65536, "vocab in [2, 65536]");
  require(train_steps >= 0 && batch_size >= 1 && learning_rate > 0, "training settings");
  require(train_episodes >= 1, "train_episodes >= 1");
  optimizer_from_string(optimizer);
  require(integration_steps >= 1, "integration_steps >= 1");
  require(eval_scenes >= 1 && attach_tolerance > 0, "evaluation settings");
  attach_rule_from_string(attach_rule);
  scaling_axis_from_string(scaling_axis);
  const auto budgets = parse_budgets(scaling_budgets);
  require(std::is_sorted(budgets.begin(), budgets.end()), "scaling_budgets ascending");
  require(scaling_pool >= 1 && scaling_vocab >= 2 && scaling_vocab <= 65536 &&
              scaling_train_steps >= 0 && scaling_batch_size >= 1 && scaling_learning_rate > 0,
          "scaling settings");
  require(filter_sample_rate > 0 && filter_cutoff > 0 &&
              filter_cutoff < 0.5 * filter_sample_rate && filter_samples >= 1,
          "0 < filter_cutoff < filter_sample_rate / 2");
}

PipelineConfig parse_config(std::istream& in) {
  PipelineConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(c, value);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  return parse_config(in);
}

void write_config(const PipelineConfig& config, std::ostream& out) {
  for (const auto& f : fields()) out << f.key << " = " << f.get(config) << '\n';
}

std::vector<std::size_t> parse_budgets(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad budget '" + item + "' in '" + text + "'");
    }
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw ConfigError("no budgets in '" + text + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Asset cache

CachedAssets::CachedAssets(std::vector<AssetDescriptor> assets, CategoryRegistry registry,
                           int simplify_target, double bucket, std::size_t capacity)
    : assets_(std::move(assets)),
      registry_(std::move(registry)),
      simplify_target_(simplify_target),
      bucket_(bucket),
      capacity_(std::max<std::size_t>(capacity, 1)) {
  for (const auto& a : assets_)
    if (!registry_.contains(a.category))
      throw ConfigError("asset '" + a.instance_id + "' has unregistered category '" +
                        a.category + "'");
}

const CategorySpec& CachedAssets::spec(std::size_t index) const {
  return registry_.at(assets_.at(index).category);
}

int CachedAssets::bucket_count(std::size_t index) const {
  const CategorySpec& s = spec(index);
  return std::max(1, static_cast<int>(std::ceil((s.max_size - s.min_size) / bucket_ - 1e-9)));
}

int CachedAssets::bucket_of(std::size_t index, double extent) const {
  const CategorySpec& s = spec(index);
  const int b = static_cast<int>(std::floor((extent - s.min_size) / bucket_));
  return std::clamp(b, 0, bucket_count(index) - 1);
}

const CachedAssets::Base& CachedAssets::base(std::size_t index) {
  auto it = bases_.find(index);
  if (it != bases_.end()) return it->second;
  const AssetDescriptor& a = assets_.at(index);
  ++mesh_loads_;
  const Mesh loaded =
      simplify_mesh(load_mesh(a.path, a.category, a.instance_id), simplify_target_);
  Base b;
  b.mesh = std::make_shared<const Mesh>(loaded);
  b.rotations = std::make_shared<const std::vector<Mat3>>(
      stable_poses(loaded, spec(index).upright_only));
  return bases_.emplace(index, std::move(b)).first->second;
}

PreparedAsset CachedAssets::prepare(std::size_t index, double extent) {
  const int bucket = bucket_of(index, extent);
  const Key key{index, bucket};
  if (auto it = index_.find(key); it != index_.end()) {
    ++cache_hits_;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
  }
  const CategorySpec& s = spec(index);
  const double snapped = std::clamp(s.min_size + (bucket + 0.5) * bucket_, s.min_size, s.max_size);
  const Base& b = base(index);
  ++scaled_builds_;
  PreparedAsset prepared{std::make_shared<const Mesh>(scale_to_extent(*b.mesh, snapped)),
                         b.rotations};
  lru_.emplace_front(key, prepared);
  index_[key] = lru_.begin();
  if (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return prepared;
}

std::unique_ptr<CachedAssets> open_assets(const PipelineConfig& config) {
  auto assets = scan_asset_dir(config.assets_dir);
  if (assets.empty()) throw EmptyRegistry("no assets under " + config.assets_dir.string());
  return std::make_unique<CachedAssets>(
      std::move(assets), load_category_registry(config.assets_dir / "categories.json"),
      config.simplify_target, config.scale_bucket,
      static_cast<std::size_t>(config.cache_capacity));
}

// ---------------------------------------------------------------------------
// Generation

EpisodeOutcome generate_episode(const PipelineConfig& config, std::uint64_t episode_index,
                                AssetSource& assets) {
  EpisodeOutcome out;
  Rng rng(derive_seed(config.global_seed, episode_index));
  auto reject = [&](const char* cause) { ++out.rejects[cause]; };

  for (int attempt = 0; attempt < config.layout_attempts; ++attempt) {
    const int n_objects =
        config.objects_min +
        static_cast<int>(uniform_index(rng, config.objects_max - config.objects_min + 1));
    SceneLayout layout;
    try {
      layout = generate_layout(assets, n_objects, rng);
    } catch (const NoStablePose&) {
      reject("no_stable_pose");
      continue;
    }
    const Placement& target = layout.placements.front();
    const CameraRig rig = randomize_cameras(rng);
    const Mesh world = transformed(*target.mesh, target.pose);

    std::vector<GraspPose> grasps;
    try {
      grasps = sample_antipodal(world, config.gripper, config.mu, config.grasp_candidates, rng);
    } catch (const NoGraspFound&) {
      reject("no_grasp");
      continue;
    }
    std::erase_if(grasps, [&](const GraspPose& g) {
      return !grasp_collision_free(g, layout, target.instance_id, config.gripper);
    });
    if (grasps.empty()) {
      reject("grasp_collision");
      continue;
    }

    std::optional<std::vector<TrajectoryStep>> steps;
    GraspPose chosen;
    for (int p = 0; p < config.plan_attempts && !steps; ++p) {
      chosen = grasps[uniform_index(rng, grasps.size())];
      try {
        steps = plan_grasp_trajectory(layout, target.instance_id, chosen, config.gripper, rng,
                                      config.planner);
      } catch (const PlanRejected&) {
        reject("plan_rejected");
      }
    }
    if (!steps) continue;

    Episode e;
    e.episode_index = episode_index;
    e.instruction = instruction_for(target.category);
    e.target_id = target.instance_id;
    e.rig = rig;
    e.steps = std::move(*steps);
    e.grasp_label = chosen;
    e.layout = std::move(layout);
    e.bbox_labels = label_bboxes(e);
    if (e.bbox_labels.front().empty()) {
      reject("not_visible");
      continue;
    }
    if (!validate_lift(e, config.mu)) {
      reject("lift_failed");
      continue;
    }
    out.episode = std::move(e);
    return out;
  }
  return out;
}

GenerationSummary generate(const PipelineConfig& config) {
  config.validate();
  std::error_code ec;
  fs::create_directories(config.output_root, ec);
  if (ec) throw IoError("cannot create " + config.output_root.string() + ": " + ec.message());

  GenerationSummary summary;
  summary.mesh_loads.assign(config.n_workers, 0);
  std::mutex mu;
  std::exception_ptr failure;
  const auto t0 = std::chrono::steady_clock::now();
  {
    std::vector<std::jthread> workers;
    for (int w = 0; w < config.n_workers; ++w) {
      workers.emplace_back([&, w] {
        try {
          auto assets = open_assets(config);
          ShardWriter writer(config.output_root, w);
          int written = 0, skipped = 0;
          std::map<std::string, int> rejects;
          for (int i = w; i < config.n_episodes; i += config.n_workers) {
            EpisodeOutcome outcome = generate_episode(config, static_cast<std::uint64_t>(i), *assets);
            for (const auto& [cause, n] : outcome.rejects) rejects[cause] += n;
            if (outcome.episode) {
              writer.write(*outcome.episode);
              ++written;
            } else {
              ++skipped;
            }
          }
          writer.close();
          std::lock_guard lock(mu);
          summary.episodes_written += written;
          summary.skipped += skipped;
          for (const auto& [cause, n] : rejects) summary.rejects[cause] += n;
          summary.mesh_loads[w] = assets->mesh_loads();
          summary.shards.push_back(writer.uuid());
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary.throughput = summary.seconds > 0 ? summary.episodes_written / summary.seconds : 0.0;
  std::sort(summary.shards.begin(), summary.shards.end());
  return summary;
}

void print_summary(const GenerationSummary& s, std::ostream& out) {
  out << "episodes_written " << s.episodes_written << "\n";
  out << "skipped " << s.skipped << "\n";
  for (const auto& [cause, n] : s.rejects) out << "reject." << cause << ' ' << n << "\n";
  out << "seconds " << s.seconds << "\n";
  out << "throughput_eps_per_s " << s.throughput << "\n";
  for (std::size_t w = 0; w < s.mesh_loads.size(); ++w)
    out << "worker." << w << ".mesh_loads " << s.mesh_loads[w] << "\n";
  out << "shards " << s.shards.size() << "\n";
}

std::vector<Episode> generate_in_memory(const PipelineConfig& config, int n,
                                        std::uint64_t first_index) {
  auto assets = open_assets(config);
  std::vector<Episode> out;
  for (int i = 0; i < n; ++i) {
    auto outcome = generate_episode(config, first_index + static_cast<std::uint64_t>(i), *assets);
    if (outcome.episode) out.push_back(std::move(*outcome.episode));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audit

AuditReport validate_store(const fs::path& root, double mu, const GripperSpec& gripper) {
  AuditReport a;
  a.load = load_dataset(root, [&](std::string_view payload, const RecordRef&) {
    ++a.episodes;
    Episode e;
    try {
      e = decode_episode(payload);
    } catch (const std::exception&) {
      ++a.decode_errors;
      return;
    }
    const auto n = e.steps.size();
    if (n < 60 || n > 140) ++a.step_count_violations;
    bool closure_ok = count_closures(e.steps) == 1;
    for (std::size_t i = closure_index(e.steps); i < n; ++i)
      closure_ok = closure_ok && e.steps[i].gripper == Gripper::kClosed;
    if (!closure_ok) ++a.closure_violations;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(e.steps[i].t - kControlPeriod * static_cast<double>(i)) > 1e-9) {
        ++a.timing_violations;
        break;
      }
    }
    const auto& g = e.grasp_label;
    if (!force_closure(g.contacts, mu)) ++a.force_closure_violations;
    if (!(g.width > 0.0 && g.width <= gripper.max_width) ||
        std::abs((g.contacts[1].point - g.contacts[0].point).norm() - g.width) > 1e-6)
      ++a.width_violations;
    bool boxes_ok = e.bbox_labels.size() == n;
    for (const auto& step_boxes : e.bbox_labels)
      for (const auto& b : step_boxes)
        boxes_ok = boxes_ok && bbox_valid(b, e.rig.views[static_cast<int>(b.view)].intrinsics);
    if (!boxes_ok) ++a.bbox_violations;
    if (e.success) {
      try {
        const double lift = target_pose_at(e, n - 1).translation().z() -
                            e.layout.find(e.target_id).pose.translation().z();
        if (lift < kMinLift - 1e-9) ++a.lift_violations;
      } catch (const std::exception&) {
        ++a.lift_violations;
      }
    }
  });
  return a;
}

void print_audit(const AuditReport& a, std::ostream& out) {
  out << "shards_seen " << a.load.shards_seen << "\n";
  out << "shards_empty " << a.load.shards_empty << "\n";
  out << "loaded " << a.load.loaded << "\n";
  out << "missing " << a.load.missing << "\n";
  out << "missing_rate " << a.load.missing_rate() << "\n";
  out << "placeholders_created " << a.load.placeholders_created << "\n";
  out << "decode_errors " << a.decode_errors << "\n";
  out << "step_count_violations " << a.step_count_violations << "\n";
  out << "closure_violations " << a.closure_violations << "\n";
  out << "timing_violations " << a.timing_violations << "\n";
  out << "force_closure_violations " << a.force_closure_violations << "\n";
  out << "width_violations " << a.width_violations << "\n";
  out << "bbox_violations " << a.bbox_violations << "\n";
  out << "lift_violations " << a.lift_violations << "\n";
  out << "violations " << a.violations() << "\n";
}

}  // namespace gf
