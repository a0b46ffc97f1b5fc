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

#ifndef GRASPFACTORY_PIPELINE_HPP_
#define GRASPFACTORY_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "graspfactory/dataset.hpp"
#include "graspfactory/grasp.hpp"
#include "graspfactory/planner.hpp"
#include "graspfactory/scene.hpp"

namespace gf {

// Every tunable of the generator and of the downstream tools. Serialized as
// `key = value` lines; `#` starts a comment.
struct PipelineConfig {
  std::uint64_t global_seed = 0;
  int n_episodes = 100;
  int n_workers = 1;
  std::filesystem::path assets_dir = "data/assets";
  std::filesystem::path output_root = "out/dataset";
  double mu = kDefaultFriction;
  int objects_min = 1;
  int objects_max = 6;

  // generation
  int grasp_candidates = 16;
  int plan_attempts = 4;
  int layout_attempts = 4;
  int simplify_target = 256;
  double scale_bucket = 0.005;  // meters
  int cache_capacity = 128;     // scaled meshes per worker
  GripperSpec gripper;
  PlannerConfig planner;

  // toy model and training
  int train_episodes = 500;
  double mixer_synthetic_fraction = 0.5;
  int vocab = 256;
  int train_steps = 2000;
  int batch_size = 16;
  std::string optimizer = "adam";  // or "sgd"
  double learning_rate = 0.003;
  int integration_steps = 10;

  // evaluation
  int eval_scenes = 100;
  std::string attach_rule = "pinch";  // "pinch", "force_closure" or "label"
  double attach_tolerance = 0.02;

  // scaling sweep
  std::string scaling_axis = "frames";  // "frames", "categories" or "instances"
  std::string scaling_budgets = "1000,4000,15000,45000";
  int scaling_pool = 500;  // episodes to subsample from
  int scaling_vocab = 32;
  int scaling_train_steps = 12000;
  int scaling_batch_size = 32;
  double scaling_learning_rate = 0.002;

  // control demo
  double filter_sample_rate = 1000.0;
  double filter_cutoff = 10.0;
  int filter_samples = 1000;

  void validate() const;  // throws ConfigError
};

PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::filesystem::path& path);
void write_config(const PipelineConfig& config, std::ostream& out);

// "1000, 5000,25000" -> {1000, 5000, 25000}. Throws ConfigError.
std::vector<std::size_t> parse_budgets(const std::string& text);

// Loads meshes from an asset directory on demand. Scaled meshes are kept in
// a bounded LRU keyed by (instance, scale bucket); the extent handed to a
// scene is snapped to the bucket center so cached and fresh results agree.
class CachedAssets : public AssetSource {
 public:
  CachedAssets(std::vector<AssetDescriptor> assets, CategoryRegistry registry,
               int simplify_target, double bucket, std::size_t capacity);

  std::size_t size() const override { return assets_.size(); }
  const CategorySpec& spec(std::size_t index) const override;
  PreparedAsset prepare(std::size_t index, double extent) override;

  std::size_t mesh_loads() const { return mesh_loads_; }    // file reads
  std::size_t scaled_builds() const { return scaled_builds_; }
  std::size_t cache_hits() const { return cache_hits_; }
  int bucket_of(std::size_t index, double extent) const;
  int bucket_count(std::size_t index) const;

 private:
  struct Base {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<const std::vector<Mat3>> rotations;
  };
  const Base& base(std::size_t index);

  std::vector<AssetDescriptor> assets_;
  CategoryRegistry registry_;
  int simplify_target_;
  double bucket_;
  std::size_t capacity_;
  std::unordered_map<std::size_t, Base> bases_;
  using Key = std::pair<std::size_t, int>;
  std::list<std::pair<Key, PreparedAsset>> lru_;
  std::map<Key, decltype(lru_)::iterator> index_;
  std::size_t mesh_loads_ = 0;
  std::size_t scaled_builds_ = 0;
  std::size_t cache_hits_ = 0;
};

std::unique_ptr<CachedAssets> open_assets(const PipelineConfig& config);

struct EpisodeOutcome {
  std::optional<Episode> episode;
  std::map<std::string, int> rejects;  // cause -> count
};

// One episode as a pure function of (config, index). Retries layouts,
// grasps and plans within the configured budgets.
EpisodeOutcome generate_episode(const PipelineConfig& config, std::uint64_t episode_index,
                                AssetSource& assets);

struct GenerationSummary {
  int episodes_written = 0;
  int skipped = 0;
  std::map<std::string, int> rejects;
  double seconds = 0.0;
  double throughput = 0.0;  // episodes per second
  std::vector<std::size_t> mesh_loads;  // per worker
  std::vector<std::string> shards;
};

// Worker w handles episodes w, w + n_workers, ... with its own shard writer
// and asset cache.
GenerationSummary generate(const PipelineConfig& config);
void print_summary(const GenerationSummary& summary, std::ostream& out);

// Generates episodes in memory (single thread), for tests and tools.
std::vector<Episode> generate_in_memory(const PipelineConfig& config, int n,
                                        std::uint64_t first_index = 0);

struct AuditReport {
  LoadReport load;
  std::uint64_t episodes = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t step_count_violations = 0;
  std::uint64_t closure_violations = 0;
  std::uint64_t timing_violations = 0;
  std::uint64_t force_closure_violations = 0;
  std::uint64_t width_violations = 0;
  std::uint64_t bbox_violations = 0;
  std::uint64_t lift_violations = 0;

  std::uint64_t violations() const {
    return decode_errors + step_count_violations + closure_violations + timing_violations +
           force_closure_violations + width_violations + bbox_violations + lift_violations;
  }
};

// Loads a store and re-checks every episode invariant.
AuditReport validate_store(const std::filesystem::path& root, double mu,
                           const GripperSpec& gripper = {});
void print_audit(const AuditReport& audit, std::ostream& out);

}  // namespace gf

#endif  // GRASPFACTORY_PIPELINE_HPP_
