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

// graspfactory command line: data generation, store maintenance, toy
// training and evaluation, filter demo.
//
// Exit codes: 0 ok, 1 usage, 2 runtime failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "graspfactory/control.hpp"
#include "graspfactory/evalkit.hpp"
#include "graspfactory/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, Common& c, bool with_workers = false) {
  cmd->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "global seed");
  if (with_workers) cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable")
      ->expected(1)
      ->allow_extra_args(false)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

gf::PipelineConfig resolve(const Common& c) {
  std::string text;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw gf::IoError("cannot read " + c.config_path);
    text.assign(std::istreambuf_iterator<char>(in), {});
    text += '\n';
  }
  for (const auto& kv : c.overrides) text += kv + '\n';
  std::istringstream in(text);
  gf::PipelineConfig config = gf::parse_config(in);
  if (c.seed) config.global_seed = *c.seed;
  if (c.workers) config.n_workers = *c.workers;
  config.validate();
  return config;
}

fs::path out_dir(const Common& c, const char* fallback) {
  fs::path dir = c.out.empty() ? fs::path(fallback) : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void save_config(const gf::PipelineConfig& config, const fs::path& dir) {
  std::ofstream out(dir / "config.txt");
  gf::write_config(config, out);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graspfactory: synthetic grasp data and toy policy tools"};
  app.require_subcommand(1);

  Common common;
  int episodes = -1;
  std::string budgets;
  std::string checkpoint;
  std::string kind = "flip";
  std::string root;
  int count = 1;
  int steps = -1;

  auto* assets_cmd = app.add_subcommand("write-assets", "write the built-in mesh library");
  assets_cmd->add_option("--out", common.out, "asset directory")->required();

  auto* gen = app.add_subcommand("generate", "generate episodes into a sharded store");
  add_common(gen, common, true);
  gen->add_option("--episodes", episodes, "episode count")->check(CLI::PositiveNumber);

  auto* val = app.add_subcommand("validate", "load a store and audit every episode");
  add_common(val, common);
  val->add_option("root", root, "store root (default: output_root)");

  auto* inj = app.add_subcommand("inject-corruption", "damage a store for fault-tolerance tests");
  add_common(inj, common);
  inj->add_option("root", root, "store root (default: output_root)");
  inj->add_option("--kind", kind, "flip, truncate or delete")
      ->check(CLI::IsMember({"flip", "truncate", "delete"}));
  inj->add_option("--count", count, "number of mutations")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train-toy", "train the toy policy; writes checkpoint and losses");
  add_common(tr, common);
  tr->add_option("--steps", steps, "optimizer steps")->check(CLI::NonNegativeNumber);
  tr->add_option("--episodes", episodes, "training episodes")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "closed-loop benchmark on held-out scenes");
  add_common(ev, common);
  ev->add_option("--checkpoint", checkpoint, "trained model")->check(CLI::ExistingFile);
  ev->add_option("--episodes", episodes, "held-out scenes")->check(CLI::PositiveNumber);

  auto* sc = app.add_subcommand("scaling", "success rate against training budget");
  add_common(sc, common);
  sc->add_option("--budgets", budgets, "ascending comma-separated budgets");

  auto* fd = app.add_subcommand("filter-demo", "step responses of the command filters");
  add_common(fd, common);

  auto* cfg = app.add_subcommand("print-config", "print the effective config");
  add_common(cfg, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (assets_cmd->parsed()) {
      const auto written = gf::write_builtin_library(common.out);
      std::cout << "wrote " << written.size() << " meshes to " << common.out << '\n';
      return 0;
    }

    gf::PipelineConfig config = resolve(common);

    if (cfg->parsed()) {
      gf::write_config(config, std::cout);
    } else if (gen->parsed()) {
      if (!common.out.empty()) config.output_root = common.out;
      if (episodes > 0) config.n_episodes = episodes;
      fs::create_directories(config.output_root);
      const auto summary = gf::generate(config);
      gf::print_summary(summary, std::cout);
    } else if (val->parsed()) {
      const fs::path store = root.empty() ? config.output_root : fs::path(root);
      if (!fs::exists(store)) throw gf::IoError("no store at " + store.string());
      const auto audit = gf::validate_store(store, config.mu, config.gripper);
      gf::print_audit(audit, std::cout);
      return audit.violations() == 0 ? 0 : 2;
    } else if (inj->parsed()) {
      const fs::path store = root.empty() ? config.output_root : fs::path(root);
      gf::Rng rng(gf::derive_seed(config.global_seed, 0xc0de));
      const auto k = gf::corruption_kind_from_string(kind);
      for (int i = 0; i < count; ++i) {
        const auto log = gf::inject_corruption(store, k, rng);
        std::cout << gf::to_string(log.kind) << ' ' << log.shard_dir.filename().string()
                  << " record " << log.record_index << " offset " << log.byte_offset
                  << " expected_missing " << log.expected_missing << '\n';
      }
    } else if (tr->parsed()) {
      if (steps >= 0) config.train_steps = steps;
      if (episodes > 0) config.train_episodes = episodes;
      const fs::path dir = out_dir(common, "out/toy");
      save_config(config, dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto data = gf::generate_in_memory(config, config.train_episodes);
      const auto run = gf::train_toy(config, data);
      gf::save_checkpoint(run.model, dir / "checkpoint.bin");
      gf::write_loss_csv(run.result.curve, dir / "loss.csv");
      std::cout << "episodes " << data.size() << " steps " << run.result.curve.size()
                << " loss " << run.initial_loss << " -> " << run.final_loss << " ("
                << seconds_since(t0) << " s)\n"
                << "wrote " << (dir / "checkpoint.bin").string() << ", "
                << (dir / "loss.csv").string() << '\n';
    } else if (ev->parsed()) {
      if (episodes > 0) config.eval_scenes = episodes;
      const fs::path dir = out_dir(common, "out/eval");
      const auto scenes =
          gf::generate_in_memory(config, config.eval_scenes, gf::kHeldoutIndexBase);
      const auto bench = gf::benchmark_config_for(config);
      std::vector<std::unique_ptr<gf::Policy>> policies;
      policies.push_back(std::make_unique<gf::OracleReplayPolicy>());
      policies.push_back(std::make_unique<gf::RandomPolicy>());
      std::optional<gf::PagModel> model;
      if (!checkpoint.empty()) {
        model.emplace(gf::load_checkpoint(checkpoint));
        auto task = gf::toy_task_for(config);
        task.vocab = model->config().vocab;  // the checkpoint fixes the vocabulary
        if (gf::toy_model_config(task).obs_dim != model->config().obs_dim) {
          throw gf::ConfigError("checkpoint does not match the configured toy task");
        }
        policies.push_back(
            std::make_unique<gf::PagPolicy>(*model, task, config.integration_steps));
      }
      gf::TrialSet set;
      std::vector<gf::TrialResult> all;
      std::map<std::string, double> rates;
      for (auto& p : policies) {
        const auto results = gf::run_benchmark(*p, scenes, bench);
        rates[p->name()] = gf::success_rate(results);
        set.add(results);
        all.insert(all.end(), results.begin(), results.end());
      }
      const auto spl = gf::spl(set);
      gf::write_trials_csv(all, dir / "trials.csv");
      gf::write_spl_csv(spl, rates, dir / "spl.csv");
      for (const auto& [m, v] : spl) {
        std::cout << m << " success_rate " << rates[m] << " spl " << v << '\n';
      }
    } else if (sc->parsed()) {
      if (!budgets.empty()) config.scaling_budgets = budgets;
      config.validate();
      const fs::path dir = out_dir(common, "out/scaling");
      save_config(config, dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto pool = gf::generate_in_memory(config, config.scaling_pool);
      const auto heldout =
          gf::generate_in_memory(config, config.eval_scenes, gf::kHeldoutIndexBase);
      const auto list = gf::parse_budgets(config.scaling_budgets);
      const auto rows = gf::scaling_report(list, pool, heldout, gf::scaling_config_for(config));
      gf::write_scaling_csv(rows, dir / "scaling.csv");
      std::vector<double> x, y;
      for (const auto& r : rows) {
        std::cout << "budget " << r.budget << " frames " << r.frames_used << " success_rate "
                  << r.success_rate << " spl " << r.spl << '\n';
        x.push_back(static_cast<double>(r.budget));
        y.push_back(r.success_rate);
      }
      std::cout << "spearman " << gf::spearman_rho(x, y) << " (" << seconds_since(t0)
                << " s)\n";
    } else if (fd->parsed()) {
      const fs::path dir = out_dir(common, "out/filters");
      const auto r = gf::compare_step_responses(config.filter_cutoff, config.filter_sample_rate,
                                                static_cast<std::size_t>(config.filter_samples));
      for (const auto& f : gf::write_step_responses(r, config.filter_sample_rate, dir)) {
        std::cout << "wrote " << f.string() << '\n';
      }
    }
    return 0;
  } catch (const gf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
