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

// Shared fixtures: scratch directories, the built-in asset library and a
// small cached episode set.

#ifndef GRASPFACTORY_TESTS_FIXTURES_HPP_
#define GRASPFACTORY_TESTS_FIXTURES_HPP_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "graspfactory/pipeline.hpp"

namespace gft {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("gf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline const fs::path& asset_dir() {
  static TempDir dir("assets");
  static const bool written = (gf::write_builtin_library(dir.path()), true);
  (void)written;
  return dir.path();
}

inline gf::PipelineConfig small_config(std::uint64_t seed = 11) {
  gf::PipelineConfig c;
  c.global_seed = seed;
  c.assets_dir = asset_dir();
  return c;
}

// 40 generated episodes, built once per test binary.
inline const std::vector<gf::Episode>& sample_episodes() {
  static const std::vector<gf::Episode> episodes = gf::generate_in_memory(small_config(), 40);
  return episodes;
}

}  // namespace gft

#endif  // GRASPFACTORY_TESTS_FIXTURES_HPP_
