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

#ifndef GRASPFACTORY_DATASET_HPP_
#define GRASPFACTORY_DATASET_HPP_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "graspfactory/planner.hpp"

namespace gf {

// On-disk layout under a dataset root:
//   <uuid>/meta.json  shard_uuid, declared_count, writer_id, schema_version
//   <uuid>/data.bin   frames of  u32 LE length | u32 LE CRC-32 | payload
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kMetaFile = "meta.json";
inline constexpr const char* kDataFile = "data.bin";
inline constexpr std::size_t kFrameHeader = 8;

struct ShardMeta {
  std::string shard_uuid;
  std::uint64_t declared_count = 0;
  int writer_id = 0;
  int schema_version = kSchemaVersion;
};

std::uint32_t crc32_ieee(std::string_view bytes);
std::string make_frame(std::string_view payload);

struct WriterOptions {
  std::size_t queue_capacity = 1024;
  // Called by the persistence thread before each record is written; tests
  // use it to slow the device path down.
  std::function<void()> before_persist;
};

// One shard, single producer. Records are handed to a background thread
// through a bounded queue; write() blocks only while the queue is full.
class ShardWriter {
 public:
  // Creates <root>/<random uuid>/. Throws IoError.
  ShardWriter(const std::filesystem::path& root, int writer_id,
              WriterOptions options = {});
  ~ShardWriter();
  ShardWriter(const ShardWriter&) = delete;
  ShardWriter& operator=(const ShardWriter&) = delete;

  // Throws QueueClosed after close().
  void write(const Episode& episode);
  void write_payload(std::string payload);

  // Drains the queue, then writes meta.json. Throws IoError if any record
  // failed to persist. Idempotent.
  ShardMeta close();

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& uuid() const { return meta_.shard_uuid; }

 private:
  void persist_loop();

  std::filesystem::path dir_;
  ShardMeta meta_;
  WriterOptions options_;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool closed_ = false;
  std::uint64_t persisted_ = 0;
  std::exception_ptr error_;
  std::jthread thread_;
};

std::unique_ptr<ShardWriter> open_writer(const std::filesystem::path& root, int writer_id,
                                         WriterOptions options = {});

struct LoadReport {
  std::uint64_t loaded = 0;
  std::uint64_t missing = 0;
  std::uint64_t shards_seen = 0;
  std::uint64_t shards_empty = 0;
  std::uint64_t placeholders_created = 0;  // data file was absent
  std::uint64_t corrupt_frames = 0;        // checksum or framing failures
  std::uint64_t shards_without_meta = 0;

  double missing_rate() const {
    const std::uint64_t total = loaded + missing;
    return total == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(total);
  }
};

struct RecordRef {
  const std::filesystem::path& shard_dir;
  std::uint64_t index_in_shard;  // among loaded records
};

using RecordVisitor = std::function<void(std::string_view payload, const RecordRef&)>;

// Visits every parsable record; never throws for per-shard faults. Shards
// are visited in directory-name order. Throws IoError only if `root`
// itself cannot be listed.
LoadReport load_dataset(const std::filesystem::path& root, const RecordVisitor& visit);

struct LoadedPayloads {
  std::vector<std::string> payloads;
  LoadReport report;
};
LoadedPayloads load_payloads(const std::filesystem::path& root);

enum class CorruptionKind { kTruncate, kFlip, kDelete };
std::string to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(const std::string& name);

struct MutationLog {
  CorruptionKind kind = CorruptionKind::kFlip;
  std::filesystem::path shard_dir;
  std::uint64_t record_index = 0;  // first record hit
  std::uint64_t byte_offset = 0;   // in data.bin
  std::uint64_t expected_missing = 0;
};

// Applies one mutation to a random shard/record. Throws EmptyStore when
// the root has no shard with records.
MutationLog inject_corruption(const std::filesystem::path& root, CorruptionKind kind,
                              Rng& rng);

// Flips one payload byte of record `record_index` in a shard.
MutationLog corrupt_record(const std::filesystem::path& shard_dir,
                           std::uint64_t record_index, Rng& rng);

// Byte offsets of every frame in a clean data file.
std::vector<std::uint64_t> frame_offsets(const std::filesystem::path& data_file);

ShardMeta read_shard_meta(const std::filesystem::path& shard_dir);

}  // namespace gf

#endif  // GRASPFACTORY_DATASET_HPP_
