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

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "graspfactory/codec.hpp"
#include "graspfactory/dataset.hpp"

using namespace gf;
namespace fs = std::filesystem;

namespace {

std::string payload(Rng& rng) {
  std::string s(8 + uniform_index(rng, 200), '\0');
  for (auto& c : s) c = static_cast<char>(rng() & 0xff);
  return s;
}

// Writes `per_writer` random payloads through each of `writers` shards and
// returns every payload written.
std::vector<std::string> fill(const fs::path& root, int writers, int per_writer,
                              std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<std::string> all;
  for (int w = 0; w < writers; ++w) {
    auto writer = open_writer(root, w);
    for (int i = 0; i < per_writer; ++i) {
      all.push_back(payload(rng));
      writer->write_payload(all.back());
    }
    writer->close();
  }
  return all;
}

std::vector<fs::path> shard_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("crc32 check value and frame layout") {
  CHECK(crc32_ieee("123456789") == 0xCBF43926u);
  CHECK(crc32_ieee("") == 0u);
  const std::string f = make_frame("abc");
  REQUIRE(f.size() == kFrameHeader + 3);
  CHECK(static_cast<unsigned char>(f[0]) == 3);
  CHECK(f[1] == 0);
  CHECK(f[2] == 0);
  CHECK(f[3] == 0);
  std::uint32_t crc = 0;
  for (int i = 0; i < 4; ++i) crc |= std::uint32_t(static_cast<unsigned char>(f[4 + i])) << (8 * i);
  CHECK(crc == crc32_ieee("abc"));
  CHECK(f.substr(kFrameHeader) == "abc");
}

TEST_CASE("writers get distinct uuid shards") {
  gft::TempDir root("ds");
  auto a = open_writer(root.path(), 0);
  auto b = open_writer(root.path(), 1);
  CHECK(a->uuid() != b->uuid());
  CHECK(a->uuid().size() == 36);
  const ShardMeta ma = a->close();
  b->close();
  CHECK(ma.declared_count == 0);
  CHECK(shard_dirs(root.path()).size() == 2);
  const ShardMeta read = read_shard_meta(a->dir());
  CHECK(read.shard_uuid == a->uuid());
  CHECK(read.writer_id == 0);
  CHECK(read.schema_version == kSchemaVersion);
  CHECK_THROWS_AS(a->write_payload("late"), QueueClosed);
  CHECK_NOTHROW(a->close());  // idempotent
}

TEST_CASE("eight writers round trip") {
  gft::TempDir root("ds");
  const auto written = fill(root.path(), 8, 100);
  const auto loaded = load_payloads(root.path());
  CHECK(loaded.report.loaded == 800);
  CHECK(loaded.report.missing == 0);
  CHECK(loaded.report.missing_rate() == 0.0);
  CHECK(loaded.report.shards_seen == 8);
  std::multiset<std::string> a(written.begin(), written.end());
  std::multiset<std::string> b(loaded.payloads.begin(), loaded.payloads.end());
  CHECK(a == b);
  std::uint64_t declared = 0;
  for (const auto& d : shard_dirs(root.path())) declared += read_shard_meta(d).declared_count;
  CHECK(declared == 800);
}

TEST_CASE("order within a shard is preserved") {
  gft::TempDir root("ds");
  const auto written = fill(root.path(), 1, 50);
  const auto loaded = load_payloads(root.path());
  CHECK(loaded.payloads == written);
}

TEST_CASE("episodes round trip byte for byte") {
  gft::TempDir root("ds");
  const auto& episodes = gft::sample_episodes();
  {
    auto w = open_writer(root.path(), 0);
    for (const auto& e : episodes) w->write(e);
    w->close();
  }
  const auto loaded = load_payloads(root.path());
  REQUIRE(loaded.payloads.size() == episodes.size());
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    CHECK(loaded.payloads[i] == encode_episode(episodes[i]));
    const Episode back = decode_episode(loaded.payloads[i]);
    CHECK(encode_episode(back) == loaded.payloads[i]);
    CHECK(back.steps.size() == episodes[i].steps.size());
    CHECK(back.target_id == episodes[i].target_id);
    CHECK(back.success == episodes[i].success);
  }
  CHECK_THROWS_AS(decode_episode("\x01\x05"), ParseError);
}

TEST_CASE("persistence runs behind a non-blocking write path") {
  gft::TempDir root("ds");
  WriterOptions slow;
  slow.before_persist = [] { std::this_thread::sleep_for(std::chrono::milliseconds(2)); };
  auto w = open_writer(root.path(), 0, slow);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) w->write_payload("record " + std::to_string(i));
  const double enqueue = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  w->close();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // 200 records at 2 ms each cannot persist in under 0.4 s; enqueueing does.
  CHECK(total >= 0.4);
  CHECK(enqueue < 0.1);
  CHECK(load_payloads(root.path()).report.loaded == 200);
}

TEST_CASE("ten thousand records survive a lagging persistence path") {
  gft::TempDir root("ds");
  WriterOptions opt;
  opt.queue_capacity = 64;
  int calls = 0;
  opt.before_persist = [&calls] {
    if (++calls % 1000 == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  };
  auto w = open_writer(root.path(), 0, opt);
  for (int i = 0; i < 10000; ++i) w->write_payload(std::to_string(i));
  CHECK(w->close().declared_count == 10000);
  CHECK(load_payloads(root.path()).report.loaded == 10000);
}

TEST_CASE("deleted data file: placeholder and missing count") {
  gft::TempDir root("ds");
  fill(root.path(), 3, 100);
  const fs::path victim = shard_dirs(root.path())[1];
  fs::remove(victim / kDataFile);
  const auto r = load_payloads(root.path()).report;
  CHECK(r.missing == 100);
  CHECK(r.loaded == 200);
  CHECK(r.placeholders_created == 1);
  CHECK(fs::exists(victim / kDataFile));
  CHECK(fs::file_size(victim / kDataFile) == 0);
  // A second load sees the empty placeholder and still charges the shard.
  const auto again = load_payloads(root.path()).report;
  CHECK(again.missing == 100);
  CHECK(again.placeholders_created == 0);
}

TEST_CASE("payload flip loses exactly that record") {
  gft::TempDir root("ds");
  const auto written = fill(root.path(), 1, 50);
  const fs::path shard = shard_dirs(root.path())[0];
  Rng rng(3);
  corrupt_record(shard, 17, rng);
  const auto loaded = load_payloads(root.path());
  CHECK(loaded.report.missing == 1);
  CHECK(loaded.report.loaded == 49);
  std::vector<std::string> expect = written;
  expect.erase(expect.begin() + 17);
  CHECK(loaded.payloads == expect);
}

TEST_CASE("flip inside the CRC field loses one record") {
  gft::TempDir root("ds");
  fill(root.path(), 1, 20);
  const fs::path data = shard_dirs(root.path())[0] / kDataFile;
  const auto offsets = frame_offsets(data);
  std::string bytes = slurp(data);
  bytes[offsets[5] + 5] ^= 0x40;
  std::ofstream(data, std::ios::binary | std::ios::trunc) << bytes;
  const auto r = load_payloads(root.path()).report;
  CHECK(r.missing == 1);
  CHECK(r.loaded == 19);
}

TEST_CASE("truncation charges exactly the lost tail") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gft::TempDir root("ds");
    fill(root.path(), 2, 30, seed);
    Rng rng(seed);
    const MutationLog log = inject_corruption(root.path(), CorruptionKind::kTruncate, rng);
    // Frame-boundary arithmetic: records from the cut frame onward are gone.
    CHECK(log.expected_missing == 30 - log.record_index);
    const auto r = load_payloads(root.path()).report;
    CHECK(r.missing == log.expected_missing);
    CHECK(r.loaded == 60 - log.expected_missing);
  }
}

TEST_CASE("delete on a single-shard store removes its data file") {
  gft::TempDir root("ds");
  fill(root.path(), 1, 10);
  Rng rng(1);
  const MutationLog log = inject_corruption(root.path(), CorruptionKind::kDelete, rng);
  CHECK_FALSE(fs::exists(log.shard_dir / kDataFile));
  CHECK(log.expected_missing == 10);
  CHECK(load_payloads(root.path()).report.missing == 10);
}

TEST_CASE("k distinct record corruptions cost k records") {
  gft::TempDir root("ds");
  fill(root.path(), 4, 50);
  Rng rng(11);
  const auto shards = shard_dirs(root.path());
  int k = 0;
  for (std::size_t s = 0; s < shards.size(); ++s) {
    for (std::uint64_t idx : {3u, 9u, 27u}) {
      corrupt_record(shards[s], idx + s, rng);
      ++k;
    }
  }
  const auto r = load_payloads(root.path()).report;
  CHECK(r.missing == static_cast<std::uint64_t>(k));
  CHECK(r.loaded == 200 - static_cast<std::uint64_t>(k));
}

TEST_CASE("shard without metadata (crash before close) loads what is on disk") {
  gft::TempDir root("ds");
  fill(root.path(), 2, 10);
  const fs::path shard = shard_dirs(root.path())[0];
  fs::remove(shard / kMetaFile);
  const auto r = load_payloads(root.path()).report;
  CHECK(r.loaded == 20);
  CHECK(r.shards_without_meta == 1);
}

TEST_CASE("empty and missing roots") {
  gft::TempDir root("ds");
  const auto r = load_payloads(root.path()).report;
  CHECK(r.shards_seen == 0);
  CHECK(r.missing_rate() == 0.0);
  CHECK_THROWS_AS(load_payloads(root.path() / "nope"), IoError);
  Rng rng(0);
  CHECK_THROWS_AS(inject_corruption(root.path(), CorruptionKind::kFlip, rng), EmptyStore);
}

TEST_CASE("corruption kinds parse") {
  for (auto k : {CorruptionKind::kTruncate, CorruptionKind::kFlip, CorruptionKind::kDelete})
    CHECK(corruption_kind_from_string(to_string(k)) == k);
}
