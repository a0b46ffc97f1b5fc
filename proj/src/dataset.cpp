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

#include "graspfactory/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/uuid/uuid.hpp>
#include <boost/uuid/uuid_generators.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <nlohmann/json.hpp>

#include "graspfactory/codec.hpp"

namespace gf {
namespace fs = std::filesystem;

namespace {

void put_le32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::uint32_t get_le32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fresh_uuid() {
  // One generator per thread; seeded from the OS.
  thread_local boost::uuids::random_generator gen;
  return boost::uuids::to_string(gen());
}

// True if a well-formed frame with a matching checksum starts at `o`.
bool frame_ok(std::string_view data, std::size_t o) {
  if (data.size() - o < kFrameHeader) return false;
  const std::uint32_t len = get_le32(data.data() + o);
  if (len > data.size() - o - kFrameHeader) return false;
  return crc32_ieee(data.substr(o + kFrameHeader, len)) == get_le32(data.data() + o + 4);
}

// Cheap necessary condition used before paying for a checksum: the length
// fits and the frame ends at EOF or at another plausible header.
bool frame_plausible(std::string_view data, std::size_t o) {
  if (data.size() - o < kFrameHeader) return false;
  const std::uint64_t len = get_le32(data.data() + o);
  if (len > data.size() - o - kFrameHeader) return false;
  const std::uint64_t end = o + kFrameHeader + len;
  if (end == data.size()) return true;
  if (data.size() - end < kFrameHeader) return false;
  return get_le32(data.data() + end) <= data.size() - end - kFrameHeader;
}

std::size_t resync(std::string_view data, std::size_t from) {
  for (std::size_t p = from; p + kFrameHeader <= data.size(); ++p)
    if (frame_plausible(data, p) && frame_ok(data, p)) return p;
  return data.size();
}

}  // namespace

std::uint32_t crc32_ieee(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; records are far below 4 GiB but chunk anyway.
  while (!bytes.empty()) {
    const std::size_t n = std::min<std::size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n));
    bytes.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(crc);
}

std::string make_frame(std::string_view payload) {
  if (payload.size() > 0xffffffffu) throw IoError("record exceeds 4 GiB");
  std::string out;
  out.reserve(kFrameHeader + payload.size());
  put_le32(out, static_cast<std::uint32_t>(payload.size()));
  put_le32(out, crc32_ieee(payload));
  out.append(payload);
  return out;
}

// ---------------------------------------------------------------------------
// Writer

ShardWriter::ShardWriter(const fs::path& root, int writer_id, WriterOptions options)
    : options_(std::move(options)) {
  if (options_.queue_capacity == 0) options_.queue_capacity = 1;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root missing: " + root.string());
  meta_.shard_uuid = fresh_uuid();
  meta_.writer_id = writer_id;
  dir_ = root / meta_.shard_uuid;
  if (!fs::create_directory(dir_, ec) || ec)
    throw IoError("cannot create shard " + dir_.string());
  std::ofstream touch(dir_ / kDataFile, std::ios::binary);
  if (!touch) throw IoError("cannot create " + (dir_ / kDataFile).string());
  touch.close();
  thread_ = std::jthread([this] { persist_loop(); });
}

ShardWriter::~ShardWriter() {
  try {
    close();
  } catch (...) {
  }
}

void ShardWriter::write(const Episode& episode) { write_payload(encode_episode(episode)); }

void ShardWriter::write_payload(std::string payload) {
  std::unique_lock lock(mu_);
  if (closing_) throw QueueClosed("write after close on shard " + meta_.shard_uuid);
  not_full_.wait(lock, [&] { return queue_.size() < options_.queue_capacity || closing_; });
  if (closing_) throw QueueClosed("write after close on shard " + meta_.shard_uuid);
  queue_.push_back(std::move(payload));
  not_empty_.notify_one();
}

void ShardWriter::persist_loop() {
  std::ofstream out(dir_ / kDataFile, std::ios::binary | std::ios::app);
  if (!out) {
    std::lock_guard lock(mu_);
    error_ = std::make_exception_ptr(IoError("cannot open " + (dir_ / kDataFile).string()));
  }
  for (;;) {
    std::string payload;
    {
      std::unique_lock lock(mu_);
      not_empty_.wait(lock, [&] { return !queue_.empty() || closing_; });
      if (queue_.empty()) break;
      payload = std::move(queue_.front());
      queue_.pop_front();
      not_full_.notify_one();
    }
    if (options_.before_persist) options_.before_persist();
    if (error_) continue;  // keep draining so the producer never stalls
    const std::string frame = make_frame(payload);
    out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
    if (!out) {
      std::lock_guard lock(mu_);
      error_ = std::make_exception_ptr(IoError("write failed in " + dir_.string()));
      continue;
    }
    std::lock_guard lock(mu_);
    ++persisted_;
  }
  out.flush();
  if (!out && !error_) {
    std::lock_guard lock(mu_);
    error_ = std::make_exception_ptr(IoError("flush failed in " + dir_.string()));
  }
}

ShardMeta ShardWriter::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_) return meta_;
    closing_ = true;
  }
  not_empty_.notify_all();
  not_full_.notify_all();
  if (thread_.joinable()) thread_.join();
  closed_ = true;
  meta_.declared_count = persisted_;

  nlohmann::json j = {{"shard_uuid", meta_.shard_uuid},
                      {"declared_count", meta_.declared_count},
                      {"writer_id", meta_.writer_id},
                      {"schema_version", meta_.schema_version}};
  {
    std::ofstream out(dir_ / kMetaFile);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (dir_ / kMetaFile).string());
  }
  if (error_) std::rethrow_exception(error_);
  return meta_;
}

std::unique_ptr<ShardWriter> open_writer(const fs::path& root, int writer_id,
                                         WriterOptions options) {
  return std::make_unique<ShardWriter>(root, writer_id, std::move(options));
}

// ---------------------------------------------------------------------------
// Loader

ShardMeta read_shard_meta(const fs::path& shard_dir) {
  const nlohmann::json j = nlohmann::json::parse(read_file(shard_dir / kMetaFile));
  ShardMeta m;
  m.shard_uuid = j.at("shard_uuid").get<std::string>();
  m.declared_count = j.at("declared_count").get<std::uint64_t>();
  m.writer_id = j.at("writer_id").get<int>();
  m.schema_version = j.at("schema_version").get<int>();
  return m;
}

LoadReport load_dataset(const fs::path& root, const RecordVisitor& visit) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("cannot access dataset root " + root.string());
  std::vector<fs::path> shards;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_directory()) shards.push_back(it->path());
  if (ec) throw IoError("cannot list " + root.string() + ": " + ec.message());
  std::sort(shards.begin(), shards.end());

  LoadReport report;
  for (const auto& dir : shards) {
    ++report.shards_seen;
    std::optional<std::uint64_t> declared;
    try {
      declared = read_shard_meta(dir).declared_count;
    } catch (const std::exception&) {
      // Crash before close: the frames on disk are all there is.
      ++report.shards_without_meta;
    }

    const fs::path data_path = dir / kDataFile;
    if (!fs::exists(data_path, ec)) {
      std::ofstream placeholder(data_path, std::ios::binary);
      if (placeholder) ++report.placeholders_created;
      report.missing += declared.value_or(0);
      ++report.shards_empty;
      continue;
    }
    std::string bytes;
    try {
      bytes = read_file(data_path);
    } catch (const IoError&) {
      report.missing += declared.value_or(0);
      ++report.shards_empty;
      continue;
    }

    const std::string_view data(bytes);
    std::uint64_t loaded = 0, corrupt = 0;
    std::size_t o = 0;
    while (o < data.size()) {
      if (frame_ok(data, o)) {
        const std::uint32_t len = get_le32(data.data() + o);
        visit(data.substr(o + kFrameHeader, len), RecordRef{dir, loaded});
        ++loaded;
        o += kFrameHeader + len;
        continue;
      }
      // Try the boundary the (possibly damaged) header points at, then scan.
      std::size_t next = data.size();
      if (data.size() - o >= kFrameHeader) {
        const std::uint64_t skip = o + kFrameHeader + get_le32(data.data() + o);
        if (skip < data.size() && frame_ok(data, skip)) next = skip;
      }
      if (next == data.size()) next = resync(data, o + 1);
      if (next == data.size()) break;  // unparsable tail; accounted below
      ++corrupt;
      o = next;
    }
    report.loaded += loaded;
    report.corrupt_frames += corrupt;
    // A tail that never resyncs is a truncation: charge the shortfall against
    // the declared count, but never less than the frames known to be bad.
    const std::uint64_t expected = declared.value_or(loaded);
    report.missing += std::max(expected > loaded ? expected - loaded : 0, corrupt);
    if (loaded == 0) ++report.shards_empty;
  }
  return report;
}

LoadedPayloads load_payloads(const fs::path& root) {
  LoadedPayloads out;
  out.report = load_dataset(root, [&](std::string_view payload, const RecordRef&) {
    out.payloads.emplace_back(payload);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Corruption fixtures

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kTruncate: return "truncate";
    case CorruptionKind::kFlip: return "flip";
    case CorruptionKind::kDelete: return "delete";
  }
  return "?";
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
  if (name == "truncate") return CorruptionKind::kTruncate;
  if (name == "flip") return CorruptionKind::kFlip;
  if (name == "delete") return CorruptionKind::kDelete;
  throw ConfigError("unknown corruption kind '" + name + "'");
}

std::vector<std::uint64_t> frame_offsets(const fs::path& data_file) {
  const std::string bytes = read_file(data_file);
  std::vector<std::uint64_t> out;
  std::size_t o = 0;
  while (o + kFrameHeader <= bytes.size()) {
    const std::uint32_t len = get_le32(bytes.data() + o);
    if (len > bytes.size() - o - kFrameHeader) break;
    out.push_back(o);
    o += kFrameHeader + len;
  }
  return out;
}

namespace {

void flip_byte(const fs::path& file, std::uint64_t offset) {
  std::fstream f(file, std::ios::binary | std::ios::in | std::ios::out);
  if (!f) throw IoError("cannot open " + file.string());
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0xff);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
  if (!f) throw IoError("cannot modify " + file.string());
}

}  // namespace

MutationLog corrupt_record(const fs::path& shard_dir, std::uint64_t record_index,
                           Rng& rng) {
  const fs::path data = shard_dir / kDataFile;
  const auto offsets = frame_offsets(data);
  if (record_index >= offsets.size()) throw PreconditionError("record index out of range");
  const std::string bytes = read_file(data);
  const std::uint64_t o = offsets[record_index];
  const std::uint32_t len = get_le32(bytes.data() + o);
  if (len == 0) throw PreconditionError("cannot flip a byte of an empty payload");
  MutationLog log;
  log.kind = CorruptionKind::kFlip;
  log.shard_dir = shard_dir;
  log.record_index = record_index;
  log.byte_offset = o + kFrameHeader + uniform_index(rng, len);
  log.expected_missing = 1;
  flip_byte(data, log.byte_offset);
  return log;
}

MutationLog inject_corruption(const fs::path& root, CorruptionKind kind, Rng& rng) {
  std::vector<std::pair<fs::path, std::vector<std::uint64_t>>> shards;
  std::error_code ec;
  if (fs::is_directory(root, ec)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      if (!fs::exists(d / kDataFile)) continue;
      auto offsets = frame_offsets(d / kDataFile);
      if (!offsets.empty()) shards.emplace_back(d, std::move(offsets));
    }
  }
  if (shards.empty()) throw EmptyStore("no shard with records under " + root.string());

  const auto& [dir, offsets] = shards[uniform_index(rng, shards.size())];
  const fs::path data = dir / kDataFile;
  MutationLog log;
  log.kind = kind;
  log.shard_dir = dir;
  switch (kind) {
    case CorruptionKind::kDelete:
      log.expected_missing = offsets.size();
      fs::remove(data);
      break;
    case CorruptionKind::kFlip: {
      // Any byte of one frame, header included.
      log.record_index = uniform_index(rng, offsets.size());
      const std::uint64_t begin = offsets[log.record_index];
      const std::uint64_t end = log.record_index + 1 < offsets.size()
                                    ? offsets[log.record_index + 1]
                                    : fs::file_size(data);
      log.byte_offset = begin + uniform_index(rng, end - begin);
      log.expected_missing = 1;
      flip_byte(data, log.byte_offset);
      break;
    }
    case CorruptionKind::kTruncate: {
      log.record_index = uniform_index(rng, offsets.size());
      const std::uint64_t begin = offsets[log.record_index];
      const std::uint64_t end = log.record_index + 1 < offsets.size()
                                    ? offsets[log.record_index + 1]
                                    : fs::file_size(data);
      // Cut strictly inside the frame.
      log.byte_offset = begin + 1 + uniform_index(rng, end - begin - 1);
      log.expected_missing = offsets.size() - log.record_index;
      fs::resize_file(data, log.byte_offset);
      break;
    }
  }
  return log;
}

}  // namespace gf
