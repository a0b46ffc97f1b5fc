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

#ifndef GRASPFACTORY_CODEC_HPP_
#define GRASPFACTORY_CODEC_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "graspfactory/planner.hpp"

namespace gf {

// Field-tagged little-endian encoding. Every field is
//   tag (1 byte) | length (LEB128 varint) | value bytes
// Integers are 8-byte LE, reals 8-byte IEEE-754 LE, strings raw UTF-8,
// vectors packed reals, nested messages their own encoding. Decoders skip
// unknown tags.
class Encoder {
 public:
  void put_u64(std::uint8_t tag, std::uint64_t v);
  void put_f64(std::uint8_t tag, double v);
  void put_reals(std::uint8_t tag, const double* data, std::size_t n);
  void put_bytes(std::uint8_t tag, std::string_view bytes);

  const std::string& bytes() const { return out_; }
  std::string release() { return std::move(out_); }

 private:
  void header(std::uint8_t tag, std::size_t length);
  std::string out_;
};

class Decoder {
 public:
  explicit Decoder(std::string_view bytes) : in_(bytes) {}

  // Advances to the next field; false at the end. Throws ParseError.
  bool next();
  std::uint8_t tag() const { return tag_; }
  std::string_view value() const { return value_; }

  std::uint64_t as_u64() const;
  double as_f64() const;
  // Throws ParseError unless the field holds exactly n reals.
  void as_reals(double* out, std::size_t n) const;
  std::string as_string() const { return std::string(value_); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
  std::uint8_t tag_ = 0;
  std::string_view value_;
};

std::string encode_episode(const Episode& episode);
// Placement meshes are not part of the record and come back empty.
Episode decode_episode(std::string_view bytes);

std::string encode_layout(const SceneLayout& layout);
SceneLayout decode_layout(std::string_view bytes);

}  // namespace gf

#endif  // GRASPFACTORY_CODEC_HPP_
