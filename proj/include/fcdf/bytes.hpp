// Copyright 2026 The FCDF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FCDF_BYTES_HPP_
#define FCDF_BYTES_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcdf/error.hpp"

namespace fcdf {

using Bytes = std::vector<std::uint8_t>;

// Append-only encoder with explicit byte order per call. Protocol headers are
// big-endian; cryptographic payloads are little-endian.
class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { out_.push_back(v); }

  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_be(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_u32_le(std::uint32_t v) { put_le(v, 4); }
  void put_u64_le(std::uint64_t v) { put_le(v, 8); }
  void put_u32_be(std::uint32_t v) { put_be(v, 4); }
  void put_u64_be(std::uint64_t v) { put_be(v, 8); }
  void put_f64_be(double v) { put_be(std::bit_cast<std::uint64_t>(v), 8); }

  void put_raw(std::span<const std::uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  void put_raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  std::size_t size() const { return out_.size(); }
  Bytes& bytes() { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Bounds-checked decoder. Reads past the end raise a FramingError carrying
// the absolute offset (base + cursor) of the failed read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in, std::size_t base = 0)
      : in_(in), base_(base) {}

  std::uint8_t get_u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint64_t get_be(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t get_u32_le() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t get_u64_le() { return get_le(8); }
  std::uint32_t get_u32_be() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t get_u64_be() { return get_be(8); }
  double get_f64_be() { return std::bit_cast<double>(get_be(8)); }

  std::span<const std::uint8_t> get_raw(std::size_t count) {
    need(count);
    auto s = in_.subspan(pos_, count);
    pos_ += count;
    return s;
  }
  std::string get_string(std::size_t count) {
    auto s = get_raw(count);
    return std::string(s.begin(), s.end());
  }

  std::size_t offset() const { return base_ + pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t count) const {
    if (in_.size() - pos_ < count) {
      throw FramingError(base_ + pos_, "truncated input: need " + std::to_string(count) +
                                           " bytes, have " + std::to_string(in_.size() - pos_));
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace fcdf

#endif  // FCDF_BYTES_HPP_
