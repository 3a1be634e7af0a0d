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

#ifndef FCDF_RANDOM_HPP_
#define FCDF_RANDOM_HPP_

#include <sodium.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace fcdf {

// Deterministic ChaCha20 keystream keyed by (seed, stream_id).
//
// Every sampler in the library draws from an explicitly passed stream; there
// is no global randomness. Distinct stream ids under one seed give
// independent streams, so per-client or per-trial randomness can be derived
// without sharing state. A stream is owned by one thread at a time.
//
// Satisfies UniformRandomBitGenerator, so it also plugs into Boost.Random
// distributions.
class ChaChaStream {
 public:
  using result_type = std::uint64_t;

  explicit ChaChaStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
    static const int init = sodium_init();
    (void)init;
    key_.fill(0);
    nonce_.fill(0);
    for (int i = 0; i < 8; ++i) {
      key_[i] = static_cast<unsigned char>(seed >> (8 * i));
      nonce_[i] = static_cast<unsigned char>(stream_id >> (8 * i));
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    if (pos_ + 8 > buffer_.size()) refill();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(buffer_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  // Uniform integer in [0, bound) by masked rejection; bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t top = bound - 1;
    std::uint64_t mask = top;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      const std::uint64_t v = next_u64() & mask;
      if (v <= top) return v;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  void refill() {
    buffer_.fill(0);
    crypto_stream_chacha20_ietf_xor_ic(buffer_.data(), buffer_.data(),
                                       buffer_.size(), nonce_.data(), counter_,
                                       key_.data());
    counter_ += static_cast<std::uint32_t>(buffer_.size() / 64);
    pos_ = 0;
  }

  std::array<unsigned char, crypto_stream_chacha20_ietf_KEYBYTES> key_{};
  std::array<unsigned char, crypto_stream_chacha20_ietf_NONCEBYTES> nonce_{};
  std::array<unsigned char, 512> buffer_{};
  std::size_t pos_ = 512;
  std::uint32_t counter_ = 0;
};

}  // namespace fcdf

#endif  // FCDF_RANDOM_HPP_
