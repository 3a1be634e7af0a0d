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

#ifndef FCDF_FHE_HPP_
#define FCDF_FHE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "fcdf/bytes.hpp"
#include "fcdf/error.hpp"
#include "fcdf/random.hpp"
#include "fcdf/ring.hpp"

namespace fcdf {

// Additive RLWE scheme over a single modulus.
//
// A vector x of values in [0, 1] is lifted to integers m = round(x * 2^s),
// packed into the low coefficients of a polynomial and encrypted as
//   c0 = -a,  c1 = a*s + delta*m + e,   delta = floor(q / p).
// Ciphertexts add coefficient-wise. Decryption computes c1 + c0*s =
// delta*m + e and rounds to the nearest multiple of delta.

/// Fixed-point and plaintext-space parameters layered on a ring.
struct SchemeParams {
  RingParamsPtr ring;
  int scale_bits = 16;
  int plain_modulus_bits = 26;
  std::uint64_t delta = 0;

  static constexpr int kDefaultDegree = 4096;
  static constexpr int kDefaultModulusBits = 54;
  static constexpr int kDefaultScaleBits = 16;
  static constexpr int kDefaultPlainModulusBits = 26;

  static SchemeParams make(RingParamsPtr ring, int scale_bits = kDefaultScaleBits,
                           int plain_modulus_bits = kDefaultPlainModulusBits) {
    require(ring != nullptr, ErrorKind::kContract, "scheme needs ring parameters");
    require(scale_bits >= 1 && scale_bits < plain_modulus_bits, ErrorKind::kValidation,
            "scale bits must be in [1, plain modulus bits)");
    require(plain_modulus_bits + 3 < ring->q_bits(), ErrorKind::kValidation,
            "plain modulus too wide for q");
    SchemeParams s;
    s.ring = std::move(ring);
    s.scale_bits = scale_bits;
    s.plain_modulus_bits = plain_modulus_bits;
    s.delta = s.ring->q() >> plain_modulus_bits;
    return s;
  }

  static SchemeParams defaults() {
    return make(make_params(kDefaultDegree, kDefaultModulusBits));
  }

  std::uint64_t plain_modulus() const { return std::uint64_t{1} << plain_modulus_bits; }
  std::uint64_t scale() const { return std::uint64_t{1} << scale_bits; }
  std::size_t slots() const { return ring->n(); }

  bool operator==(const SchemeParams& o) const {
    return ring->same_ring(*o.ring) && scale_bits == o.scale_bits &&
           plain_modulus_bits == o.plain_modulus_bits;
  }
};

struct SecretKey {
  RingPoly s;      // ternary, coefficient domain
  RingPoly s_ntt;  // cached transform of s
};

struct PublicKey {
  RingPoly b;  // -(a*s + e)
  RingPoly a;
};

struct KeyPair {
  SecretKey secret;
  PublicKey pub;
};

struct Ciphertext {
  RingPoly c0;
  RingPoly c1;
  std::uint32_t slot_count = 0;
  std::uint32_t sum_depth = 1;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

struct PlainVector {
  std::vector<double> values;
  double bound = 1.0;

  std::size_t slot_count() const { return values.size(); }
};

inline SecretKey make_secret_key(RingPoly s) {
  RingPoly s_ntt = ntt_forward(s);
  return {std::move(s), std::move(s_ntt)};
}

inline KeyPair keygen(const SchemeParams& scheme, ChaChaStream& rng) {
  RingPoly s = sample_ternary(scheme.ring, rng);
  RingPoly e = sample_error(scheme.ring, rng);
  RingPoly a = sample_uniform(scheme.ring, rng);
  RingPoly b = poly_neg(poly_add(poly_mul(a, s), e));
  return {make_secret_key(std::move(s)), {std::move(b), std::move(a)}};
}

/// Checks pk against sk: b + a*s must be a fresh error term.
inline bool verify_key_pair(const SecretKey& sk, const PublicKey& pk) {
  if (!sk.s.ring().same_ring(pk.a.ring()) || !pk.a.ring().same_ring(pk.b.ring())) return false;
  return infinity_norm(poly_add(pk.b, poly_mul(pk.a, sk.s))) <=
         static_cast<std::uint64_t>(kErrorEta);
}

namespace detail {

// Round-half-to-even of num / den for den > 0.
inline std::int64_t div_round_even(std::int64_t num, std::int64_t den) {
  std::int64_t quo = num / den;
  std::int64_t rem = num % den;
  if (rem < 0) {
    rem += den;
    --quo;
  }
  const std::int64_t twice = 2 * rem;
  if (twice > den || (twice == den && (quo & 1) != 0)) ++quo;
  return quo;
}

inline std::int64_t round_even(double x) { return static_cast<std::int64_t>(std::nearbyint(x)); }

}  // namespace detail

/// Fixed-point lift m_i = round(v_i * 2^scale_bits), ties to even.
inline std::vector<std::uint64_t> encode(const PlainVector& v, const SchemeParams& scheme) {
  require(std::isfinite(v.bound) && v.bound >= 0.0, ErrorKind::kEncoding,
          "plaintext bound must be finite and non-negative");
  require(v.bound * static_cast<double>(scheme.scale()) <
              static_cast<double>(scheme.plain_modulus()),
          ErrorKind::kEncoding, "bound * 2^scale_bits must stay below the plain modulus");
  require(v.values.size() <= scheme.slots(), ErrorKind::kEncoding,
          "vector of " + std::to_string(v.values.size()) + " values exceeds " +
              std::to_string(scheme.slots()) + " slots");
  std::vector<std::uint64_t> m(v.values.size());
  const double scale = static_cast<double>(scheme.scale());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = v.values[i];
    if (!std::isfinite(x) || x < 0.0 || x > v.bound) {
      fail(ErrorKind::kEncoding, "value " + std::to_string(x) + " at slot " + std::to_string(i) +
                                     " outside [0, " + std::to_string(v.bound) + "]");
    }
    m[i] = static_cast<std::uint64_t>(detail::round_even(x * scale));
  }
  return m;
}

inline std::vector<double> decode(std::span<const std::int64_t> m, const SchemeParams& scheme) {
  std::vector<double> out(m.size());
  const double inv = 1.0 / static_cast<double>(scheme.scale());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<double>(m[i]) * inv;
  return out;
}

/// Largest number of fresh unit-bounded ciphertexts that can be summed and
/// still decrypt: limited by plaintext overflow (p / 2^scale_bits) and by
/// the noise margin around the top of the message range.
inline std::uint32_t max_sum_depth(const SchemeParams& scheme) {
  const std::uint64_t q = scheme.ring->q();
  const std::uint64_t by_plaintext = scheme.plain_modulus() >> scheme.scale_bits;
  std::uint32_t depth = 0;
  for (std::uint64_t d = 1; d <= by_plaintext; ++d) {
    const std::uint64_t top = std::min(d * scheme.scale(), scheme.plain_modulus());
    const std::uint64_t gap = q - scheme.delta * top;
    const std::uint64_t margin = std::min(scheme.delta / 2, gap / 2);
    if (d * static_cast<std::uint64_t>(kErrorEta) >= margin) break;
    depth = static_cast<std::uint32_t>(d);
  }
  return depth;
}

/// Encrypts a unit-bounded vector under the shared secret with fresh a and e.
inline Ciphertext encrypt(const SecretKey& sk, const PlainVector& v, const SchemeParams& scheme,
                          ChaChaStream& rng) {
  require(sk.s.ring().same_ring(*scheme.ring), ErrorKind::kContract,
          "secret key ring differs from scheme ring");
  require(v.bound <= 1.0, ErrorKind::kEncoding, "encrypted payloads must be bounded by 1");
  const std::vector<std::uint64_t> m = encode(v, scheme);
  const RingParamsPtr& ring = scheme.ring;
  const std::uint64_t q = ring->q();

  RingPoly a = sample_uniform(ring, rng);
  RingPoly e = sample_error(ring, rng);
  RingPoly as = ntt_inverse(poly_mul(ntt_forward(a), sk.s_ntt));

  RingPoly c1 = poly_add(as, e);
  auto& c = c1.mutable_coeffs();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint64_t dm = detail::mul_mod(scheme.delta, m[i], q);
    const std::uint64_t s = c[i] + dm;
    c[i] = s >= q ? s - q : s;
  }
  return {poly_neg(a), std::move(c1), static_cast<std::uint32_t>(m.size()), 1};
}

/// Homomorphic sum; needs no key material. Refuses sums beyond max_sum_depth.
inline Ciphertext ct_add(const Ciphertext& x, const Ciphertext& y, const SchemeParams& scheme) {
  require(x.slot_count == y.slot_count, ErrorKind::kContract,
          "ct_add: slot counts differ (" + std::to_string(x.slot_count) + " vs " +
              std::to_string(y.slot_count) + ")");
  require(x.c0.ring().same_ring(*scheme.ring) && y.c0.ring().same_ring(*scheme.ring),
          ErrorKind::kContract, "ct_add: ciphertext ring differs from scheme");
  const std::uint64_t depth = std::uint64_t{x.sum_depth} + y.sum_depth;
  if (depth > max_sum_depth(scheme)) {
    fail(ErrorKind::kBudget, "sum of depth " + std::to_string(depth) + " exceeds capacity of " +
                                 std::to_string(max_sum_depth(scheme)) + " ciphertexts");
  }
  return {poly_add(x.c0, y.c0), poly_add(x.c1, y.c1), x.slot_count,
          static_cast<std::uint32_t>(depth)};
}

inline Ciphertext ct_sum(std::span<const Ciphertext> cts, const SchemeParams& scheme) {
  require(!cts.empty(), ErrorKind::kContract, "ct_sum of an empty list");
  std::uint64_t depth = 0;
  for (const auto& ct : cts) {
    require(ct.slot_count == cts.front().slot_count, ErrorKind::kContract,
            "ct_sum: slot counts differ");
    require(ct.c0.ring().same_ring(*scheme.ring), ErrorKind::kContract,
            "ct_sum: ciphertext ring differs from scheme");
    depth += ct.sum_depth;
  }
  if (depth > max_sum_depth(scheme)) {
    fail(ErrorKind::kBudget, "sum of depth " + std::to_string(depth) + " exceeds capacity of " +
                                 std::to_string(max_sum_depth(scheme)) + " ciphertexts");
  }
  Ciphertext acc = cts.front();
  const std::uint64_t q = scheme.ring->q();
  auto& a0 = acc.c0.mutable_coeffs();
  auto& a1 = acc.c1.mutable_coeffs();
  for (std::size_t k = 1; k < cts.size(); ++k) {
    for (std::size_t i = 0; i < a0.size(); ++i) {
      const std::uint64_t s0 = a0[i] + cts[k].c0[i];
      const std::uint64_t s1 = a1[i] + cts[k].c1[i];
      a0[i] = s0 >= q ? s0 - q : s0;
      a1[i] = s1 >= q ? s1 - q : s1;
    }
  }
  acc.sum_depth = static_cast<std::uint32_t>(depth);
  return acc;
}

namespace detail {

// c1 + c0*s lifted to a signed range around the valid messages [0, top]:
// residues past the midpoint of the gap between delta*top and q wrap to
// negative values.
inline std::vector<std::int64_t> lifted_phase(const SecretKey& sk, const Ciphertext& ct,
                                              const SchemeParams& scheme) {
  require(sk.s.ring().same_ring(ct.c0.ring()), ErrorKind::kContract,
          "secret key ring differs from ciphertext ring");
  const std::uint64_t q = scheme.ring->q();
  RingPoly phase = poly_add(ct.c1, ntt_inverse(poly_mul(ntt_forward(ct.c0), sk.s_ntt)));
  const std::uint64_t top = std::min(std::uint64_t{ct.sum_depth} * scheme.scale(),
                                     scheme.plain_modulus());
  const std::uint64_t upper = scheme.delta * top;
  const std::uint64_t threshold = upper + (q - upper) / 2;
  std::vector<std::int64_t> out(phase.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint64_t x = phase[i];
    out[i] = x > threshold ? -static_cast<std::int64_t>(q - x) : static_cast<std::int64_t>(x);
  }
  return out;
}

}  // namespace detail

inline PlainVector decrypt(const SecretKey& sk, const Ciphertext& ct, const SchemeParams& scheme) {
  const std::vector<std::int64_t> x = detail::lifted_phase(sk, ct, scheme);
  std::vector<std::int64_t> m(ct.slot_count);
  const auto delta = static_cast<std::int64_t>(scheme.delta);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = detail::div_round_even(x[i], delta);
  return {decode(m, scheme), static_cast<double>(ct.sum_depth)};
}

/// Remaining noise headroom in bits: log2(delta/2) - log2(max |noise|).
/// `expected` is the exact plaintext (already on the 2^-scale_bits lattice).
inline double noise_budget(const SecretKey& sk, const Ciphertext& ct, const PlainVector& expected,
                           const SchemeParams& scheme) {
  require(expected.values.size() == ct.slot_count, ErrorKind::kContract,
          "expected plaintext length differs from slot count");
  const std::vector<std::int64_t> x = detail::lifted_phase(sk, ct, scheme);
  const auto delta = static_cast<std::int64_t>(scheme.delta);
  const double scale = static_cast<double>(scheme.scale());
  std::uint64_t worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::int64_t m = 0;
    if (i < expected.values.size()) m = detail::round_even(expected.values[i] * scale);
    const std::int64_t noise = x[i] - delta * m;
    const auto mag = static_cast<std::uint64_t>(noise < 0 ? -noise : noise);
    worst = std::max(worst, mag);
  }
  return std::log2(static_cast<double>(scheme.delta) / 2.0) -
         std::log2(static_cast<double>(std::max<std::uint64_t>(worst, 1)));
}

// ---------------------------------------------------------------------------
// Serialization. Ciphertexts and key files are little-endian.

inline void write_poly_le(ByteWriter& w, const RingPoly& p) {
  for (std::uint64_t c : p.coeffs()) w.put_u64_le(c);
}

inline RingPoly read_poly_le(ByteReader& r, const RingParamsPtr& ring) {
  std::vector<std::uint64_t> c(ring->n());
  for (auto& v : c) {
    const std::size_t at = r.offset();
    v = r.get_u64_le();
    if (v >= ring->q()) throw FramingError(at, "coefficient not reduced mod q");
  }
  return RingPoly::from_coeffs(ring, std::move(c));
}

/// n (u32) | q (u64) | slot_count (u32) | sum_depth (u32) | c0 | c1
inline Bytes serialize_ciphertext(const Ciphertext& ct) {
  ByteWriter w;
  w.put_u32_le(static_cast<std::uint32_t>(ct.c0.ring().n()));
  w.put_u64_le(ct.c0.ring().q());
  w.put_u32_le(ct.slot_count);
  w.put_u32_le(ct.sum_depth);
  write_poly_le(w, ct.c0);
  write_poly_le(w, ct.c1);
  return w.take();
}

/// Decodes a ciphertext that must live on `ring`; a different (n, q) is a
/// contract error.
inline Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes,
                                         const RingParamsPtr& ring) {
  ByteReader r(bytes);
  const std::uint32_t n = r.get_u32_le();
  const std::uint64_t q = r.get_u64_le();
  if (n != ring->n() || q != ring->q()) {
    fail(ErrorKind::kContract, "ciphertext parameters (n=" + std::to_string(n) +
                                   ", q=" + std::to_string(q) + ") differ from expected (n=" +
                                   std::to_string(ring->n()) + ", q=" + std::to_string(ring->q()) +
                                   ")");
  }
  Ciphertext ct;
  const std::size_t slots_at = r.offset();
  ct.slot_count = r.get_u32_le();
  if (ct.slot_count > n) throw FramingError(slots_at, "slot count exceeds ring degree");
  const std::size_t depth_at = r.offset();
  ct.sum_depth = r.get_u32_le();
  if (ct.sum_depth == 0) throw FramingError(depth_at, "sum depth must be at least 1");
  ct.c0 = read_poly_le(r, ring);
  ct.c1 = read_poly_le(r, ring);
  if (!r.done()) throw FramingError(r.offset(), "trailing bytes after ciphertext");
  return ct;
}

inline constexpr char kKeyMagic[] = "FCDFKEY1";
inline constexpr std::uint8_t kKeyVersion = 0x01;
enum class KeyKind : std::uint8_t { kSecret = 0x01, kPublic = 0x02 };

namespace detail {

inline void write_key_header(ByteWriter& w, KeyKind kind, const RingParams& ring) {
  w.put_raw(std::string_view(kKeyMagic, 8));
  w.put_u8(kKeyVersion);
  w.put_u8(static_cast<std::uint8_t>(kind));
  w.put_u32_le(static_cast<std::uint32_t>(ring.n()));
  w.put_u64_le(ring.q());
}

inline RingParamsPtr read_key_header(ByteReader& r, KeyKind expected) {
  if (r.get_string(8) != std::string_view(kKeyMagic, 8)) throw FramingError(0, "bad key magic");
  const std::uint8_t version = r.get_u8();
  if (version != kKeyVersion) throw FramingError(8, "unsupported key version");
  const auto kind = static_cast<KeyKind>(r.get_u8());
  if (kind != expected) throw FramingError(9, "unexpected key kind");
  const std::uint32_t n = r.get_u32_le();
  const std::uint64_t q = r.get_u64_le();
  return RingParams::from_modulus(n, q);
}

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path);
}

}  // namespace detail

inline Bytes serialize_secret_key(const SecretKey& sk) {
  ByteWriter w;
  detail::write_key_header(w, KeyKind::kSecret, sk.s.ring());
  write_poly_le(w, sk.s);
  return w.take();
}

inline Bytes serialize_public_key(const PublicKey& pk) {
  ByteWriter w;
  detail::write_key_header(w, KeyKind::kPublic, pk.a.ring());
  write_poly_le(w, pk.b);
  write_poly_le(w, pk.a);
  return w.take();
}

inline SecretKey deserialize_secret_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  RingParamsPtr ring = detail::read_key_header(r, KeyKind::kSecret);
  RingPoly s = read_poly_le(r, ring);
  for (std::uint64_t c : s.coeffs()) {
    if (c > 1 && c != ring->q() - 1) fail(ErrorKind::kValidation, "secret key is not ternary");
  }
  if (!r.done()) throw FramingError(r.offset(), "trailing bytes after secret key");
  return make_secret_key(std::move(s));
}

inline PublicKey deserialize_public_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  RingParamsPtr ring = detail::read_key_header(r, KeyKind::kPublic);
  RingPoly b = read_poly_le(r, ring);
  RingPoly a = read_poly_le(r, ring);
  if (!r.done()) throw FramingError(r.offset(), "trailing bytes after public key");
  return {std::move(b), std::move(a)};
}

inline void save_secret_key(const SecretKey& sk, const std::string& path) {
  detail::write_file(path, serialize_secret_key(sk));
}
inline void save_public_key(const PublicKey& pk, const std::string& path) {
  detail::write_file(path, serialize_public_key(pk));
}
inline SecretKey load_secret_key(const std::string& path) {
  return deserialize_secret_key(detail::read_file(path));
}
inline PublicKey load_public_key(const std::string& path) {
  return deserialize_public_key(detail::read_file(path));
}

}  // namespace fcdf

#endif  // FCDF_FHE_HPP_
