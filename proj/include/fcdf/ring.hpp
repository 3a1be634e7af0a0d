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

#ifndef FCDF_RING_HPP_
#define FCDF_RING_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fcdf/error.hpp"
#include "fcdf/random.hpp"

namespace fcdf {

namespace detail {

__extension__ typedef unsigned __int128 u128;

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % q);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t q) {
  std::uint64_t result = 1 % q;
  base %= q;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, q);
    base = mul_mod(base, base, q);
    exp >>= 1;
  }
  return result;
}

// Deterministic Miller-Rabin; these bases are exact for all 64-bit inputs.
inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  constexpr std::uint64_t kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (std::uint64_t p : kBases) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : kBases) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

inline std::uint32_t bit_reverse(std::uint32_t x, int bits) {
  std::uint32_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

// Twiddle w with its Shoup companion floor(w * 2^64 / q).
struct ShoupWord {
  std::uint64_t value = 0;
  std::uint64_t quotient = 0;
};

inline ShoupWord make_shoup(std::uint64_t w, std::uint64_t q) {
  return {w, static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / q)};
}

// x * w mod q, lazily reduced into [0, 2q). Valid for any 64-bit x when q < 2^63.
inline std::uint64_t mul_shoup_lazy(std::uint64_t x, const ShoupWord& w, std::uint64_t q) {
  const auto hi = static_cast<std::uint64_t>((static_cast<u128>(x) * w.quotient) >> 64);
  return w.value * x - hi * q;
}

}  // namespace detail

/// Parameters of the negacyclic ring Z_q[X]/(X^n + 1).
///
/// Immutable after construction and shared by pointer between every
/// polynomial, key and ciphertext built on it. Construction validates that
/// n is a power of two (n >= 16), that q is a prime below 2^62 with
/// q = 1 (mod 2n), and precomputes bit-reversed powers of a primitive 2n-th
/// root of unity psi for the transform.
class RingParams {
 public:
  static constexpr std::size_t kMinDegree = 16;
  static constexpr int kMinModulusBits = 40;
  static constexpr int kMaxModulusBits = 62;

  /// Builds parameters for an explicit modulus (used when loading keys and
  /// ciphertexts). Throws kValidation / kParameter on invalid input.
  static std::shared_ptr<const RingParams> from_modulus(std::size_t n, std::uint64_t q) {
    validate_degree(n);
    require(q > 2 && q < (std::uint64_t{1} << kMaxModulusBits), ErrorKind::kParameter,
            "modulus " + std::to_string(q) + " must be below 2^62");
    require(q % (2 * n) == 1, ErrorKind::kParameter,
            "modulus " + std::to_string(q) + " is not 1 mod 2n");
    require(detail::is_prime_u64(q), ErrorKind::kParameter,
            "modulus " + std::to_string(q) + " is not prime");
    return std::shared_ptr<const RingParams>(new RingParams(n, q));
  }

  std::size_t n() const { return n_; }
  std::uint64_t q() const { return q_; }
  std::uint64_t psi() const { return psi_; }
  int log_n() const { return log_n_; }
  int q_bits() const { return std::bit_width(q_); }

  bool same_ring(const RingParams& other) const { return n_ == other.n_ && q_ == other.q_; }

  /// In-place forward negacyclic transform. Input coefficients in [0, q);
  /// output in [0, q), bit-reversed evaluation order.
  void forward(std::span<std::uint64_t> a) const {
    const std::uint64_t q = q_;
    const std::uint64_t two_q = 2 * q;
    std::size_t t = n_;
    for (std::size_t m = 1; m < n_; m <<= 1) {
      t >>= 1;
      for (std::size_t i = 0; i < m; ++i) {
        const detail::ShoupWord& w = psi_rev_[m + i];
        std::uint64_t* x = a.data() + 2 * i * t;
        std::uint64_t* y = x + t;
        for (std::size_t j = 0; j < t; ++j) {
          std::uint64_t u = x[j];
          if (u >= two_q) u -= two_q;
          const std::uint64_t v = detail::mul_shoup_lazy(y[j], w, q);
          x[j] = u + v;
          y[j] = u - v + two_q;
        }
      }
    }
    for (auto& c : a) {
      if (c >= two_q) c -= two_q;
      if (c >= q) c -= q;
    }
  }

  /// In-place inverse of forward(), including the 1/n scaling.
  void inverse(std::span<std::uint64_t> a) const {
    const std::uint64_t q = q_;
    const std::uint64_t two_q = 2 * q;
    std::size_t t = 1;
    for (std::size_t m = n_; m > 1; m >>= 1) {
      const std::size_t h = m >> 1;
      for (std::size_t i = 0; i < h; ++i) {
        const detail::ShoupWord& w = psi_inv_rev_[h + i];
        std::uint64_t* x = a.data() + 2 * i * t;
        std::uint64_t* y = x + t;
        for (std::size_t j = 0; j < t; ++j) {
          const std::uint64_t u = x[j];
          const std::uint64_t v = y[j];
          std::uint64_t s = u + v;
          if (s >= two_q) s -= two_q;
          x[j] = s;
          y[j] = detail::mul_shoup_lazy(u + two_q - v, w, q);
        }
      }
      t <<= 1;
    }
    for (auto& c : a) {
      c = detail::mul_shoup_lazy(c, n_inv_, q);
      if (c >= q) c -= q;
    }
  }

 private:
  RingParams(std::size_t n, std::uint64_t q)
      : n_(n), q_(q), log_n_(std::countr_zero(n)) {
    psi_ = find_psi();
    const std::uint64_t psi_inv = detail::pow_mod(psi_, q - 2, q);
    psi_rev_.resize(n);
    psi_inv_rev_.resize(n);
    std::uint64_t power = 1;
    std::uint64_t inv_power = 1;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = detail::bit_reverse(static_cast<std::uint32_t>(i), log_n_);
      psi_rev_[r] = detail::make_shoup(power, q);
      psi_inv_rev_[r] = detail::make_shoup(inv_power, q);
      power = detail::mul_mod(power, psi_, q);
      inv_power = detail::mul_mod(inv_power, psi_inv, q);
    }
    n_inv_ = detail::make_shoup(detail::pow_mod(n % q, q - 2, q), q);
  }

  static void validate_degree(std::size_t n) {
    require(n >= kMinDegree && std::has_single_bit(n) && n <= (std::size_t{1} << 17),
            ErrorKind::kValidation,
            "ring degree " + std::to_string(n) + " must be a power of two in [16, 2^17]");
  }

  // Smallest g^((q-1)/2n) over g = 2, 3, ... with order exactly 2n.
  std::uint64_t find_psi() const {
    const std::uint64_t exponent = (q_ - 1) / (2 * n_);
    for (std::uint64_t g = 2; g < q_; ++g) {
      const std::uint64_t candidate = detail::pow_mod(g, exponent, q_);
      if (detail::pow_mod(candidate, n_, q_) == q_ - 1) return candidate;
    }
    fail(ErrorKind::kParameter, "no primitive 2n-th root of unity");
  }

  std::size_t n_;
  std::uint64_t q_;
  int log_n_;
  std::uint64_t psi_ = 0;
  std::vector<detail::ShoupWord> psi_rev_;
  std::vector<detail::ShoupWord> psi_inv_rev_;
  detail::ShoupWord n_inv_;
};

using RingParamsPtr = std::shared_ptr<const RingParams>;

/// Smallest prime q >= 2^(q_bits-1) with q = 1 (mod 2n).
inline RingParamsPtr make_params(std::size_t n, int q_bits) {
  require(n >= RingParams::kMinDegree && std::has_single_bit(n), ErrorKind::kValidation,
          "ring degree " + std::to_string(n) + " must be a power of two >= 16");
  require(q_bits >= RingParams::kMinModulusBits && q_bits <= RingParams::kMaxModulusBits,
          ErrorKind::kValidation,
          "modulus width " + std::to_string(q_bits) + " outside [40, 62]");
  const std::uint64_t step = 2 * n;
  const std::uint64_t low = std::uint64_t{1} << (q_bits - 1);
  const std::uint64_t high = std::uint64_t{1} << q_bits;
  std::uint64_t q = low + ((1 + step - low % step) % step);
  for (; q < high; q += step) {
    if (detail::is_prime_u64(q)) return RingParams::from_modulus(n, q);
  }
  fail(ErrorKind::kParameter, "no prime q = 1 mod " + std::to_string(step) + " below 2^" +
                                  std::to_string(q_bits));
}

enum class PolyDomain : std::uint8_t { kCoefficient, kNtt };

/// Element of R_q: n residues in [0, q) plus a domain tag.
class RingPoly {
 public:
  RingPoly() = default;

  static RingPoly zero(RingParamsPtr params, PolyDomain domain = PolyDomain::kCoefficient) {
    RingPoly p;
    p.coeffs_.assign(params->n(), 0);
    p.params_ = std::move(params);
    p.domain_ = domain;
    return p;
  }

  static RingPoly from_coeffs(RingParamsPtr params, std::vector<std::uint64_t> coeffs,
                              PolyDomain domain = PolyDomain::kCoefficient) {
    require(coeffs.size() == params->n(), ErrorKind::kContract,
            "polynomial needs " + std::to_string(params->n()) + " coefficients, got " +
                std::to_string(coeffs.size()));
    for (std::uint64_t c : coeffs) {
      require(c < params->q(), ErrorKind::kContract, "coefficient not reduced mod q");
    }
    RingPoly p;
    p.params_ = std::move(params);
    p.coeffs_ = std::move(coeffs);
    p.domain_ = domain;
    return p;
  }

  // Signed small coefficients, mapped into [0, q).
  static RingPoly from_signed(RingParamsPtr params, std::span<const std::int64_t> values) {
    require(values.size() == params->n(), ErrorKind::kContract, "wrong coefficient count");
    std::vector<std::uint64_t> c(values.size());
    const auto q = static_cast<std::int64_t>(params->q());
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::int64_t v = values[i] % q;
      c[i] = static_cast<std::uint64_t>(v < 0 ? v + q : v);
    }
    return from_coeffs(std::move(params), std::move(c));
  }

  const RingParamsPtr& params() const { return params_; }
  const RingParams& ring() const { return *params_; }
  std::size_t size() const { return coeffs_.size(); }
  PolyDomain domain() const { return domain_; }
  std::span<const std::uint64_t> coeffs() const { return coeffs_; }
  std::uint64_t operator[](std::size_t i) const { return coeffs_[i]; }

  // Mutable access for in-module kernels; callers must keep values < q.
  std::vector<std::uint64_t>& mutable_coeffs() { return coeffs_; }

  friend bool operator==(const RingPoly& a, const RingPoly& b) {
    if (a.params_ == nullptr || b.params_ == nullptr) return a.params_ == b.params_;
    return a.params_->same_ring(*b.params_) && a.domain_ == b.domain_ && a.coeffs_ == b.coeffs_;
  }

 private:
  RingParamsPtr params_;
  std::vector<std::uint64_t> coeffs_;
  PolyDomain domain_ = PolyDomain::kCoefficient;
};

namespace detail {

inline void check_compatible(const RingPoly& a, const RingPoly& b, const char* op) {
  require(a.params() && b.params() && a.ring().same_ring(b.ring()), ErrorKind::kContract,
          std::string(op) + ": ring parameters differ");
  require(a.domain() == b.domain(), ErrorKind::kContract,
          std::string(op) + ": domain tags differ");
}

}  // namespace detail

inline RingPoly ntt_forward(const RingPoly& p) {
  require(p.domain() == PolyDomain::kCoefficient, ErrorKind::kContract,
          "ntt_forward expects a coefficient-domain polynomial");
  std::vector<std::uint64_t> c(p.coeffs().begin(), p.coeffs().end());
  p.ring().forward(c);
  return RingPoly::from_coeffs(p.params(), std::move(c), PolyDomain::kNtt);
}

inline RingPoly ntt_inverse(const RingPoly& p) {
  require(p.domain() == PolyDomain::kNtt, ErrorKind::kContract,
          "ntt_inverse expects an NTT-domain polynomial");
  std::vector<std::uint64_t> c(p.coeffs().begin(), p.coeffs().end());
  p.ring().inverse(c);
  return RingPoly::from_coeffs(p.params(), std::move(c), PolyDomain::kCoefficient);
}

inline RingPoly poly_add(const RingPoly& a, const RingPoly& b) {
  detail::check_compatible(a, b, "poly_add");
  const std::uint64_t q = a.ring().q();
  RingPoly r = RingPoly::zero(a.params(), a.domain());
  auto& out = r.mutable_coeffs();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint64_t s = a[i] + b[i];
    out[i] = s >= q ? s - q : s;
  }
  return r;
}

inline RingPoly poly_sub(const RingPoly& a, const RingPoly& b) {
  detail::check_compatible(a, b, "poly_sub");
  const std::uint64_t q = a.ring().q();
  RingPoly r = RingPoly::zero(a.params(), a.domain());
  auto& out = r.mutable_coeffs();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a[i] >= b[i] ? a[i] - b[i] : a[i] + q - b[i];
  }
  return r;
}

inline RingPoly poly_neg(const RingPoly& a) {
  const std::uint64_t q = a.ring().q();
  RingPoly r = RingPoly::zero(a.params(), a.domain());
  auto& out = r.mutable_coeffs();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] == 0 ? 0 : q - a[i];
  return r;
}

/// Negacyclic product. Two coefficient-domain inputs go through the
/// transform; two NTT-domain inputs are multiplied slot-wise.
inline RingPoly poly_mul(const RingPoly& a, const RingPoly& b) {
  detail::check_compatible(a, b, "poly_mul");
  const RingParams& ring = a.ring();
  const std::uint64_t q = ring.q();
  std::vector<std::uint64_t> x(a.coeffs().begin(), a.coeffs().end());
  std::vector<std::uint64_t> y(b.coeffs().begin(), b.coeffs().end());
  const bool in_coeff = a.domain() == PolyDomain::kCoefficient;
  if (in_coeff) {
    ring.forward(x);
    ring.forward(y);
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = detail::mul_mod(x[i], y[i], q);
  if (in_coeff) ring.inverse(x);
  return RingPoly::from_coeffs(a.params(), std::move(x), a.domain());
}

/// Uniform element of R_q.
inline RingPoly sample_uniform(const RingParamsPtr& params, ChaChaStream& rng) {
  RingPoly r = RingPoly::zero(params);
  for (auto& c : r.mutable_coeffs()) c = rng.uniform_below(params->q());
  return r;
}

/// Key distribution: coefficients uniform over {-1, 0, 1}.
inline RingPoly sample_ternary(const RingParamsPtr& params, ChaChaStream& rng) {
  RingPoly r = RingPoly::zero(params);
  const std::uint64_t q = params->q();
  for (auto& c : r.mutable_coeffs()) {
    const std::uint64_t t = rng.uniform_below(3);
    c = t == 0 ? q - 1 : t - 1;
  }
  return r;
}

/// Centered binomial with eta = 2: support [-2, 2], variance 1.
inline constexpr int kErrorEta = 2;

inline RingPoly sample_error(const RingParamsPtr& params, ChaChaStream& rng) {
  RingPoly r = RingPoly::zero(params);
  const std::uint64_t q = params->q();
  std::uint64_t bits = 0;
  int available = 0;
  for (auto& c : r.mutable_coeffs()) {
    if (available < 4) {
      bits = rng.next_u64();
      available = 64;
    }
    const int a = static_cast<int>((bits & 1) + ((bits >> 1) & 1));
    const int b = static_cast<int>(((bits >> 2) & 1) + ((bits >> 3) & 1));
    bits >>= 4;
    available -= 4;
    const int v = a - b;
    c = v >= 0 ? static_cast<std::uint64_t>(v) : q - static_cast<std::uint64_t>(-v);
  }
  return r;
}

/// Centered representative of a residue, in (-q/2, q/2].
inline std::int64_t centered(std::uint64_t c, std::uint64_t q) {
  return c > q / 2 ? -static_cast<std::int64_t>(q - c) : static_cast<std::int64_t>(c);
}

inline std::uint64_t infinity_norm(const RingPoly& p) {
  std::uint64_t m = 0;
  for (std::uint64_t c : p.coeffs()) {
    const std::int64_t v = centered(c, p.ring().q());
    const auto a = static_cast<std::uint64_t>(v < 0 ? -v : v);
    if (a > m) m = a;
  }
  return m;
}

}  // namespace fcdf

#endif  // FCDF_RING_HPP_
