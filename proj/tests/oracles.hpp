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

// Slow, obviously-correct reference implementations used only by tests.

#ifndef FCDF_TESTS_ORACLES_HPP_
#define FCDF_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fcdf/ecdf.hpp"

namespace fcdf::oracle {

__extension__ typedef unsigned __int128 wide;

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
  return static_cast<std::uint64_t>(static_cast<wide>(a) * b % q);
}

inline std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t q) {
  std::uint64_t r = 1 % q;
  for (b %= q; e; e >>= 1, b = mulmod(b, b, q)) {
    if (e & 1) r = mulmod(r, b, q);
  }
  return r;
}

// O(n^2) product in Z_q[X]/(X^n + 1).
inline std::vector<std::uint64_t> schoolbook_negacyclic(const std::vector<std::uint64_t>& a,
                                                        const std::vector<std::uint64_t>& b,
                                                        std::uint64_t q) {
  const std::size_t n = a.size();
  std::vector<std::uint64_t> c(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t t = mulmod(a[i], b[j], q);
      const std::size_t k = i + j;
      if (k < n) {
        c[k] = (c[k] + t) % q;
      } else {
        c[k - n] = (c[k - n] + q - t) % q;
      }
    }
  }
  return c;
}

// Evaluations a(psi^(2i+1)) for i = 0..n-1, in natural order.
inline std::vector<std::uint64_t> naive_negacyclic_dft(const std::vector<std::uint64_t>& a,
                                                       std::uint64_t psi, std::uint64_t q) {
  const std::size_t n = a.size();
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t x = powmod(psi, 2 * i + 1, q);
    std::uint64_t acc = 0;
    std::uint64_t xp = 1;
    for (std::size_t j = 0; j < n; ++j) {
      acc = (acc + mulmod(a[j], xp, q)) % q;
      xp = mulmod(xp, x, q);
    }
    out[i] = acc;
  }
  return out;
}

// F_j = #{v <= x_j} / n by direct counting, O(nG).
inline std::vector<double> counting_ecdf(const std::vector<double>& samples,
                                         const std::vector<double>& grid) {
  std::vector<double> f(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::size_t count = 0;
    for (double v : samples) count += v <= grid[j] ? 1 : 0;
    f[j] = static_cast<double>(count) / static_cast<double>(samples.size());
  }
  return f;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Random monotone CDF on G points ending at 1.
inline std::vector<double> random_cdf(std::size_t g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(g);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  v.back() = 1.0;
  return v;
}

}  // namespace fcdf::oracle

#endif  // FCDF_TESTS_ORACLES_HPP_
