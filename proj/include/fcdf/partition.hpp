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

#ifndef FCDF_PARTITION_HPP_
#define FCDF_PARTITION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "fcdf/ecdf.hpp"
#include "fcdf/error.hpp"
#include "fcdf/random.hpp"

namespace fcdf {

struct PartitionSpec {
  std::uint32_t k = 4;
  double beta = 0.1;            // Dirichlet concentration for label skew
  double skew_fraction = 0.75;  // share of each client's data from its class pool
  std::size_t per_client_size = 300;
  std::uint64_t seed = 0;
  bool shared_pool = false;     // all clients draw from one pool (IID baseline)

  void validate() const {
    require(k >= 1, ErrorKind::kValidation, "k must be at least 1");
    require(beta > 0.0 && std::isfinite(beta), ErrorKind::kValidation, "beta must be positive");
    require(skew_fraction >= 0.0 && skew_fraction <= 1.0, ErrorKind::kValidation,
            "skew fraction must be in [0, 1]");
    require(per_client_size >= 1, ErrorKind::kValidation, "per-client size must be at least 1");
  }
};

struct Partition {
  std::vector<Dataset> clients;
  std::vector<std::vector<std::size_t>> rows;  // source row indices per client
};

namespace detail {

inline void shuffle(std::vector<std::size_t>& v, ChaChaStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Rows grouped by class, classes in ascending order.
inline std::map<std::int64_t, std::vector<std::size_t>> rows_by_class(const Dataset& d) {
  std::map<std::int64_t, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < d.size(); ++i) by[d.class_of(i)].push_back(i);
  return by;
}

inline Partition materialize(const Dataset& source, std::vector<std::vector<std::size_t>> rows) {
  Partition p;
  for (std::uint32_t i = 0; i < rows.size(); ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    p.clients.push_back(source.subset(rows[i], i));
  }
  p.rows = std::move(rows);
  return p;
}

}  // namespace detail

/// Proportions over k clients from a symmetric Dirichlet(beta), via
/// normalized Gamma(beta, 1) draws.
inline std::vector<double> sample_dirichlet(std::size_t k, double beta, ChaChaStream& rng) {
  boost::random::gamma_distribution<double> gamma(beta, 1.0);
  std::vector<double> p(k);
  double total = 0.0;
  // Small beta can underflow every draw to zero; redraw in that case.
  while (total <= 0.0) {
    total = 0.0;
    for (auto& x : p) {
      x = gamma(rng);
      total += x;
    }
  }
  for (auto& x : p) x /= total;
  return p;
}

/// Integer counts summing exactly to `total`, by largest remainder
/// (ties go to the lower index).
inline std::vector<std::size_t> largest_remainder(std::span<const double> shares,
                                                  std::size_t total) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> rem(shares.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem[i] = {exact - std::floor(exact), i};
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[rem[r % rem.size()].second];
  return counts;
}

/// Label skew: each class is spread over the k clients with Dirichlet(beta)
/// proportions. The output is a disjoint cover of the input; clients may
/// come out empty.
inline Partition dirichlet_label_partition(const Dataset& data, const PartitionSpec& spec) {
  spec.validate();
  ChaChaStream rng(spec.seed, 0x4c41424cULL);
  std::vector<std::vector<std::size_t>> rows(spec.k);
  for (auto& [cls, members] : detail::rows_by_class(data)) {
    const std::vector<double> shares = sample_dirichlet(spec.k, spec.beta, rng);
    const std::vector<std::size_t> counts = largest_remainder(shares, members.size());
    detail::shuffle(members, rng);
    std::size_t at = 0;
    for (std::uint32_t c = 0; c < spec.k; ++c) {
      rows[c].insert(rows[c].end(), members.begin() + static_cast<std::ptrdiff_t>(at),
                     members.begin() + static_cast<std::ptrdiff_t>(at + counts[c]));
      at += counts[c];
    }
  }
  return detail::materialize(data, std::move(rows));
}

/// Feature skew: classes are dealt into k disjoint pools (one shared pool
/// when spec.shared_pool). Each client takes round(skew_fraction * size)
/// rows from its pool, spread evenly over the pool's classes, and fills the
/// rest uniformly from classes outside the pool. Rows are never reused.
inline Partition feature_skew_partition(const Dataset& data, const PartitionSpec& spec) {
  spec.validate();
  auto by_class = detail::rows_by_class(data);
  std::vector<std::int64_t> classes;
  for (const auto& [cls, members] : by_class) classes.push_back(cls);
  const std::size_t pools = spec.shared_pool ? 1 : spec.k;
  require(classes.size() >= pools + (spec.skew_fraction < 1.0 ? 1 : 0), ErrorKind::kPartition,
          "need more classes than class pools");

  ChaChaStream rng(spec.seed, 0x46534b57ULL);
  for (auto& [cls, members] : by_class) detail::shuffle(members, rng);
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), 0);
  detail::shuffle(order, rng);

  // With a shared pool it has the size of one per-client pool. A single
  // pool keeps at least one class outside it when out-of-pool rows are due.
  std::size_t pool_size = std::max<std::size_t>(1, classes.size() / spec.k);
  if (spec.skew_fraction < 1.0) pool_size = std::min(pool_size, classes.size() - 1);
  const std::size_t pooled = pools == 1 ? pool_size : classes.size();
  std::vector<std::vector<std::int64_t>> pool(pools);
  for (std::size_t i = 0; i < pooled; ++i) pool[i % pools].push_back(classes[order[i]]);
  for (auto& p : pool) std::sort(p.begin(), p.end());

  std::map<std::int64_t, std::size_t> cursor;  // next unused row per class
  auto take = [&](std::int64_t cls, std::size_t count, std::vector<std::size_t>& out) {
    auto& members = by_class.at(cls);
    std::size_t& at = cursor[cls];
    if (members.size() - at < count) {
      fail(ErrorKind::kPartition, "class " + std::to_string(cls) + " has " +
                                      std::to_string(members.size() - at) + " unused samples, " +
                                      std::to_string(count) + " needed");
    }
    out.insert(out.end(), members.begin() + static_cast<std::ptrdiff_t>(at),
               members.begin() + static_cast<std::ptrdiff_t>(at + count));
    at += count;
  };

  const auto in_pool = static_cast<std::size_t>(
      std::nearbyint(spec.skew_fraction * static_cast<double>(spec.per_client_size)));
  const std::size_t out_pool = spec.per_client_size - in_pool;
  std::vector<std::vector<std::size_t>> rows(spec.k);

  for (std::uint32_t c = 0; c < spec.k; ++c) {
    const auto& mine = pool[spec.shared_pool ? 0 : c];
    const std::vector<double> even(mine.size(), 1.0 / static_cast<double>(mine.size()));
    const std::vector<std::size_t> quota = largest_remainder(even, in_pool);
    for (std::size_t i = 0; i < mine.size(); ++i) take(mine[i], quota[i], rows[c]);
  }
  for (std::uint32_t c = 0; c < spec.k; ++c) {
    const auto& mine = pool[spec.shared_pool ? 0 : c];
    std::vector<std::size_t> candidates;
    for (std::int64_t cls : classes) {
      if (std::binary_search(mine.begin(), mine.end(), cls)) continue;
      const auto& members = by_class.at(cls);
      candidates.insert(candidates.end(),
                        members.begin() + static_cast<std::ptrdiff_t>(cursor[cls]), members.end());
    }
    if (candidates.size() < out_pool) {
      fail(ErrorKind::kPartition, "client " + std::to_string(c) + " needs " +
                                      std::to_string(out_pool) + " out-of-pool samples, only " +
                                      std::to_string(candidates.size()) + " remain");
    }
    detail::shuffle(candidates, rng);
    candidates.resize(out_pool);
    for (std::size_t r : candidates) {
      const std::int64_t cls = data.class_of(r);
      // Keep per-class cursors consistent: move the chosen row to the cursor.
      auto& members = by_class.at(cls);
      std::size_t& at = cursor[cls];
      auto it = std::find(members.begin() + static_cast<std::ptrdiff_t>(at), members.end(), r);
      std::iter_swap(members.begin() + static_cast<std::ptrdiff_t>(at), it);
      ++at;
      rows[c].push_back(r);
    }
  }
  return detail::materialize(data, std::move(rows));
}

/// Balanced synthetic labels: `per_class` copies of each of 0..classes-1.
inline Dataset synth_labels(std::size_t classes, std::size_t per_class) {
  require(classes >= 1 && per_class >= 1, ErrorKind::kValidation,
          "class count and per-class count must be at least 1");
  std::vector<std::int64_t> labels;
  labels.reserve(classes * per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    labels.insert(labels.end(), per_class, static_cast<std::int64_t>(c));
  }
  return Dataset::from_labels(std::move(labels));
}

/// Gaussian blobs standing in for extracted image features. Class c has a
/// mean drawn once from [-separation, separation]^dims and unit-variance
/// coordinates. Rows are ordered by class.
inline Dataset synth_features(std::size_t classes, std::size_t dims, std::size_t per_class,
                              double separation, std::uint64_t seed) {
  require(classes >= 1 && dims >= 1 && per_class >= 1, ErrorKind::kValidation,
          "class count, dimensions and per-class count must be at least 1");
  require(separation >= 0.0 && std::isfinite(separation), ErrorKind::kValidation,
          "separation must be finite and non-negative");
  ChaChaStream rng(seed, 0x53594e54ULL);
  boost::random::uniform_real_distribution<double> box(-1.0, 1.0);
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> means(classes * dims);
  for (auto& m : means) m = separation * box(rng);
  std::vector<double> values;
  std::vector<std::int64_t> ids;
  values.reserve(classes * per_class * dims);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t d = 0; d < dims; ++d) values.push_back(means[c * dims + d] + unit(rng));
      ids.push_back(static_cast<std::int64_t>(c));
    }
  }
  return Dataset::from_features(std::move(values), dims, std::move(ids));
}

/// "client_id: row row row ..." per line.
inline std::string partition_manifest(const Partition& p) {
  std::string out;
  for (std::size_t c = 0; c < p.rows.size(); ++c) {
    out += std::to_string(c) + ":";
    for (std::size_t r : p.rows[c]) out += " " + std::to_string(r);
    out += "\n";
  }
  return out;
}

}  // namespace fcdf

#endif  // FCDF_PARTITION_HPP_
