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

#ifndef FCDF_ECDF_HPP_
#define FCDF_ECDF_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcdf/error.hpp"

namespace fcdf {

enum class DataKind : std::uint8_t { kLabels = 1, kFeatures = 2 };

inline std::string to_string(DataKind kind) {
  return kind == DataKind::kLabels ? "labels" : "features";
}

/// One client's local data: integer labels, or d-dimensional feature rows
/// (row-major) with an optional class id per row.
class Dataset {
 public:
  Dataset() = default;

  static Dataset from_labels(std::vector<std::int64_t> labels, std::uint32_t client_id = 0) {
    Dataset d;
    d.kind_ = DataKind::kLabels;
    d.labels_ = std::move(labels);
    d.client_id_ = client_id;
    return d;
  }

  static Dataset from_features(std::vector<double> values, std::size_t dims,
                               std::vector<std::int64_t> classes = {},
                               std::uint32_t client_id = 0) {
    require(dims >= 1, ErrorKind::kValidation, "feature dimension must be at least 1");
    require(values.size() % dims == 0, ErrorKind::kValidation,
            "feature rows do not all have dimension " + std::to_string(dims));
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(!std::isnan(values[i]), ErrorKind::kValidation,
              "NaN feature in row " + std::to_string(i / dims));
    }
    require(classes.empty() || classes.size() == values.size() / dims, ErrorKind::kValidation,
            "class id count differs from row count");
    Dataset d;
    d.kind_ = DataKind::kFeatures;
    d.features_ = std::move(values);
    d.dims_ = dims;
    d.classes_ = std::move(classes);
    d.client_id_ = client_id;
    return d;
  }

  DataKind kind() const { return kind_; }
  std::uint32_t client_id() const { return client_id_; }
  void set_client_id(std::uint32_t id) { client_id_ = id; }

  std::size_t size() const {
    return kind_ == DataKind::kLabels ? labels_.size() : features_.size() / dims_;
  }
  bool empty() const { return size() == 0; }
  std::size_t dims() const { return kind_ == DataKind::kLabels ? 1 : dims_; }

  std::span<const std::int64_t> labels() const { return labels_; }
  std::span<const double> features() const { return features_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * dims_, dims_);
  }
  std::span<const std::int64_t> classes() const { return classes_; }

  // Class of a sample: the label itself, or the feature row's class id.
  std::int64_t class_of(std::size_t i) const {
    return kind_ == DataKind::kLabels ? labels_[i] : classes_.at(i);
  }

  // Column d as a vector (labels converted to double).
  std::vector<double> column(std::size_t d) const {
    std::vector<double> out(size());
    if (kind_ == DataKind::kLabels) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(labels_[i]);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = features_[i * dims_ + d];
    }
    return out;
  }

  // Rows picked by index, in the order given.
  Dataset subset(std::span<const std::size_t> rows, std::uint32_t client_id) const {
    if (kind_ == DataKind::kLabels) {
      std::vector<std::int64_t> l;
      l.reserve(rows.size());
      for (std::size_t r : rows) l.push_back(labels_.at(r));
      return from_labels(std::move(l), client_id);
    }
    std::vector<double> f;
    std::vector<std::int64_t> c;
    f.reserve(rows.size() * dims_);
    for (std::size_t r : rows) {
      auto src = row(r);
      f.insert(f.end(), src.begin(), src.end());
      if (!classes_.empty()) c.push_back(classes_.at(r));
    }
    return from_features(std::move(f), dims_, std::move(c), client_id);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  DataKind kind_ = DataKind::kLabels;
  std::uint32_t client_id_ = 0;
  std::vector<std::int64_t> labels_;
  std::vector<double> features_;
  std::size_t dims_ = 1;
  std::vector<std::int64_t> classes_;
};

/// What a client reveals about its domain: the distinct labels it holds,
/// or a (min, max) range per feature dimension.
struct DomainSummary {
  DataKind kind = DataKind::kLabels;
  std::vector<std::int64_t> labels;
  std::vector<std::pair<double, double>> ranges;

  std::size_t dims() const { return kind == DataKind::kLabels ? 1 : ranges.size(); }
  friend bool operator==(const DomainSummary&, const DomainSummary&) = default;
};

/// Shared evaluation grid, one strictly increasing grid per dimension.
struct DistributionPolicy {
  DataKind kind = DataKind::kLabels;
  std::vector<std::vector<double>> grids;

  std::size_t dims() const { return grids.size(); }
  std::size_t total_points() const {
    std::size_t t = 0;
    for (const auto& g : grids) t += g.size();
    return t;
  }

  void validate() const {
    require(!grids.empty(), ErrorKind::kPolicy, "policy has no dimensions");
    require(kind == DataKind::kFeatures || grids.size() == 1, ErrorKind::kPolicy,
            "label policy must have exactly one dimension");
    for (const auto& g : grids) {
      require(!g.empty(), ErrorKind::kPolicy, "policy grid is empty");
      for (std::size_t j = 0; j < g.size(); ++j) {
        require(std::isfinite(g[j]), ErrorKind::kPolicy, "policy grid point is not finite");
        if (j > 0) {
          require(g[j - 1] < g[j], ErrorKind::kPolicy, "policy grid not strictly increasing");
        }
        if (kind == DataKind::kLabels) {
          require(g[j] == std::floor(g[j]), ErrorKind::kPolicy, "label policy holds a non-integer");
        }
      }
    }
  }

  friend bool operator==(const DistributionPolicy&, const DistributionPolicy&) = default;
};

/// Cumulative probabilities on a policy grid, values[d][j] = F_d(x_j).
///
/// Local eCDFs carry their sample count; aggregated (central) CDFs carry
/// the number of clients averaged instead and are no longer multiples of
/// 1/n. Construction checks the monotone-in-[0,1] invariant.
class Ecdf {
 public:
  Ecdf() = default;

  static Ecdf make(DistributionPolicy policy, std::vector<std::vector<double>> values,
                   std::uint64_t sample_count) {
    require(values.size() == policy.grids.size(), ErrorKind::kContract,
            "eCDF dimension count differs from policy");
    for (std::size_t d = 0; d < values.size(); ++d) {
      require(values[d].size() == policy.grids[d].size(), ErrorKind::kContract,
              "eCDF length differs from policy grid in dimension " + std::to_string(d));
      double prev = 0.0;
      for (double v : values[d]) {
        require(v >= 0.0 && v <= 1.0, ErrorKind::kContract, "CDF value outside [0, 1]");
        require(v >= prev, ErrorKind::kContract, "CDF is not monotone");
        prev = v;
      }
    }
    Ecdf e;
    e.policy_ = std::move(policy);
    e.values_ = std::move(values);
    e.sample_count_ = sample_count;
    return e;
  }

  // Inverse of flatten(): splits a concatenated vector by grid sizes.
  static Ecdf from_flat(DistributionPolicy policy, std::span<const double> flat,
                        std::uint64_t sample_count) {
    require(flat.size() >= policy.total_points(), ErrorKind::kContract,
            "flat CDF vector shorter than policy");
    std::vector<std::vector<double>> values;
    std::size_t at = 0;
    for (const auto& g : policy.grids) {
      values.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(at),
                          flat.begin() + static_cast<std::ptrdiff_t>(at + g.size()));
      at += g.size();
    }
    return make(std::move(policy), std::move(values), sample_count);
  }

  const DistributionPolicy& policy() const { return policy_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  const std::vector<double>& dimension(std::size_t d) const { return values_.at(d); }
  std::size_t dims() const { return values_.size(); }
  std::uint64_t sample_count() const { return sample_count_; }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    for (const auto& v : values_) flat.insert(flat.end(), v.begin(), v.end());
    return flat;
  }

  friend bool operator==(const Ecdf&, const Ecdf&) = default;

 private:
  DistributionPolicy policy_;
  std::vector<std::vector<double>> values_;
  std::uint64_t sample_count_ = 0;
};

inline constexpr std::size_t kDefaultGridSize = 100;

inline DomainSummary local_domain(const Dataset& d) {
  require(!d.empty(), ErrorKind::kValidation, "dataset is empty");
  DomainSummary s;
  s.kind = d.kind();
  if (d.kind() == DataKind::kLabels) {
    s.labels.assign(d.labels().begin(), d.labels().end());
    std::sort(s.labels.begin(), s.labels.end());
    s.labels.erase(std::unique(s.labels.begin(), s.labels.end()), s.labels.end());
    return s;
  }
  for (std::size_t dim = 0; dim < d.dims(); ++dim) {
    const std::vector<double> col = d.column(dim);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    s.ranges.emplace_back(*lo, *hi);
  }
  return s;
}

// G points from lo to hi inclusive; a single point when lo == hi.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (lo == hi || count == 1) return {lo};
  std::vector<double> g(count);
  const double span = hi - lo;
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + span * (static_cast<double>(i) / last);
  g.back() = hi;
  return g;
}

/// Server-side union of client domains into one evaluation policy.
inline DistributionPolicy merge_domains(std::span<const DomainSummary> summaries,
                                        std::size_t grid_size = kDefaultGridSize) {
  require(!summaries.empty(), ErrorKind::kPolicy, "no domain summaries to merge");
  require(grid_size >= 1, ErrorKind::kValidation, "grid size must be at least 1");
  const DomainSummary& first = summaries.front();
  for (const auto& s : summaries) {
    require(s.kind == first.kind, ErrorKind::kPolicy, "clients disagree on data kind");
    require(s.dims() == first.dims(), ErrorKind::kPolicy, "clients disagree on dimension");
  }
  DistributionPolicy policy;
  policy.kind = first.kind;
  if (first.kind == DataKind::kLabels) {
    std::vector<std::int64_t> all;
    for (const auto& s : summaries) all.insert(all.end(), s.labels.begin(), s.labels.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    require(!all.empty(), ErrorKind::kPolicy, "label union is empty");
    std::vector<double> grid(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) grid[i] = static_cast<double>(all[i]);
    policy.grids.push_back(std::move(grid));
  } else {
    require(first.dims() >= 1, ErrorKind::kPolicy, "feature summary has no dimensions");
    for (std::size_t d = 0; d < first.dims(); ++d) {
      double lo = first.ranges[d].first;
      double hi = first.ranges[d].second;
      for (const auto& s : summaries) {
        require(s.ranges[d].first <= s.ranges[d].second, ErrorKind::kPolicy, "inverted range");
        lo = std::min(lo, s.ranges[d].first);
        hi = std::max(hi, s.ranges[d].second);
      }
      require(std::isfinite(lo) && std::isfinite(hi), ErrorKind::kPolicy, "non-finite range");
      policy.grids.push_back(linspace(lo, hi, grid_size));
    }
  }
  policy.validate();
  return policy;
}

// Summary that reproduces `policy` under merge_domains with the same grid size.
inline DomainSummary policy_domain(const DistributionPolicy& policy) {
  DomainSummary s;
  s.kind = policy.kind;
  if (policy.kind == DataKind::kLabels) {
    for (double x : policy.grids.front()) s.labels.push_back(static_cast<std::int64_t>(x));
  } else {
    for (const auto& g : policy.grids) s.ranges.emplace_back(g.front(), g.back());
  }
  return s;
}

/// F_j = #{samples <= x_j} / n for every grid point in every dimension.
inline Ecdf ecdf_eval(const Dataset& d, const DistributionPolicy& policy) {
  require(!d.empty(), ErrorKind::kValidation, "dataset is empty");
  require(d.kind() == policy.kind, ErrorKind::kPolicy,
          "dataset holds " + to_string(d.kind()) + " but policy is for " + to_string(policy.kind));
  require(d.dims() == policy.dims(), ErrorKind::kPolicy, "dataset dimension differs from policy");
  const double n = static_cast<double>(d.size());
  std::vector<std::vector<double>> values(policy.dims());
  for (std::size_t dim = 0; dim < policy.dims(); ++dim) {
    std::vector<double> col = d.column(dim);
    std::sort(col.begin(), col.end());
    const auto& grid = policy.grids[dim];
    values[dim].resize(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto count = std::upper_bound(col.begin(), col.end(), grid[j]) - col.begin();
      values[dim][j] = static_cast<double>(count) / n;
    }
  }
  return Ecdf::make(policy, std::move(values), d.size());
}

/// Per-point probability mass: first differences of the CDF.
inline std::vector<std::vector<double>> pdf_from_cdf(const Ecdf& e) {
  std::vector<std::vector<double>> pdf(e.dims());
  for (std::size_t d = 0; d < e.dims(); ++d) {
    const auto& f = e.dimension(d);
    pdf[d].resize(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) pdf[d][j] = j == 0 ? f[0] : f[j] - f[j - 1];
  }
  return pdf;
}

/// Pointwise mean; the plaintext counterpart of the encrypted aggregation.
inline Ecdf average_cdfs(std::span<const Ecdf> cdfs) {
  require(!cdfs.empty(), ErrorKind::kContract, "average of no CDFs");
  const DistributionPolicy& policy = cdfs.front().policy();
  for (const auto& e : cdfs) {
    require(e.policy() == policy, ErrorKind::kContract, "CDFs were evaluated on different policies");
  }
  const double k = static_cast<double>(cdfs.size());
  std::vector<std::vector<double>> mean(policy.dims());
  for (std::size_t d = 0; d < policy.dims(); ++d) {
    mean[d].assign(policy.grids[d].size(), 0.0);
    for (std::size_t j = 0; j < mean[d].size(); ++j) {
      double s = 0.0;
      for (const auto& e : cdfs) s += e.dimension(d)[j];
      mean[d][j] = std::min(1.0, s / k);
    }
  }
  return Ecdf::make(policy, std::move(mean), cdfs.size());
}

}  // namespace fcdf

#endif  // FCDF_ECDF_HPP_
