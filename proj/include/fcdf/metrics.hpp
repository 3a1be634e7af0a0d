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

#ifndef FCDF_METRICS_HPP_
#define FCDF_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fcdf/dataset_io.hpp"
#include "fcdf/ecdf.hpp"
#include "fcdf/error.hpp"

namespace fcdf {

namespace detail {

inline void check_same_policy(const Ecdf& a, const Ecdf& b) {
  require(a.policy() == b.policy(), ErrorKind::kContract, "CDFs live on different policies");
}

}  // namespace detail

/// Sup-norm distance on the shared grid, maximized over all dimensions.
inline double ks_distance(const Ecdf& local, const Ecdf& central) {
  detail::check_same_policy(local, central);
  double worst = 0.0;
  for (std::size_t d = 0; d < local.dims(); ++d) {
    for (std::size_t j = 0; j < local.dimension(d).size(); ++j) {
      worst = std::max(worst, std::fabs(local.dimension(d)[j] - central.dimension(d)[j]));
    }
  }
  return worst;
}

inline double ks_distance(const Ecdf& local, const Ecdf& central, std::size_t dim) {
  detail::check_same_policy(local, central);
  double worst = 0.0;
  const auto& a = local.dimension(dim);
  const auto& b = central.dimension(dim);
  for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::fabs(a[j] - b[j]));
  return worst;
}

/// Mean absolute distance over the grid points of one dimension.
inline double l1_distance(const Ecdf& local, const Ecdf& central, std::size_t dim) {
  detail::check_same_policy(local, central);
  const auto& a = local.dimension(dim);
  const auto& b = central.dimension(dim);
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += std::fabs(a[j] - b[j]);
  return sum / static_cast<double>(a.size());
}

// Mean over all grid points of all dimensions.
inline double l1_distance(const Ecdf& local, const Ecdf& central) {
  detail::check_same_policy(local, central);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t d = 0; d < local.dims(); ++d) {
    for (std::size_t j = 0; j < local.dimension(d).size(); ++j) {
      sum += std::fabs(local.dimension(d)[j] - central.dimension(d)[j]);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

/// Share of the federation's labels that the client holds at all.
inline double label_coverage(const Ecdf& local, const Ecdf& central) {
  detail::check_same_policy(local, central);
  require(local.policy().kind == DataKind::kLabels, ErrorKind::kContract,
          "label coverage needs a label policy");
  const auto pdf = pdf_from_cdf(local);
  const auto present = std::count_if(pdf[0].begin(), pdf[0].end(), [](double p) { return p > 0.0; });
  return static_cast<double>(present) / static_cast<double>(pdf[0].size());
}

/// Of the grid cells where the central distribution has mass, the fraction
/// where the local one does too. Equals label_coverage on label policies.
inline double support_coverage(const Ecdf& local, const Ecdf& central, std::size_t dim) {
  detail::check_same_policy(local, central);
  const auto lp = pdf_from_cdf(local);
  const auto cp = pdf_from_cdf(central);
  std::size_t support = 0;
  std::size_t shared = 0;
  for (std::size_t j = 0; j < cp[dim].size(); ++j) {
    if (cp[dim][j] <= 0.0) continue;
    ++support;
    if (lp[dim][j] > 0.0) ++shared;
  }
  return support == 0 ? 1.0 : static_cast<double>(shared) / static_cast<double>(support);
}

struct ReportRow {
  std::uint32_t client_id = 0;
  std::size_t dimension = 0;
  double ks = 0.0;
  double l1 = 0.0;
  double coverage = 0.0;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct RunMetadata {
  DataKind kind = DataKind::kLabels;
  std::uint32_t k = 0;
  std::size_t policy_size = 0;
  std::uint64_t seed = 0;
  std::uint32_t n = 0;
  std::uint64_t q = 0;
  int scale_bits = 0;
  int plain_modulus_bits = 0;
};

/// Per-client, per-dimension divergences plus the curves they came from.
struct NonIidReport {
  RunMetadata meta;
  std::vector<ReportRow> rows;
  Ecdf central;
  std::map<std::uint32_t, Ecdf> locals;
};

inline std::vector<ReportRow> score_client(std::uint32_t client_id, const Ecdf& local,
                                           const Ecdf& central) {
  std::vector<ReportRow> rows;
  for (std::size_t d = 0; d < local.dims(); ++d) {
    rows.push_back({client_id, d, ks_distance(local, central, d), l1_distance(local, central, d),
                    support_coverage(local, central, d)});
  }
  return rows;
}

/// Rows ordered by client id, then dimension.
inline NonIidReport build_report(RunMetadata meta, std::map<std::uint32_t, Ecdf> locals,
                                 Ecdf central) {
  NonIidReport r;
  r.meta = meta;
  for (const auto& [id, local] : locals) {
    const auto rows = score_client(id, local, central);
    r.rows.insert(r.rows.end(), rows.begin(), rows.end());
  }
  r.locals = std::move(locals);
  r.central = std::move(central);
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                             "#bcbd22", "#17becf"};

}  // namespace detail

inline std::string render_csv(const NonIidReport& r) {
  std::string out = "client_id,dimension,ks,l1,coverage\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.client_id) + "," + std::to_string(row.dimension) + "," +
           detail::fixed6(row.ks) + "," + detail::fixed6(row.l1) + "," +
           detail::fixed6(row.coverage) + "\n";
  }
  return out;
}

inline std::string render_text(const NonIidReport& r) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %-9s %-10s %-10s %-10s\n", "client", "dimension", "ks",
                "l1", "coverage");
  out += buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-8u %-9zu %-10.6f %-10.6f %-10.6f\n", row.client_id,
                  row.dimension, row.ks, row.l1, row.coverage);
    out += buf;
  }
  return out;
}

/// 800x500 chart for one dimension: each local CDF as a step function, the
/// central CDF as a dashed polyline, and a legend.
inline std::string render_svg(const NonIidReport& r, std::size_t dim) {
  constexpr double kWidth = 800, kHeight = 500;
  constexpr double kLeft = 60, kRight = 160, kTop = 40, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto& grid = r.central.policy().grids.at(dim);
  double lo = grid.front();
  double hi = grid.back();
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto px = [&](double x) { return detail::fixed2(kLeft + (x - lo) / (hi - lo) * plot_w); };
  auto py = [&](double y) { return detail::fixed2(kTop + (1.0 - y) * plot_h); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
       "viewBox=\"0 0 800 500\">\n";
  s << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  s << "  <text x=\"" << detail::fixed2(kLeft) << "\" y=\"24\" font-family=\"sans-serif\" "
       "font-size=\"16\">"
    << detail::xml_escape((r.central.policy().kind == DataKind::kLabels ? "Label CDF"
                                                                        : "Feature dimension " +
                                                                              std::to_string(dim)) +
                          " (k=" + std::to_string(r.meta.k) + ")")
    << "</text>\n";
  s << "  <path d=\"M " << px(lo) << " " << py(0) << " H " << px(hi) << " M " << px(lo) << " "
    << py(0) << " V " << py(1) << "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = t / 4.0;
    s << "  <text x=\"" << detail::fixed2(kLeft - 8) << "\" y=\"" << py(y)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
      << detail::fixed2(y) << "</text>\n";
  }
  s << "  <text x=\"" << px(lo) << "\" y=\"" << detail::fixed2(kHeight - kBottom + 18)
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::xml_escape(detail::format_double(grid.front()))
    << "</text>\n";
  s << "  <text x=\"" << px(hi) << "\" y=\"" << detail::fixed2(kHeight - kBottom + 18)
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
    << detail::xml_escape(detail::format_double(grid.back())) << "</text>\n";

  std::size_t color = 0;
  std::size_t legend = 0;
  auto legend_entry = [&](const std::string& name, const char* stroke, bool dashed) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(legend++);
    s << "  <path d=\"M " << detail::fixed2(kWidth - kRight + 15) << " " << detail::fixed2(y)
      << " H " << detail::fixed2(kWidth - kRight + 45) << "\" stroke=\"" << stroke
      << "\" stroke-width=\"2\" fill=\"none\"" << (dashed ? " stroke-dasharray=\"6 3\"" : "")
      << "/>\n";
    s << "  <text x=\"" << detail::fixed2(kWidth - kRight + 52) << "\" y=\""
      << detail::fixed2(y + 4) << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << detail::xml_escape(name) << "</text>\n";
  };

  for (const auto& [id, local] : r.locals) {
    const auto& f = local.dimension(dim);
    const char* stroke = detail::kPalette[color++ % 10];
    s << "  <path d=\"M " << px(grid.front()) << " " << py(0) << " V " << py(f[0]);
    for (std::size_t j = 1; j < f.size(); ++j) s << " H " << px(grid[j]) << " V " << py(f[j]);
    s << " H " << px(hi) << "\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
    legend_entry("client " + std::to_string(id), stroke, false);
  }
  const auto& c = r.central.dimension(dim);
  s << "  <path d=\"M " << px(grid.front()) << " " << py(c[0]);
  for (std::size_t j = 1; j < c.size(); ++j) s << " L " << px(grid[j]) << " " << py(c[j]);
  s << "\" stroke=\"black\" stroke-width=\"2\" stroke-dasharray=\"6 3\" fill=\"none\"/>\n";
  legend_entry("central", "black", true);
  s << "</svg>\n";
  return s.str();
}

enum class ReportFormat { kCsv, kSvg, kText };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "svg") return ReportFormat::kSvg;
  if (s == "text") return ReportFormat::kText;
  fail(ErrorKind::kValidation, "unknown report format '" + s + "' (csv, svg, text)");
}

inline std::string svg_file_name(std::size_t dim) { return "cdf_dim" + std::to_string(dim) + ".svg"; }

/// csv -> <dir>/report.csv, svg -> <dir>/cdf_dim<d>.svg, text -> `text_out`.
inline void emit_report(const NonIidReport& r, ReportFormat format,
                        const std::filesystem::path& dir, std::ostream& text_out) {
  require(!r.rows.empty(), ErrorKind::kValidation, "report has no rows");
  switch (format) {
    case ReportFormat::kCsv:
      write_text_file((dir / "report.csv").string(), render_csv(r));
      break;
    case ReportFormat::kSvg:
      for (std::size_t d = 0; d < r.central.dims(); ++d) {
        write_text_file((dir / svg_file_name(d)).string(), render_svg(r, d));
      }
      break;
    case ReportFormat::kText:
      text_out << render_text(r);
      break;
  }
}

// ---------------------------------------------------------------------------
// Stored artifacts, so reports can be re-rendered without a protocol run:
//   run.meta            key=value metadata
//   central_cdf.csv     dimension,index,x,value
//   local_cdf_<id>.csv  same layout

inline std::string cdf_to_csv(const Ecdf& e) {
  std::string out = "dimension,index,x,value\n";
  for (std::size_t d = 0; d < e.dims(); ++d) {
    const auto& g = e.policy().grids[d];
    for (std::size_t j = 0; j < g.size(); ++j) {
      out += std::to_string(d) + "," + std::to_string(j) + "," + detail::format_double(g[j]) + "," +
             detail::format_double(e.dimension(d)[j]) + "\n";
    }
  }
  return out;
}

inline Ecdf cdf_from_csv(std::string_view text, DataKind kind, std::uint64_t sample_count) {
  std::istringstream in{std::string(text)};
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && detail::trim(line) == "dimension,index,x,value",
          ErrorKind::kValidation, "CDF artifact has wrong header");
  DistributionPolicy policy;
  policy.kind = kind;
  std::vector<std::vector<double>> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto cells = detail::split(t, ',');
    const std::string where = "CDF artifact line " + std::to_string(line_no);
    require(cells.size() == 4, ErrorKind::kValidation, where + ": expected 4 columns");
    const auto d = static_cast<std::size_t>(detail::parse_int(cells[0], where));
    const auto j = static_cast<std::size_t>(detail::parse_int(cells[1], where));
    require(d == policy.grids.size() - (policy.grids.empty() ? 0 : 1) ||
                d == policy.grids.size(),
            ErrorKind::kValidation, where + ": dimensions out of order");
    if (d == policy.grids.size()) {
      policy.grids.emplace_back();
      values.emplace_back();
    }
    require(j == policy.grids[d].size(), ErrorKind::kValidation, where + ": index out of order");
    policy.grids[d].push_back(detail::parse_double(cells[2], where));
    values[d].push_back(detail::parse_double(cells[3], where));
  }
  policy.validate();
  return Ecdf::make(std::move(policy), std::move(values), sample_count);
}

inline std::string metadata_to_text(const RunMetadata& m, const std::vector<std::uint32_t>& clients) {
  std::string out;
  out += "kind=" + to_string(m.kind) + "\n";
  out += "k=" + std::to_string(m.k) + "\n";
  out += "policy_size=" + std::to_string(m.policy_size) + "\n";
  out += "seed=" + std::to_string(m.seed) + "\n";
  out += "n=" + std::to_string(m.n) + "\n";
  out += "q=" + std::to_string(m.q) + "\n";
  out += "scale_bits=" + std::to_string(m.scale_bits) + "\n";
  out += "plain_modulus_bits=" + std::to_string(m.plain_modulus_bits) + "\n";
  out += "clients=";
  for (std::size_t i = 0; i < clients.size(); ++i) out += (i ? " " : "") + std::to_string(clients[i]);
  out += "\n";
  return out;
}

inline std::string local_cdf_file_name(std::uint32_t id) {
  return "local_cdf_" + std::to_string(id) + ".csv";
}

inline void save_artifacts(const NonIidReport& r, const std::filesystem::path& dir) {
  std::vector<std::uint32_t> ids;
  for (const auto& [id, local] : r.locals) {
    ids.push_back(id);
    write_text_file((dir / local_cdf_file_name(id)).string(), cdf_to_csv(local));
  }
  write_text_file((dir / "central_cdf.csv").string(), cdf_to_csv(r.central));
  write_text_file((dir / "run.meta").string(), metadata_to_text(r.meta, ids));
}

/// Rebuilds a report from save_artifacts() output. Missing files raise an
/// I/O error naming every expected file.
inline NonIidReport load_artifacts(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "run.meta";
  const std::filesystem::path central_path = dir / "central_cdf.csv";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(central_path)) {
    fail(ErrorKind::kIo, "missing report artifacts in " + dir.string() +
                             ": expected run.meta, central_cdf.csv and local_cdf_<id>.csv");
  }
  std::map<std::string, std::string> kv;
  std::istringstream in(read_text_file(meta_path.string()));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = std::string(detail::trim(line.substr(eq + 1)));
  }
  RunMetadata m;
  auto num = [&](const char* key) -> std::int64_t {
    require(kv.contains(key), ErrorKind::kValidation, std::string("run.meta lacks ") + key);
    return detail::parse_int(kv[key], std::string("run.meta ") + key);
  };
  require(kv["kind"] == "labels" || kv["kind"] == "features", ErrorKind::kValidation,
          "run.meta has unknown kind");
  m.kind = kv["kind"] == "labels" ? DataKind::kLabels : DataKind::kFeatures;
  m.k = static_cast<std::uint32_t>(num("k"));
  m.policy_size = static_cast<std::size_t>(num("policy_size"));
  m.seed = static_cast<std::uint64_t>(num("seed"));
  m.n = static_cast<std::uint32_t>(num("n"));
  m.q = static_cast<std::uint64_t>(num("q"));
  m.scale_bits = static_cast<int>(num("scale_bits"));
  m.plain_modulus_bits = static_cast<int>(num("plain_modulus_bits"));

  std::map<std::uint32_t, Ecdf> locals;
  std::istringstream ids(kv["clients"]);
  std::string id_text;
  std::vector<std::string> missing;
  while (ids >> id_text) {
    const auto id = static_cast<std::uint32_t>(detail::parse_int(id_text, "run.meta clients"));
    const auto path = dir / local_cdf_file_name(id);
    if (!std::filesystem::exists(path)) {
      missing.push_back(path.filename().string());
      continue;
    }
    locals.emplace(id, cdf_from_csv(read_text_file(path.string()), m.kind, 0));
  }
  if (!missing.empty() || locals.empty()) {
    std::string names;
    for (const auto& s : missing) names += " " + s;
    fail(ErrorKind::kIo, "missing report artifacts in " + dir.string() + ":" +
                             (names.empty() ? " local_cdf_<id>.csv" : names));
  }
  Ecdf central = cdf_from_csv(read_text_file(central_path.string()), m.kind, m.k);
  return build_report(m, std::move(locals), std::move(central));
}

}  // namespace fcdf

#endif  // FCDF_METRICS_HPP_
