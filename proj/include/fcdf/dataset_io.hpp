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

#ifndef FCDF_DATASET_IO_HPP_
#define FCDF_DATASET_IO_HPP_

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fcdf/ecdf.hpp"
#include "fcdf/error.hpp"

// CSV layouts:
//   labels   one integer per line, no header
//   features header "f0,f1,...,f{d-1},class", then d floats and an integer
//            class id per row

namespace fcdf {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = line.find(sep, start);
    out.push_back(trim(line.substr(start, at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

inline std::int64_t parse_int(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kValidation, where + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

inline double parse_double(std::string_view s, const std::string& where) {
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    fail(ErrorKind::kValidation, where + ": not a number: '" + tmp + "'");
  }
  if (std::isnan(v)) fail(ErrorKind::kValidation, where + ": NaN is not allowed");
  return v;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Dataset parse_label_csv(std::string_view text, std::uint32_t client_id = 0) {
  std::vector<std::int64_t> labels;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    labels.push_back(detail::parse_int(t, "line " + std::to_string(line_no)));
  }
  return Dataset::from_labels(std::move(labels), client_id);
}

inline Dataset parse_feature_csv(std::string_view text, std::uint32_t client_id = 0) {
  std::istringstream in{std::string(text)};
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kValidation,
          "feature CSV is missing its header");
  const auto header = detail::split(detail::trim(line), ',');
  require(header.size() >= 2 && header.back() == "class", ErrorKind::kValidation,
          "feature CSV header must be f0,...,f{d-1},class");
  const std::size_t dims = header.size() - 1;
  for (std::size_t d = 0; d < dims; ++d) {
    require(header[d] == "f" + std::to_string(d), ErrorKind::kValidation,
            "feature CSV header column " + std::to_string(d) + " must be f" + std::to_string(d));
  }
  std::vector<double> values;
  std::vector<std::int64_t> classes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto cells = detail::split(t, ',');
    const std::string where = "line " + std::to_string(line_no);
    require(cells.size() == dims + 1, ErrorKind::kValidation,
            where + ": expected " + std::to_string(dims + 1) + " columns");
    for (std::size_t d = 0; d < dims; ++d) values.push_back(detail::parse_double(cells[d], where));
    classes.push_back(detail::parse_int(cells[dims], where));
  }
  return Dataset::from_features(std::move(values), dims, std::move(classes), client_id);
}

inline bool looks_like_feature_csv(std::string_view text) {
  return text.substr(0, 2) == "f0";
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::kIo, "short write to " + path);
}

/// Reads either CSV layout, detected from the header.
inline Dataset load_dataset(const std::string& path, std::uint32_t client_id = 0) {
  const std::string text = read_text_file(path);
  return looks_like_feature_csv(text) ? parse_feature_csv(text, client_id)
                                      : parse_label_csv(text, client_id);
}

inline std::string to_csv(const Dataset& d) {
  std::string out;
  if (d.kind() == DataKind::kLabels) {
    for (std::int64_t l : d.labels()) out += std::to_string(l) + "\n";
    return out;
  }
  for (std::size_t k = 0; k < d.dims(); ++k) out += "f" + std::to_string(k) + ",";
  out += "class\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) out += detail::format_double(v) + ",";
    out += std::to_string(d.classes().empty() ? 0 : d.classes()[i]) + "\n";
  }
  return out;
}

}  // namespace fcdf

#endif  // FCDF_DATASET_IO_HPP_
