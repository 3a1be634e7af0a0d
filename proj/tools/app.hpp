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

#ifndef FCDF_TOOLS_APP_HPP_
#define FCDF_TOOLS_APP_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "fcdf/fcdf.hpp"

namespace fcdf::app {

// Installs the stderr logger; FCDF_LOG selects error, info (default) or debug.
void init_logging();

struct SynthSpec {
  DataKind kind = DataKind::kLabels;
  std::size_t classes = 100;
  std::size_t per_class = 500;
  std::size_t dims = 12;
  double separation = 2.0;
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

// "labels:classes=C,per=P" or "features:classes=C,per=P,dims=D[,sep=S]".
SynthSpec parse_synth_spec(std::string_view text);
std::string to_string(const SynthSpec& spec);
Dataset make_synth(const SynthSpec& spec, std::uint64_t seed);

enum class PartitionMode { kDirichlet, kSkew, kIid };

struct RunConfig {
  std::uint32_t n = 4096;
  int q_bits = 54;
  int scale_bits = 16;
  int plain_modulus_bits = 26;

  std::string transport = "loopback";
  std::string address = "127.0.0.1:0";
  std::uint32_t k = 4;
  std::size_t grid = kDefaultGridSize;
  double timeout = 60.0;

  std::string synth = "labels:classes=100,per=500";
  std::string dataset;
  PartitionMode partition = PartitionMode::kDirichlet;
  double beta = 0.1;
  double skew = 0.75;
  std::size_t size = 300;

  std::string keys;
  std::uint64_t seed = 1;

  // Checks every constraint of the modules the run touches.
  void validate() const;
  SchemeParams scheme() const;
  PartitionSpec partition_spec() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_text(const RunConfig& config);
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);
// Every config key with its default and meaning.
std::string config_reference();

struct KeygenOptions {
  std::string out;
  std::uint32_t n = 4096;
  int q_bits = 54;
  std::uint64_t seed = 0;
  bool force = false;
};

struct PartitionOptions {
  std::string labels;
  std::string features;
  std::string synth;
  std::uint32_t k = 4;
  std::optional<double> beta;
  std::optional<double> skew;
  std::size_t size = 300;
  bool iid = false;
  std::string out;
  std::uint64_t seed = 0;
};

struct ServeOptions {
  std::string bind = "0.0.0.0:7001";
  std::uint32_t k = 2;
  std::size_t grid = kDefaultGridSize;
  std::uint32_t n = 4096;
  int q_bits = 54;
  double timeout = 0.0;
  // Called with the bound port once the listener is up.
  std::function<void(std::uint16_t)> on_listening;
};

struct ClientOptions {
  std::string server = "127.0.0.1:7001";
  std::string data;
  std::string keys;
  std::string out;
  std::optional<std::uint32_t> id;
  std::uint64_t seed = 0;
};

// Each command returns the process exit code; failures throw fcdf::Error.
int cmd_keygen(const KeygenOptions& opts, std::ostream& out);
int cmd_partition(const PartitionOptions& opts, std::ostream& out);
int cmd_serve(const ServeOptions& opts, std::ostream& out);
int cmd_client(const ClientOptions& opts, std::ostream& out);
int cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& out);
int cmd_report(const std::string& in_dir, const std::string& format, std::ostream& out);

// Runs the whole pipeline in memory; cmd_simulate adds file output.
NonIidReport simulate(const RunConfig& config);

// client_<i>.csv -> i
std::optional<std::uint32_t> client_id_from_path(const std::string& path);

}  // namespace fcdf::app

#endif  // FCDF_TOOLS_APP_HPP_
