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

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>

#include "app.hpp"

namespace {

using fcdf::app::ClientOptions;
using fcdf::app::KeygenOptions;
using fcdf::app::PartitionOptions;
using fcdf::app::ServeOptions;

constexpr int kUsageExit = 2;

}  // namespace

int main(int argc, char** argv) {
  fcdf::app::init_logging();

  CLI::App cli{"Federated CDF comparison over additively homomorphic encryption"};
  cli.require_subcommand(1);
  cli.footer("Exit codes: 0 success, 2 validation, 3 protocol/crypto, 4 I/O.\n"
             "FCDF_LOG=error|info|debug controls diagnostics on stderr.");

  KeygenOptions keygen;
  auto* keygen_cmd = cli.add_subcommand("keygen", "Write secret.key and public.key");
  keygen_cmd->add_option("--out", keygen.out, "Output directory")->required();
  keygen_cmd->add_option("--n", keygen.n, "Ring degree")->capture_default_str();
  keygen_cmd->add_option("--q-bits", keygen.q_bits, "Modulus width")->capture_default_str();
  keygen_cmd->add_option("--seed", keygen.seed, "Key seed")->capture_default_str();
  keygen_cmd->add_flag("--force", keygen.force, "Overwrite existing key files");

  PartitionOptions part;
  double beta = 0.0;
  double skew = 0.0;
  auto* part_cmd = cli.add_subcommand("partition", "Split a dataset into client CSVs");
  part_cmd->add_option("--labels", part.labels, "Label CSV (one integer per line)");
  part_cmd->add_option("--features", part.features, "Feature CSV (f0..f{d-1},class)");
  part_cmd->add_option("--synth", part.synth,
                       "labels:classes=C,per=P or features:classes=C,per=P,dims=D[,sep=S]");
  part_cmd->add_option("--k", part.k, "Number of clients")->capture_default_str();
  auto* beta_opt = part_cmd->add_option("--beta", beta, "Dirichlet label skew (default 0.1)");
  auto* skew_opt = part_cmd->add_option("--skew", skew, "Feature skew in-pool fraction");
  part_cmd->add_option("--size", part.size, "Rows per client for --skew/--iid")
      ->capture_default_str();
  part_cmd->add_flag("--iid", part.iid, "Shared class pool baseline");
  part_cmd->add_option("--out", part.out, "Output directory")->required();
  part_cmd->add_option("--seed", part.seed, "Partition seed")->capture_default_str();

  ServeOptions serve;
  auto* serve_cmd = cli.add_subcommand("serve", "Run the aggregation server over TCP");
  serve_cmd->add_option("--bind", serve.bind, "host:port to listen on")->capture_default_str();
  serve_cmd->add_option("--k", serve.k, "Number of clients")->capture_default_str();
  serve_cmd->add_option("--grid", serve.grid, "Grid points per feature dimension")
      ->capture_default_str();
  serve_cmd->add_option("--n", serve.n, "Ring degree")->capture_default_str();
  serve_cmd->add_option("--q-bits", serve.q_bits, "Modulus width")->capture_default_str();
  serve_cmd->add_option("--timeout", serve.timeout, "Seconds to wait, 0 forever")
      ->capture_default_str();

  ClientOptions client;
  std::uint32_t client_id = 0;
  auto* client_cmd = cli.add_subcommand("client", "Run one client against a server");
  client_cmd->add_option("--server", client.server, "host:port")->capture_default_str();
  client_cmd->add_option("--data", client.data, "Client CSV")->required();
  client_cmd->add_option("--keys", client.keys, "Directory with secret.key and public.key")
      ->required();
  client_cmd->add_option("--out", client.out, "Output directory")->required();
  auto* id_opt = client_cmd->add_option("--id", client_id, "Client id (default from client_<i>.csv)");
  client_cmd->add_option("--seed", client.seed, "Encryption seed")->capture_default_str();

  std::string config_path;
  std::string sim_out;
  auto* sim_cmd = cli.add_subcommand("simulate", "Run the full pipeline in one process");
  sim_cmd->add_option("--config", config_path, "key=value config file")->required();
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();
  sim_cmd->footer(fcdf::app::config_reference());

  std::string report_in;
  std::string report_format = "text";
  auto* report_cmd = cli.add_subcommand("report", "Re-render stored CDF artifacts");
  report_cmd->add_option("--in", report_in, "Directory written by client or simulate")
      ->required();
  report_cmd->add_option("--format", report_format, "csv, svg or text")
      ->check(CLI::IsMember({"csv", "svg", "text"}))
      ->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : kUsageExit;
  }

  try {
    if (*keygen_cmd) return fcdf::app::cmd_keygen(keygen, std::cout);
    if (*part_cmd) {
      if (*beta_opt) part.beta = beta;
      if (*skew_opt) part.skew = skew;
      return fcdf::app::cmd_partition(part, std::cout);
    }
    if (*serve_cmd) return fcdf::app::cmd_serve(serve, std::cout);
    if (*client_cmd) {
      if (*id_opt) client.id = client_id;
      return fcdf::app::cmd_client(client, std::cout);
    }
    if (*sim_cmd) {
      const auto config = fcdf::app::load_run_config(config_path);
      return fcdf::app::cmd_simulate(config, sim_out, std::cout);
    }
    if (*report_cmd) return fcdf::app::cmd_report(report_in, report_format, std::cout);
  } catch (const fcdf::Error& e) {
    spdlog::error("{}: {}", fcdf::to_string(e.kind()), e.what());
    return fcdf::exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return fcdf::exit_code(fcdf::ErrorKind::kIo);
  }
  return kUsageExit;
}
