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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "app.hpp"

namespace fcdf::app {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fcdf_app_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("FCDF_LOG=error ") + FCDF_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig small_label_config(std::uint32_t k) {
  RunConfig c;
  c.n = 1024;
  c.k = k;
  c.synth = "labels:classes=30,per=40";
  c.timeout = 20;
  c.seed = 3;
  return c;
}

TEST(SynthSpec, ParseAndPrint) {
  const SynthSpec l = parse_synth_spec("labels:classes=100,per=500");
  EXPECT_EQ(l.kind, DataKind::kLabels);
  EXPECT_EQ(l.classes, 100u);
  EXPECT_EQ(l.per_class, 500u);
  const SynthSpec f = parse_synth_spec("features:classes=20,per=50,dims=12,sep=1.5");
  EXPECT_EQ(f.dims, 12u);
  EXPECT_EQ(f.separation, 1.5);
  EXPECT_EQ(parse_synth_spec(to_string(f)), f);
  EXPECT_EQ(parse_synth_spec(to_string(l)), l);
  for (const char* bad : {"labels", "pixels:classes=1,per=1", "labels:classes=1", "labels:per=1,classes=0",
                          "labels:classes=2,per=2,dims=3", "features:classes=2,per=2,sep=-1",
                          "labels:classes=2,per=2,classes=3"}) {
    EXPECT_THROW(parse_synth_spec(bad), Error) << bad;
  }
}

TEST(RunConfig, RoundTripsThroughText) {
  RunConfig c;
  c.k = 7;
  c.beta = 0.123456789;
  c.partition = PartitionMode::kIid;
  c.transport = "tcp";
  c.seed = 18446744073709551615ULL;
  c.keys = "/tmp/keys";
  EXPECT_EQ(parse_run_config(to_text(c)), c);
  EXPECT_EQ(parse_run_config(to_text(RunConfig{})), RunConfig{});
}

TEST(RunConfig, DatasetReplacesDefaultSynth) {
  const RunConfig c = parse_run_config("dataset=/data/x.csv\n");
  EXPECT_TRUE(c.synth.empty());
  EXPECT_EQ(c.dataset, "/data/x.csv");
}

TEST(RunConfig, ValidationCatchesEveryModule) {
  auto invalid = [](const std::string& text) {
    try {
      parse_run_config(text).validate();
    } catch (const Error& e) {
      return e.kind() == ErrorKind::kValidation || e.kind() == ErrorKind::kParameter;
    }
    return false;
  };
  EXPECT_TRUE(invalid("n=1000\n"));
  EXPECT_TRUE(invalid("q_bits=30\n"));
  EXPECT_TRUE(invalid("scale_bits=26\n"));
  EXPECT_TRUE(invalid("k=0\n"));
  EXPECT_TRUE(invalid("k=1025\n"));
  EXPECT_TRUE(invalid("beta=0\n"));
  EXPECT_TRUE(invalid("skew=2\n"));
  EXPECT_TRUE(invalid("transport=udp\n"));
  EXPECT_TRUE(invalid("address=host:99999\n"));
  EXPECT_TRUE(invalid("synth=labels:classes=0,per=1\n"));
  EXPECT_TRUE(invalid("synth=labels:classes=2,per=2\ndataset=x.csv\n"));
  EXPECT_THROW(parse_run_config("bogus=1\n"), Error);
  EXPECT_THROW(parse_run_config("k=1\nk=2\n"), Error);
  EXPECT_THROW(parse_run_config("partition=random\n"), Error);
  EXPECT_NO_THROW(parse_run_config("# comment\n\nk=2\n").validate());
}

TEST(Keygen, WritesDeterministicKeysAndRefusesOverwrite) {
  const fs::path a = fresh_dir("keys_a");
  const fs::path b = fresh_dir("keys_b");
  std::ostringstream out;
  EXPECT_EQ(cmd_keygen({a.string(), 4096, 54, 9, false}, out), 0);
  EXPECT_EQ(cmd_keygen({b.string(), 4096, 54, 9, false}, out), 0);
  EXPECT_NE(out.str().find("q=9007199254781953"), std::string::npos);
  for (const char* f : {"secret.key", "public.key"}) {
    EXPECT_EQ(read_text_file((a / f).string()), read_text_file((b / f).string()));
  }
  try {
    cmd_keygen({a.string(), 4096, 54, 9, false}, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("--force"), std::string::npos);
  }
  EXPECT_EQ(cmd_keygen({a.string(), 4096, 54, 10, true}, out), 0);
  EXPECT_NE(read_text_file((a / "secret.key").string()), read_text_file((b / "secret.key").string()));
}

TEST(Partition, SyntheticLabelsCoverEverything) {
  const fs::path dir = fresh_dir("part_labels");
  PartitionOptions o;
  o.synth = "labels:classes=100,per=500";
  o.k = 4;
  o.beta = 0.1;
  o.out = dir.string();
  std::ostringstream out;
  ASSERT_EQ(cmd_partition(o, out), 0);
  std::size_t total = 0;
  for (int c = 0; c < 4; ++c) total += line_count(dir / ("client_" + std::to_string(c) + ".csv"));
  EXPECT_EQ(total, 50000u);
  EXPECT_EQ(line_count(dir / "manifest.txt"), 4u);
}

TEST(Partition, FeatureSkewProfile) {
  const fs::path dir = fresh_dir("part_features");
  PartitionOptions o;
  o.synth = "features:classes=20,per=50,dims=12";
  o.k = 2;
  o.skew = 0.75;
  o.size = 300;
  o.out = dir.string();
  std::ostringstream out;
  ASSERT_EQ(cmd_partition(o, out), 0);
  for (int c = 0; c < 2; ++c) {
    const Dataset d = load_dataset((dir / ("client_" + std::to_string(c) + ".csv")).string());
    EXPECT_EQ(d.size(), 300u);
    EXPECT_EQ(d.dims(), 12u);
  }
}

TEST(Partition, ArgumentErrors) {
  std::ostringstream out;
  PartitionOptions o;
  o.synth = "labels:classes=10,per=10";
  o.out = fresh_dir("part_err").string();
  o.k = 0;
  EXPECT_THROW(cmd_partition(o, out), Error);
  o.k = 2;
  o.beta = 0.1;
  o.skew = 0.5;
  EXPECT_THROW(cmd_partition(o, out), Error);
  PartitionOptions none;
  none.out = o.out;
  EXPECT_THROW(cmd_partition(none, out), Error);
}

TEST(ClientId, FromFileName) {
  EXPECT_EQ(client_id_from_path("/x/client_12.csv"), 12u);
  EXPECT_EQ(client_id_from_path("client_0.csv"), 0u);
  EXPECT_FALSE(client_id_from_path("/x/data.csv").has_value());
  EXPECT_FALSE(client_id_from_path("client_a.csv").has_value());
}

struct Networked {
  fs::path root;
  fs::path keys;
  fs::path data;
};

Networked prepare(const std::string& name, std::uint32_t k) {
  Networked n{fresh_dir(name), {}, {}};
  n.keys = n.root / "keys";
  n.data = n.root / "data";
  std::ostringstream out;
  cmd_keygen({n.keys.string(), 1024, 54, 3, false}, out);
  PartitionOptions o;
  o.synth = "labels:classes=30,per=40";
  o.k = k;
  o.out = n.data.string();
  o.seed = 3;
  cmd_partition(o, out);
  return n;
}

// Starts cmd_serve on an ephemeral port; returns the future and the port.
std::pair<std::future<int>, std::uint16_t> start_server(std::uint32_t k, double timeout) {
  auto ready = std::make_shared<std::promise<std::uint16_t>>();
  auto port = ready->get_future();
  std::future<int> server = std::async(std::launch::async, [k, timeout, ready] {
    ServeOptions s;
    s.bind = "127.0.0.1:0";
    s.k = k;
    s.n = 1024;
    s.timeout = timeout;
    s.on_listening = [ready](std::uint16_t p) { ready->set_value(p); };
    std::ostringstream out;
    try {
      return cmd_serve(s, out);
    } catch (const Error& e) {
      return exit_code(e.kind());
    }
  });
  return {std::move(server), port.get()};
}

int client_exit(const ClientOptions& o) {
  std::ostringstream out;
  try {
    return cmd_client(o, out);
  } catch (const Error& e) {
    return exit_code(e.kind());
  }
}

TEST(ServeClient, TwoClientsWriteIdenticalCentralCdfs) {
  const Networked n = prepare("net_ok", 2);
  auto [server, port] = start_server(2, 20);
  std::vector<std::future<int>> clients;
  for (int c = 0; c < 2; ++c) {
    clients.push_back(std::async(std::launch::async, [&, c] {
      ClientOptions o;
      o.server = "127.0.0.1:" + std::to_string(port);
      o.data = (n.data / ("client_" + std::to_string(c) + ".csv")).string();
      o.keys = n.keys.string();
      o.out = (n.root / ("out_" + std::to_string(c))).string();
      return client_exit(o);
    }));
  }
  for (auto& c : clients) EXPECT_EQ(c.get(), 0);
  EXPECT_EQ(server.get(), 0);
  EXPECT_EQ(read_text_file((n.root / "out_0" / "central_cdf.csv").string()),
            read_text_file((n.root / "out_1" / "central_cdf.csv").string()));
  EXPECT_EQ(line_count(n.root / "out_0" / "report.csv"), 2u);
}

TEST(ServeClient, WrongParameterKeysFail) {
  const Networked n = prepare("net_params", 2);
  const fs::path other = n.root / "other_keys";
  std::ostringstream out;
  cmd_keygen({other.string(), 1024, 55, 3, false}, out);
  auto [server, port] = start_server(2, 5);
  std::vector<std::future<int>> clients;
  for (int c = 0; c < 2; ++c) {
    clients.push_back(std::async(std::launch::async, [&, c] {
      ClientOptions o;
      o.server = "127.0.0.1:" + std::to_string(port);
      o.data = (n.data / ("client_" + std::to_string(c) + ".csv")).string();
      o.keys = (c == 0 ? n.keys : other).string();
      o.out = (n.root / ("out_" + std::to_string(c))).string();
      return client_exit(o);
    }));
  }
  EXPECT_NE(clients[1].get(), 0);
  EXPECT_NE(clients[0].get(), 0);
  EXPECT_NE(server.get(), 0);
}

TEST(ServeClient, MissingClientTimesOut) {
  const Networked n = prepare("net_timeout", 4);
  auto [server, port] = start_server(4, 1.0);
  std::vector<std::future<int>> clients;
  for (int c = 0; c < 3; ++c) {
    clients.push_back(std::async(std::launch::async, [&, c] {
      ClientOptions o;
      o.server = "127.0.0.1:" + std::to_string(port);
      o.data = (n.data / ("client_" + std::to_string(c) + ".csv")).string();
      o.keys = n.keys.string();
      o.out = (n.root / ("out_" + std::to_string(c))).string();
      return client_exit(o);
    }));
  }
  EXPECT_NE(server.get(), 0);
  for (auto& c : clients) EXPECT_NE(c.get(), 0);
}

TEST(Simulate, SingleClientHasZeroDivergence) {
  const NonIidReport r = simulate(small_label_config(1));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].ks, 0.0);
  EXPECT_EQ(r.rows[0].l1, 0.0);
  EXPECT_EQ(r.rows[0].coverage, 1.0);
}

TEST(Simulate, DeterministicReportBytes) {
  const fs::path a = fresh_dir("sim_a");
  const fs::path b = fresh_dir("sim_b");
  std::ostringstream out;
  ASSERT_EQ(cmd_simulate(small_label_config(3), a.string(), out), 0);
  ASSERT_EQ(cmd_simulate(small_label_config(3), b.string(), out), 0);
  EXPECT_EQ(read_text_file((a / "report.csv").string()), read_text_file((b / "report.csv").string()));
  EXPECT_TRUE(fs::exists(a / "cdf_dim0.svg"));
  EXPECT_EQ(parse_run_config(read_text_file((a / "run.cfg").string())), small_label_config(3));
}

TEST(Simulate, ErrorsNameTheStage) {
  RunConfig c = small_label_config(2);
  c.dataset = "/nonexistent.csv";
  c.synth.clear();
  try {
    simulate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
    EXPECT_EQ(e.message().rfind("stage partition: cannot open", 0), 0u) << e.what();
  }
  c = small_label_config(2);
  c.k = 0;
  try {
    simulate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.message().rfind("stage config", 0), 0u) << e.what();
  }
}

TEST(Simulate, TcpMatchesLoopback) {
  RunConfig c = small_label_config(2);
  const NonIidReport loop = simulate(c);
  c.transport = "tcp";
  const NonIidReport tcp = simulate(c);
  EXPECT_EQ(render_csv(loop), render_csv(tcp));
}

TEST(Simulate, EqualsManualComposition) {
  // simulate with seed s == keygen/partition/serve/client run by hand with s.
  RunConfig c = small_label_config(2);
  const fs::path sim = fresh_dir("compose_sim");
  std::ostringstream out;
  ASSERT_EQ(cmd_simulate(c, sim.string(), out), 0);

  const Networked n = prepare("compose_manual", 2);
  auto [server, port] = start_server(2, 20);
  std::string rows = "client_id,dimension,ks,l1,coverage\n";
  std::vector<std::future<int>> clients;
  for (int i = 0; i < 2; ++i) {
    clients.push_back(std::async(std::launch::async, [&, i] {
      ClientOptions o;
      o.server = "127.0.0.1:" + std::to_string(port);
      o.data = (n.data / ("client_" + std::to_string(i) + ".csv")).string();
      o.keys = n.keys.string();
      o.out = (n.root / ("out_" + std::to_string(i))).string();
      o.seed = 3;
      return client_exit(o);
    }));
  }
  for (auto& f : clients) ASSERT_EQ(f.get(), 0);
  ASSERT_EQ(server.get(), 0);
  for (int i = 0; i < 2; ++i) {
    const std::string csv = read_text_file((n.root / ("out_" + std::to_string(i)) / "report.csv").string());
    rows += csv.substr(csv.find('\n') + 1);
  }
  EXPECT_EQ(read_text_file((sim / "report.csv").string()), rows);
  EXPECT_EQ(read_text_file((sim / "central_cdf.csv").string()),
            read_text_file((n.root / "out_0" / "central_cdf.csv").string()));
}

TEST(Report, RerendersStoredArtifacts) {
  const fs::path dir = fresh_dir("rerender");
  std::ostringstream out;
  ASSERT_EQ(cmd_simulate(small_label_config(3), dir.string(), out), 0);
  const std::string original = read_text_file((dir / "report.csv").string());
  fs::remove(dir / "report.csv");
  std::ostringstream text;
  ASSERT_EQ(cmd_report(dir.string(), "text", text), 0);
  const std::string table = text.str();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 3);
  ASSERT_EQ(cmd_report(dir.string(), "csv", out), 0);
  EXPECT_EQ(read_text_file((dir / "report.csv").string()), original);
  ASSERT_EQ(cmd_report(dir.string(), "svg", out), 0);
  EXPECT_TRUE(fs::exists(dir / "cdf_dim0.svg"));
}

TEST(Report, EmptyDirectoryNamesMissingFiles) {
  const fs::path dir = fresh_dir("rerender_empty");
  std::ostringstream out;
  try {
    cmd_report(dir.string(), "csv", out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(exit_code(e.kind()), 4);
    EXPECT_NE(std::string(e.what()).find("run.meta"), std::string::npos);
  }
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fresh_dir("cli");
  EXPECT_EQ(run_cli("keygen --out " + (dir / "k").string() + " --n 1000"), 2);
  EXPECT_EQ(run_cli("keygen --out " + (dir / "k").string()), 0);
  EXPECT_EQ(run_cli("keygen --out " + (dir / "k").string()), 4);
  EXPECT_EQ(run_cli("partition --synth labels:classes=10,per=10 --k 0 --out " + (dir / "p").string()), 2);
  EXPECT_EQ(run_cli("report --in " + (dir / "nothing").string()), 4);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, SimulateFromConfigFile) {
  const fs::path dir = fresh_dir("cli_sim");
  write_text_file((dir / "run.cfg").string(), to_text(small_label_config(2)));
  EXPECT_EQ(run_cli("simulate --config " + (dir / "run.cfg").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));
  EXPECT_EQ(run_cli("report --in " + (dir / "out").string() + " --format text"), 0);
}

}  // namespace
}  // namespace fcdf::app
