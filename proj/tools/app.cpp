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

#include "app.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

namespace fcdf::app {

namespace fs = std::filesystem;

namespace {

std::uint64_t parse_u64(std::string_view s, const std::string& where) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  require(ec == std::errc() && ptr == end && !s.empty(), ErrorKind::kValidation,
          where + ": expected an unsigned integer, got '" + std::string(s) + "'");
  return v;
}

std::string mode_name(PartitionMode m) {
  switch (m) {
    case PartitionMode::kDirichlet: return "dirichlet";
    case PartitionMode::kSkew: return "skew";
    case PartitionMode::kIid: return "iid";
  }
  return "dirichlet";
}

PartitionMode parse_mode(std::string_view s) {
  if (s == "dirichlet") return PartitionMode::kDirichlet;
  if (s == "skew") return PartitionMode::kSkew;
  if (s == "iid") return PartitionMode::kIid;
  fail(ErrorKind::kValidation, "unknown partition mode '" + std::string(s) +
                                   "' (dirichlet, skew, iid)");
}

Partition run_partition(const Dataset& data, PartitionMode mode, const PartitionSpec& spec) {
  if (mode == PartitionMode::kDirichlet) return dirichlet_label_partition(data, spec);
  return feature_skew_partition(data, spec);
}

// Rethrows with the stage name prefixed, keeping the error kind.
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    spdlog::debug("stage {}", name);
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.message());
  }
}

void ensure_dir(const std::string& dir) {
  require(!dir.empty(), ErrorKind::kValidation, "output directory is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::kIo,
          "cannot create directory " + dir + (ec ? ": " + ec.message() : ""));
}

struct KeyMaterial {
  SecretKey secret;
  PublicKey pub;
};

KeyMaterial load_keys(const std::string& dir) {
  KeyMaterial k{load_secret_key((fs::path(dir) / "secret.key").string()),
                load_public_key((fs::path(dir) / "public.key").string())};
  require(verify_key_pair(k.secret, k.pub), ErrorKind::kValidation,
          "secret.key and public.key in " + dir + " do not belong together");
  return k;
}

RunMetadata metadata_for(const SchemeParams& scheme, std::uint32_t k, const ClientSession& c,
                         std::uint64_t seed) {
  RunMetadata m;
  m.kind = c.policy->policy.kind;
  m.k = k;
  m.policy_size = c.policy->policy.total_points();
  m.seed = seed;
  m.n = static_cast<std::uint32_t>(scheme.ring->n());
  m.q = scheme.ring->q();
  m.scale_bits = scheme.scale_bits;
  m.plain_modulus_bits = scheme.plain_modulus_bits;
  return m;
}

}  // namespace

void init_logging() {
  auto logger = spdlog::get("fcdf");
  if (!logger) logger = spdlog::stderr_color_mt("fcdf");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");
  const char* env = std::getenv("FCDF_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("FCDF_LOG={} not recognized, using info", level);
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

SynthSpec parse_synth_spec(std::string_view text) {
  const std::string where = "synth spec '" + std::string(text) + "'";
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, ErrorKind::kValidation,
          where + ": expected labels:... or features:...");
  SynthSpec spec;
  const auto kind = text.substr(0, colon);
  if (kind == "labels") {
    spec.kind = DataKind::kLabels;
  } else if (kind == "features") {
    spec.kind = DataKind::kFeatures;
  } else {
    fail(ErrorKind::kValidation, where + ": unknown kind '" + std::string(kind) + "'");
  }
  std::set<std::string> seen;
  for (auto item : detail::split(text.substr(colon + 1), ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    require(eq != std::string_view::npos, ErrorKind::kValidation,
            where + ": expected key=value, got '" + std::string(item) + "'");
    const std::string key(detail::trim(item.substr(0, eq)));
    const auto value = detail::trim(item.substr(eq + 1));
    require(seen.insert(key).second, ErrorKind::kValidation, where + ": repeated key " + key);
    if (key == "classes") {
      spec.classes = parse_u64(value, where);
    } else if (key == "per") {
      spec.per_class = parse_u64(value, where);
    } else if (key == "dims" && spec.kind == DataKind::kFeatures) {
      spec.dims = parse_u64(value, where);
    } else if (key == "sep" && spec.kind == DataKind::kFeatures) {
      spec.separation = detail::parse_double(value, where);
    } else {
      fail(ErrorKind::kValidation, where + ": unknown key '" + key + "'");
    }
  }
  require(seen.contains("classes") && seen.contains("per"), ErrorKind::kValidation,
          where + ": classes and per are required");
  require(spec.classes >= 1 && spec.per_class >= 1 && spec.dims >= 1, ErrorKind::kValidation,
          where + ": counts must be at least 1");
  require(spec.separation >= 0.0, ErrorKind::kValidation, where + ": sep must be non-negative");
  return spec;
}

std::string to_string(const SynthSpec& spec) {
  std::string s = spec.kind == DataKind::kLabels ? "labels" : "features";
  s += ":classes=" + std::to_string(spec.classes) + ",per=" + std::to_string(spec.per_class);
  if (spec.kind == DataKind::kFeatures) {
    s += ",dims=" + std::to_string(spec.dims) + ",sep=" + detail::format_double(spec.separation);
  }
  return s;
}

Dataset make_synth(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.kind == DataKind::kLabels) return synth_labels(spec.classes, spec.per_class);
  return synth_features(spec.classes, spec.dims, spec.per_class, spec.separation, seed);
}

// ---------------------------------------------------------------------------
// RunConfig

SchemeParams RunConfig::scheme() const {
  return SchemeParams::make(make_params(n, q_bits), scale_bits, plain_modulus_bits);
}

PartitionSpec RunConfig::partition_spec() const {
  PartitionSpec p;
  p.k = k;
  p.beta = beta;
  p.skew_fraction = skew;
  p.per_client_size = size;
  p.seed = seed;
  p.shared_pool = partition == PartitionMode::kIid;
  return p;
}

void RunConfig::validate() const {
  const SchemeParams s = scheme();
  require(transport == "loopback" || transport == "tcp", ErrorKind::kValidation,
          "transport must be loopback or tcp");
  parse_endpoint(address);
  require(k >= 1, ErrorKind::kValidation, "k must be at least 1");
  require(k <= max_sum_depth(s), ErrorKind::kValidation,
          "k exceeds the scheme's summation capacity of " + std::to_string(max_sum_depth(s)));
  require(grid >= 1, ErrorKind::kValidation, "grid must be at least 1");
  require(std::isfinite(timeout) && timeout >= 0.0, ErrorKind::kValidation,
          "timeout must be a non-negative number of seconds");
  require(synth.empty() != dataset.empty(), ErrorKind::kValidation,
          "set exactly one of synth and dataset");
  if (!synth.empty()) parse_synth_spec(synth);
  partition_spec().validate();
}

std::string to_text(const RunConfig& c) {
  std::ostringstream s;
  s << "n=" << c.n << "\n"
    << "q_bits=" << c.q_bits << "\n"
    << "scale_bits=" << c.scale_bits << "\n"
    << "plain_modulus_bits=" << c.plain_modulus_bits << "\n"
    << "transport=" << c.transport << "\n"
    << "address=" << c.address << "\n"
    << "k=" << c.k << "\n"
    << "grid=" << c.grid << "\n"
    << "timeout=" << detail::format_double(c.timeout) << "\n"
    << "synth=" << c.synth << "\n"
    << "dataset=" << c.dataset << "\n"
    << "partition=" << mode_name(c.partition) << "\n"
    << "beta=" << detail::format_double(c.beta) << "\n"
    << "skew=" << detail::format_double(c.skew) << "\n"
    << "size=" << c.size << "\n"
    << "keys=" << c.keys << "\n"
    << "seed=" << c.seed << "\n";
  return s.str();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::kValidation, where + ": expected key=value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    require(seen.insert(key).second, ErrorKind::kValidation, where + ": repeated key " + key);
    auto as_int = [&] { return detail::parse_int(value, where); };
    if (key == "n") {
      c.n = static_cast<std::uint32_t>(parse_u64(value, where));
    } else if (key == "q_bits") {
      c.q_bits = static_cast<int>(as_int());
    } else if (key == "scale_bits") {
      c.scale_bits = static_cast<int>(as_int());
    } else if (key == "plain_modulus_bits") {
      c.plain_modulus_bits = static_cast<int>(as_int());
    } else if (key == "transport") {
      c.transport = value;
    } else if (key == "address") {
      c.address = value;
    } else if (key == "k") {
      c.k = static_cast<std::uint32_t>(parse_u64(value, where));
    } else if (key == "grid") {
      c.grid = parse_u64(value, where);
    } else if (key == "timeout") {
      c.timeout = detail::parse_double(value, where);
    } else if (key == "synth") {
      c.synth = value;
    } else if (key == "dataset") {
      c.dataset = value;
    } else if (key == "partition") {
      c.partition = parse_mode(value);
    } else if (key == "beta") {
      c.beta = detail::parse_double(value, where);
    } else if (key == "skew") {
      c.skew = detail::parse_double(value, where);
    } else if (key == "size") {
      c.size = parse_u64(value, where);
    } else if (key == "keys") {
      c.keys = value;
    } else if (key == "seed") {
      c.seed = parse_u64(value, where);
    } else {
      fail(ErrorKind::kValidation, where + ": unknown key '" + key + "'");
    }
  }
  // A dataset path replaces the default synthetic source.
  if (seen.contains("dataset") && !seen.contains("synth") && !c.dataset.empty()) c.synth.clear();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

std::string config_reference() {
  return R"(Config file: one key=value per line, '#' starts a comment line.
  n=4096                 ring degree, power of two in [16, 131072]
  q_bits=54              ciphertext modulus width, 40..62
  scale_bits=16          fixed-point fraction bits
  plain_modulus_bits=26  plaintext modulus width
  transport=loopback     loopback or tcp
  address=127.0.0.1:0    tcp bind address (port 0 picks a free port)
  k=4                    number of clients
  grid=100               policy grid points per feature dimension
  timeout=60             server timeout in seconds, 0 waits forever
  synth=labels:classes=100,per=500
                         synthetic source; features:classes=C,per=P,dims=D[,sep=S]
  dataset=               label or feature CSV instead of synth
  partition=dirichlet    dirichlet, skew or iid
  beta=0.1               Dirichlet concentration
  skew=0.75              in-pool share for skew and iid
  size=300               rows per client for skew and iid
  keys=                  directory with secret.key and public.key; empty generates keys
  seed=1                 seeds keys, data, partition and encryption
)";
}

// ---------------------------------------------------------------------------
// Commands

int cmd_keygen(const KeygenOptions& opts, std::ostream& out) {
  const SchemeParams scheme = SchemeParams::make(make_params(opts.n, opts.q_bits));
  ensure_dir(opts.out);
  const fs::path sk_path = fs::path(opts.out) / "secret.key";
  const fs::path pk_path = fs::path(opts.out) / "public.key";
  if (!opts.force) {
    for (const auto& p : {sk_path, pk_path}) {
      require(!fs::exists(p), ErrorKind::kIo, p.string() + " exists; pass --force to overwrite");
    }
  }
  ChaChaStream rng(opts.seed);
  const KeyPair keys = keygen(scheme, rng);
  save_secret_key(keys.secret, sk_path.string());
  save_public_key(keys.pub, pk_path.string());
  out << "n=" << scheme.ring->n() << " q=" << scheme.ring->q() << " (" << scheme.ring->q_bits()
      << " bits) delta=" << scheme.delta << " max_clients=" << max_sum_depth(scheme) << "\n"
      << "wrote " << sk_path.string() << " and " << pk_path.string() << "\n";
  return 0;
}

int cmd_partition(const PartitionOptions& opts, std::ostream& out) {
  const int sources = !opts.labels.empty() + !opts.features.empty() + !opts.synth.empty();
  require(sources == 1, ErrorKind::kValidation,
          "give exactly one of --labels, --features and --synth");
  require(!(opts.beta && (opts.skew || opts.iid)), ErrorKind::kValidation,
          "--beta selects Dirichlet label skew; it cannot be combined with --skew or --iid");
  PartitionSpec spec;
  spec.k = opts.k;
  spec.beta = opts.beta.value_or(spec.beta);
  spec.skew_fraction = opts.skew.value_or(spec.skew_fraction);
  spec.per_client_size = opts.size;
  spec.seed = opts.seed;
  spec.shared_pool = opts.iid;
  spec.validate();
  const PartitionMode mode = opts.iid    ? PartitionMode::kIid
                             : opts.skew ? PartitionMode::kSkew
                                         : PartitionMode::kDirichlet;

  Dataset data;
  if (!opts.labels.empty()) {
    data = parse_label_csv(read_text_file(opts.labels));
  } else if (!opts.features.empty()) {
    data = parse_feature_csv(read_text_file(opts.features));
  } else {
    data = make_synth(parse_synth_spec(opts.synth), opts.seed);
  }
  const Partition p = run_partition(data, mode, spec);
  ensure_dir(opts.out);
  for (const auto& client : p.clients) {
    const fs::path path = fs::path(opts.out) / ("client_" + std::to_string(client.client_id()) + ".csv");
    write_text_file(path.string(), to_csv(client));
    out << path.string() << " " << client.size() << " rows\n";
  }
  write_text_file((fs::path(opts.out) / "manifest.txt").string(), partition_manifest(p));
  spdlog::info("partitioned {} rows into {} clients ({})", data.size(), p.clients.size(),
               mode_name(mode));
  return 0;
}

int cmd_serve(const ServeOptions& opts, std::ostream& out) {
  ServerConfig config;
  config.k = opts.k;
  config.grid_size = opts.grid;
  config.scheme = SchemeParams::make(make_params(opts.n, opts.q_bits));
  require(opts.grid >= 1, ErrorKind::kValidation, "grid must be at least 1");
  require(std::isfinite(opts.timeout) && opts.timeout >= 0.0, ErrorKind::kValidation,
          "timeout must be a non-negative number of seconds");
  make_server_session(config);
  TcpListener listener(parse_endpoint(opts.bind));
  spdlog::info("listening on port {} for {} clients", listener.port(), opts.k);
  if (opts.on_listening) opts.on_listening(listener.port());
  ServerRunOptions run;
  run.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(opts.timeout * 1000.0));
  const ServerOutcome outcome = run_server(listener, config, run);
  if (outcome.status != 0) {
    spdlog::error("server: {}", outcome.diagnostic);
    return outcome.status;
  }
  out << "aggregated " << opts.k << " clients over "
      << outcome.session.policy->total_points() << " policy points\n";
  return 0;
}

std::optional<std::uint32_t> client_id_from_path(const std::string& path) {
  static const std::regex pattern(R"(client_(\d+)\.csv)");
  std::smatch m;
  const std::string name = fs::path(path).filename().string();
  if (!std::regex_match(name, m, pattern)) return std::nullopt;
  try {
    return static_cast<std::uint32_t>(parse_u64(m[1].str(), "client file name"));
  } catch (const Error&) {
    return std::nullopt;
  }
}

int cmd_client(const ClientOptions& opts, std::ostream& out) {
  const auto id = opts.id ? opts.id : client_id_from_path(opts.data);
  require(id.has_value(), ErrorKind::kValidation,
          "cannot infer client id from " + opts.data + "; pass --id");
  require(!opts.keys.empty(), ErrorKind::kValidation, "--keys is required");
  ensure_dir(opts.out);
  const KeyMaterial keys = load_keys(opts.keys);
  Dataset data = load_dataset(opts.data, *id);
  auto conn = tcp_connect(parse_endpoint(opts.server));
  ClientOutcome outcome = run_client(*conn, make_client_session(*id, std::move(data), keys.secret, opts.seed));
  if (outcome.status != 0) {
    spdlog::error("{}", outcome.diagnostic);
    return outcome.status;
  }
  const ClientSession& c = outcome.session;
  const SchemeParams scheme = SchemeParams::make(c.key.s.params(), c.policy->scheme.scale_bits,
                                                 c.policy->scheme.plain_modulus_bits);
  std::map<std::uint32_t, Ecdf> locals{{*id, *c.submitted}};
  const NonIidReport report =
      build_report(metadata_for(scheme, c.k, c, opts.seed), std::move(locals), *c.central);
  emit_report(report, ReportFormat::kCsv, opts.out, out);
  save_artifacts(report, opts.out);
  out << render_text(report);
  return 0;
}

NonIidReport simulate(const RunConfig& config) {
  stage("config", [&] {
    config.validate();
    return 0;
  });
  const SchemeParams scheme = config.scheme();
  const SecretKey secret = stage("keygen", [&] {
    if (!config.keys.empty()) {
      const KeyMaterial k = load_keys(config.keys);
      require(k.secret.s.params()->same_ring(*scheme.ring), ErrorKind::kParameter,
              "keys in " + config.keys + " are for a different ring");
      return k.secret;
    }
    ChaChaStream rng(config.seed);
    return keygen(scheme, rng).secret;
  });
  const Partition partition = stage("partition", [&] {
    const Dataset data = config.dataset.empty()
                             ? make_synth(parse_synth_spec(config.synth), config.seed)
                             : load_dataset(config.dataset);
    return run_partition(data, config.partition, config.partition_spec());
  });

  std::vector<ClientOutcome> outcomes(config.k);
  stage("protocol", [&] {
    ServerConfig server_config{config.k, config.grid, scheme};
    ServerRunOptions run;
    run.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config.timeout * 1000.0));
    std::unique_ptr<Listener> listener;
    std::function<std::unique_ptr<Connection>()> connect;
    if (config.transport == "tcp") {
      auto tcp = std::make_unique<TcpListener>(parse_endpoint(config.address));
      Endpoint target = parse_endpoint(config.address);
      target.port = tcp->port();
      if (target.host == "0.0.0.0") target.host = "127.0.0.1";
      connect = [target] { return tcp_connect(target); };
      listener = std::move(tcp);
    } else {
      auto hub = std::make_unique<LoopbackHub>();
      connect = [h = hub.get()] { return h->connect(); };
      listener = std::move(hub);
    }
    auto server = std::async(std::launch::async,
                             [&] { return run_server(*listener, server_config, run); });
    std::vector<std::thread> clients;
    for (std::uint32_t i = 0; i < config.k; ++i) {
      clients.emplace_back([&, i] {
        try {
          auto conn = connect();
          outcomes[i] = run_client(*conn, make_client_session(i, partition.clients[i], secret,
                                                              config.seed));
        } catch (const Error& e) {
          outcomes[i].status = exit_code(e.kind());
          outcomes[i].diagnostic = "client " + std::to_string(i) + ": " + e.what();
        }
      });
    }
    for (auto& t : clients) t.join();
    const ServerOutcome s = server.get();
    if (s.status != 0) fail(ErrorKind::kProtocol, "server: " + s.diagnostic);
    for (const auto& o : outcomes) {
      if (o.status != 0) fail(ErrorKind::kProtocol, o.diagnostic);
    }
    return 0;
  });

  return stage("report", [&] {
    std::map<std::uint32_t, Ecdf> locals;
    for (const auto& o : outcomes) {
      require(o.session.central == outcomes.front().session.central, ErrorKind::kProtocol,
              "clients decrypted different central CDFs");
      locals.emplace(o.session.client_id, *o.session.submitted);
    }
    return build_report(metadata_for(scheme, config.k, outcomes.front().session, config.seed),
                        std::move(locals), *outcomes.front().session.central);
  });
}

int cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  stage("output", [&] {
    ensure_dir(out_dir);
    return 0;
  });
  const NonIidReport report = simulate(config);
  stage("report", [&] {
    write_text_file((fs::path(out_dir) / "run.cfg").string(), to_text(config));
    emit_report(report, ReportFormat::kCsv, out_dir, out);
    emit_report(report, ReportFormat::kSvg, out_dir, out);
    save_artifacts(report, out_dir);
    return 0;
  });
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  spdlog::info("simulation finished in {} ms", ms);
  out << render_text(report);
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format, std::ostream& out) {
  const ReportFormat f = parse_report_format(format);
  const NonIidReport report = load_artifacts(in_dir);
  emit_report(report, f, in_dir, out);
  if (f != ReportFormat::kText) out << "wrote " << format << " report to " << in_dir << "\n";
  return 0;
}

}  // namespace fcdf::app
