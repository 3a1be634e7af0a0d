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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "app.hpp"
#include "fcdf/fcdf.hpp"
#include "oracles.hpp"

namespace fcdf {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::vector<double> random_unit_vector(std::size_t len, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(len);
  for (auto& x : v) x = u(rng);
  return v;
}

// 1: single-ciphertext round trip at default parameters.
Verdict round_trip() {
  const auto start = Clock::now();
  const SchemeParams scheme = SchemeParams::defaults();
  ChaChaStream key_rng(101);
  const KeyPair keys = keygen(scheme, key_rng);
  ChaChaStream enc(102);
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t len = 1 + rng() % scheme.ring->n();
    const PlainVector v{random_unit_vector(len, rng)};
    const PlainVector back = decrypt(keys.secret, encrypt(keys.secret, v, scheme, enc), scheme);
    worst = std::max(worst, oracle::max_abs_diff(v.values, back.values));
  }
  const double secs = seconds_since(start);
  return {worst <= std::ldexp(1.0, -15) && secs < 60.0,
          "max error " + std::to_string(worst) + ", " + std::to_string(secs) + " s"};
}

// 2: homomorphic average for several client counts.
Verdict averaging() {
  const auto start = Clock::now();
  const SchemeParams scheme = SchemeParams::defaults();
  ChaChaStream key_rng(201);
  const KeyPair keys = keygen(scheme, key_rng);
  ChaChaStream enc(202);
  std::mt19937_64 rng(203);
  double worst = 0.0;
  for (std::uint32_t k : {2u, 4u, 16u, 64u}) {
    for (int t = 0; t < 100; ++t) {
      std::vector<double> mean(kDefaultGridSize, 0.0);
      std::vector<Ciphertext> cts;
      for (std::uint32_t c = 0; c < k; ++c) {
        const PlainVector v{random_unit_vector(kDefaultGridSize, rng)};
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v.values[i] / k;
        cts.push_back(encrypt(keys.secret, v, scheme, enc));
      }
      std::vector<double> avg = decrypt(keys.secret, ct_sum(cts, scheme), scheme).values;
      for (auto& x : avg) x /= k;
      worst = std::max(worst, oracle::max_abs_diff(avg, mean));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 120.0,
          "max error " + std::to_string(worst) + ", " + std::to_string(secs) + " s"};
}

// 3: noise headroom after the largest supported sum.
Verdict depth() {
  const SchemeParams scheme = SchemeParams::defaults();
  ChaChaStream key_rng(301);
  const KeyPair keys = keygen(scheme, key_rng);
  ChaChaStream enc(302);
  std::mt19937_64 rng(303);
  const std::uint32_t fold = 1024;
  if (max_sum_depth(scheme) < fold) return {false, "max_sum_depth " + std::to_string(max_sum_depth(scheme))};
  double min_budget = 1e300;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> expected(kDefaultGridSize, 0.0);
    std::vector<Ciphertext> cts;
    cts.reserve(fold);
    for (std::uint32_t c = 0; c < fold; ++c) {
      PlainVector v{random_unit_vector(kDefaultGridSize, rng)};
      for (auto& x : v.values) x = std::nearbyint(x * scheme.scale()) / scheme.scale();
      for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += v.values[i];
      cts.push_back(encrypt(keys.secret, v, scheme, enc));
    }
    const Ciphertext sum = ct_sum(cts, scheme);
    const PlainVector target{expected, static_cast<double>(fold)};
    min_budget = std::min(min_budget, noise_budget(keys.secret, sum, target, scheme));
    worst = std::max(worst, oracle::max_abs_diff(decrypt(keys.secret, sum, scheme).values, expected));
  }
  return {min_budget > 0.0 && worst <= 1e-9,
          "min noise budget " + std::to_string(min_budget) + " bits, max error " + std::to_string(worst)};
}

// 4: ring multiplication against schoolbook, NTT round trips.
Verdict ring() {
  const auto start = Clock::now();
  std::mt19937_64 rng(401);
  std::size_t mismatches = 0;
  for (std::size_t n : {16u, 32u, 64u}) {
    const RingParamsPtr p = make_params(n, 54);
    std::uniform_int_distribution<std::uint64_t> coeff(0, p->q() - 1);
    for (int t = 0; t < 500; ++t) {
      std::vector<std::uint64_t> a(n), b(n);
      for (auto& x : a) x = coeff(rng);
      for (auto& x : b) x = coeff(rng);
      const RingPoly product = poly_mul(RingPoly::from_coeffs(p, a), RingPoly::from_coeffs(p, b));
      const auto got = product.coeffs();
      const auto want = oracle::schoolbook_negacyclic(a, b, p->q());
      if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) ++mismatches;
    }
  }
  const RingParamsPtr big = make_params(4096, 54);
  std::uniform_int_distribution<std::uint64_t> coeff(0, big->q() - 1);
  std::size_t round_trip_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::uint64_t> a(4096);
    for (auto& x : a) x = coeff(rng);
    const RingPoly poly = RingPoly::from_coeffs(big, a);
    if (!(ntt_inverse(ntt_forward(poly)) == poly)) ++round_trip_failures;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && round_trip_failures == 0 && secs < 30.0,
          std::to_string(mismatches) + " product mismatches, " + std::to_string(round_trip_failures) +
              " round-trip failures, " + std::to_string(secs) + " s"};
}

// 5: eCDF evaluation against direct counting.
Verdict ecdf() {
  std::mt19937_64 rng(501);
  std::size_t failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const bool labels = t % 2 == 0;
    const std::size_t n = 1 + rng() % 200;
    Dataset d;
    std::vector<std::vector<double>> columns;
    if (labels) {
      std::vector<std::int64_t> l(n);
      for (auto& x : l) x = static_cast<std::int64_t>(rng() % 20) - 5;
      d = Dataset::from_labels(l);
      columns.emplace_back(l.begin(), l.end());
    } else {
      const std::size_t dims = 1 + rng() % 4;
      std::normal_distribution<double> z(0.0, 1.0);
      std::vector<double> values(n * dims);
      for (auto& x : values) x = std::round(z(rng) * 4.0) / 4.0;  // forces ties
      d = Dataset::from_features(values, dims, std::vector<std::int64_t>(n, 0));
      for (std::size_t k = 0; k < dims; ++k) {
        std::vector<double> col;
        for (std::size_t i = 0; i < n; ++i) col.push_back(values[i * dims + k]);
        columns.push_back(col);
      }
    }
    const DistributionPolicy policy = merge_domains(std::vector{local_domain(d)}, 1 + rng() % 120);
    const Ecdf e = ecdf_eval(d, policy);
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (oracle::max_abs_diff(e.values()[k], oracle::counting_ecdf(columns[k], policy.grids[k])) > 1e-12) {
        ++failures;
      }
    }
  }
  return {failures == 0, std::to_string(failures) + " of 1000 instances disagree"};
}

// 6: end-to-end loopback aggregation, clients started in shuffled order.
Verdict federated_average() {
  const SchemeParams scheme = SchemeParams::defaults();
  double worst = 0.0;
  std::string problems;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ChaChaStream key_rng(seed);
    const KeyPair keys = keygen(scheme, key_rng);
    PartitionSpec spec;
    spec.k = 4;
    spec.seed = seed;
    const Partition part = dirichlet_label_partition(synth_labels(100, 500), spec);
    std::vector<std::uint32_t> order = {0, 1, 2, 3};
    std::mt19937_64 shuffle_rng(seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LoopbackHub hub;
    auto server = std::async(std::launch::async, [&] {
      return run_server(hub, ServerConfig{4, kDefaultGridSize, scheme},
                        ServerRunOptions{std::chrono::milliseconds(60000)});
    });
    std::vector<ClientOutcome> outcomes(4);
    std::vector<std::thread> threads;
    for (std::uint32_t c : order) {
      threads.emplace_back([&, c] {
        auto conn = hub.connect();
        outcomes[c] = run_client(*conn, make_client_session(c, part.clients[c], keys.secret, seed));
      });
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    for (auto& t : threads) t.join();
    const ServerOutcome s = server.get();
    if (s.status != 0) {
      problems += " seed " + std::to_string(seed) + ": " + s.diagnostic;
      continue;
    }
    for (std::uint32_t c = 0; c < 4; ++c) {
      const auto& central = outcomes[c].session.central;
      if (outcomes[c].status != 0 || !central) {
        problems += " client " + std::to_string(c) + " failed";
        continue;
      }
      const auto& grid = central->policy().grids[0];
      std::vector<double> expected(grid.size(), 0.0);
      for (const auto& client : part.clients) {
        std::vector<double> samples(client.labels().begin(), client.labels().end());
        const auto f = client.size() == 0 ? std::vector<double>(grid.size(), 0.0)
                                          : oracle::counting_ecdf(samples, grid);
        for (std::size_t j = 0; j < grid.size(); ++j) expected[j] += f[j] / 4.0;
      }
      worst = std::max(worst, oracle::max_abs_diff(central->values()[0], expected));
    }
  }
  return {problems.empty() && worst <= 1e-4, "max error " + std::to_string(worst) + problems};
}

bool monotone_to_one(const Ecdf& e) {
  for (const auto& v : e.values()) {
    if (!std::is_sorted(v.begin(), v.end()) || v.empty() || v.back() != 1.0) return false;
  }
  return true;
}

// 7: Dirichlet(0.1) label skew leaves some client with poor label coverage.
Verdict label_skew() {
  int skewed = 0;
  bool shapes_ok = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    app::RunConfig c;
    c.seed = seed;
    const NonIidReport r = app::simulate(c);
    double min_cov = 1.0;
    for (const auto& row : r.rows) min_cov = std::min(min_cov, row.coverage);
    skewed += min_cov < 0.8 ? 1 : 0;
    shapes_ok = shapes_ok && monotone_to_one(r.central);
    for (const auto& [id, local] : r.locals) shapes_ok = shapes_ok && monotone_to_one(local);
  }
  return {skewed >= 8 && shapes_ok,
          std::to_string(skewed) + " of 10 seeds below 0.8 coverage, CDF shapes " +
              (shapes_ok ? "valid" : "INVALID")};
}

double mean_ks(const NonIidReport& r) {
  double sum = 0.0;
  for (const auto& row : r.rows) sum += row.ks;
  return sum / static_cast<double>(r.rows.size());
}

app::RunConfig feature_config(std::uint64_t seed, app::PartitionMode mode) {
  app::RunConfig c;
  c.k = 2;
  c.synth = "features:classes=20,per=50,dims=12,sep=2";
  c.partition = mode;
  c.skew = 0.75;
  c.size = 300;
  c.seed = seed;
  return c;
}

// 8: feature skew diverges more than an IID split of the same data.
Verdict feature_skew() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double skew = mean_ks(app::simulate(feature_config(seed, app::PartitionMode::kSkew)));
    const double iid = mean_ks(app::simulate(feature_config(seed, app::PartitionMode::kIid)));
    wins += skew > iid ? 1 : 0;
    if (seed == 1) detail = " (seed 1: skew " + std::to_string(skew) + ", iid " + std::to_string(iid) + ")";
  }
  return {wins >= 9, std::to_string(wins) + " of 10 seeds" + detail};
}

Message random_message(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  switch (rng() % 5) {
    case 0: {
      HelloMsg m;
      m.client_id = static_cast<std::uint32_t>(rng());
      m.domain.kind = DataKind::kLabels;
      for (std::size_t i = rng() % 40; i > 0; --i) m.domain.labels.push_back(static_cast<std::int64_t>(rng()));
      return m;
    }
    case 1: {
      PolicyMsg m;
      m.k = static_cast<std::uint32_t>(rng() % 100);
      m.scheme = SchemeProfile::of(SchemeParams::defaults());
      m.policy.kind = DataKind::kFeatures;
      for (std::size_t d = 1 + rng() % 4; d > 0; --d) {
        std::vector<double> g(1 + rng() % 30);
        for (auto& x : g) x = u(rng);
        m.policy.grids.push_back(g);
      }
      return m;
    }
    case 2: {
      CdfSubmitMsg m{static_cast<std::uint32_t>(rng()), {}};
      for (std::size_t i = rng() % 3; i > 0; --i) {
        Bytes b(rng() % 200);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        m.chunks.push_back({static_cast<std::uint32_t>(rng()), b});
      }
      return m;
    }
    case 3:
      return AggResultMsg{static_cast<std::uint32_t>(rng()), {}};
    default:
      return make_error(ErrorCode::kOutOfPhase, std::string(rng() % 50, 'e'));
  }
}

bool same_state(const ServerSession& a, const ServerSession& b) {
  return a.phase == b.phase && a.domains == b.domains && a.submissions == b.submissions &&
         a.policy == b.policy;
}

bool is_error_reply(const ServerStep& st) {
  return st.out.size() == 1 && std::holds_alternative<ErrorMsg>(st.out[0].message);
}

// 9: framing, protocol misuse, transport equivalence.
Verdict protocol() {
  std::mt19937_64 rng(901);
  int frame_failures = 0;
  for (int t = 0; t < 500; ++t) {
    const Message m = random_message(rng);
    if (!(deserialize(serialize(m)) == m)) ++frame_failures;
  }

  const SchemeParams scheme = SchemeParams::make(make_params(16, 40));
  ChaChaStream key_rng(902);
  const KeyPair keys = keygen(scheme, key_rng);
  int misuse_failures = 0;
  ServerSession s = make_server_session(ServerConfig{2, 10, scheme});
  const Dataset d0 = Dataset::from_labels({1, 2, 3});
  ClientStep c0 = client_start(make_client_session(0, d0, keys.secret, 1));
  const Message hello0 = c0.out.at(0);
  ServerStep st = server_step(s, hello0);
  s = st.session;
  auto expect_rejected = [&](const Message& m) {
    const ServerStep r = server_step(s, m);
    if (!is_error_reply(r) || !same_state(r.session, s)) ++misuse_failures;
  };
  expect_rejected(hello0);                                   // duplicate HELLO
  expect_rejected(CdfSubmitMsg{0, {}});                      // submit before policy
  expect_rejected(AggResultMsg{2, {}});                      // server-bound AGG_RESULT
  expect_rejected(PolicyMsg{{}, 2, SchemeProfile::of(scheme)});  // server-bound POLICY
  const ClientStep early = client_step(c0.session, AggResultMsg{2, {}});
  if (early.out.empty() || !std::holds_alternative<ErrorMsg>(early.out[0]) ||
      early.session.phase != ClientPhase::kAborted) {
    ++misuse_failures;
  }

  app::RunConfig c;
  c.k = 2;
  c.seed = 7;
  const NonIidReport loop = app::simulate(c);
  c.transport = "tcp";
  c.address = "127.0.0.1:0";
  const NonIidReport tcp = app::simulate(c);
  const bool identical = render_csv(loop) == render_csv(tcp) && cdf_to_csv(loop.central) == cdf_to_csv(tcp.central);

  return {frame_failures == 0 && misuse_failures == 0 && identical,
          std::to_string(frame_failures) + " frame failures, " + std::to_string(misuse_failures) +
              " misuse cases mishandled, transports " + (identical ? "identical" : "DIFFER")};
}

// 10: wall-clock budgets.
Verdict performance() {
  const auto start = Clock::now();
  app::RunConfig c;
  c.seed = 1;
  app::simulate(c);
  const double sim_secs = seconds_since(start);

  const RingParamsPtr p = make_params(4096, 54);
  ChaChaStream rng(1001);
  const RingPoly a = sample_uniform(p, rng);
  const RingPoly b = sample_uniform(p, rng);
  std::vector<double> ms;
  for (int i = 0; i < 50; ++i) {
    const auto t0 = Clock::now();
    const RingPoly r = poly_mul(a, b);
    ms.push_back(seconds_since(t0) * 1000.0);
    if (r.coeffs().empty()) return {false, "empty product"};
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  return {sim_secs < 5.0 && median < 5.0,
          "label simulate " + std::to_string(sim_secs) + " s, poly_mul median " + std::to_string(median) + " ms"};
}

}  // namespace
}  // namespace fcdf

int main() {
  const std::vector<std::pair<std::string, std::function<fcdf::Verdict()>>> criteria = {
      {"encrypt/decrypt round trip", fcdf::round_trip},
      {"homomorphic average", fcdf::averaging},
      {"1024-fold sum noise budget", fcdf::depth},
      {"ring arithmetic vs oracle", fcdf::ring},
      {"eCDF vs counting oracle", fcdf::ecdf},
      {"loopback central CDF", fcdf::federated_average},
      {"label skew coverage", fcdf::label_skew},
      {"feature skew vs IID", fcdf::feature_skew},
      {"protocol framing and misuse", fcdf::protocol},
      {"performance budgets", fcdf::performance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    fcdf::Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
