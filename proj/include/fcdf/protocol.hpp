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

#ifndef FCDF_PROTOCOL_HPP_
#define FCDF_PROTOCOL_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fcdf/bytes.hpp"
#include "fcdf/ecdf.hpp"
#include "fcdf/error.hpp"
#include "fcdf/fhe.hpp"
#include "fcdf/random.hpp"

// Wire protocol between one server and k clients.
//
//   client                         server
//   HELLO(id, domain)     ---->    collects k domains, merges policy
//                         <----    POLICY(grid, k, scheme)
//   CDF_SUBMIT(id, cts)   ---->    collects k submissions, sums per chunk
//                         <----    AGG_RESULT(k, cts)
//
// Frame: "FCDF" | version 0x01 | type | payload length (u32 BE) | payload.
// Header and payload integers are big-endian; serialized ciphertexts inside
// payloads keep their own little-endian layout.

namespace fcdf {

inline constexpr char kFrameMagic[] = "FCDF";
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;
inline constexpr std::uint16_t kDefaultPort = 7001;

enum class MessageType : std::uint8_t {
  kHello = 1,
  kPolicy = 2,
  kCdfSubmit = 3,
  kAggResult = 4,
  kError = 5,
};

enum class ErrorCode : std::uint32_t {
  kOutOfPhase = 1,
  kDuplicateClient = 2,
  kTooManyClients = 3,
  kParamMismatch = 4,
  kMalformed = 5,
  kKindMismatch = 6,
  kBudget = 7,
  kUnknownClient = 8,
  kAborted = 9,
};

/// Scheme parameters as they travel in POLICY.
struct SchemeProfile {
  std::uint32_t n = 0;
  std::uint64_t q = 0;
  std::uint8_t scale_bits = 0;
  std::uint8_t plain_modulus_bits = 0;

  static SchemeProfile of(const SchemeParams& s) {
    return {static_cast<std::uint32_t>(s.ring->n()), s.ring->q(),
            static_cast<std::uint8_t>(s.scale_bits),
            static_cast<std::uint8_t>(s.plain_modulus_bits)};
  }
  friend bool operator==(const SchemeProfile&, const SchemeProfile&) = default;
};

struct CiphertextChunk {
  std::uint32_t index = 0;
  Bytes ciphertext;  // serialize_ciphertext() output
  friend bool operator==(const CiphertextChunk&, const CiphertextChunk&) = default;
};

struct HelloMsg {
  std::uint32_t client_id = 0;
  DomainSummary domain;
  friend bool operator==(const HelloMsg&, const HelloMsg&) = default;
};

struct PolicyMsg {
  DistributionPolicy policy;
  std::uint32_t k = 0;
  SchemeProfile scheme;
  friend bool operator==(const PolicyMsg&, const PolicyMsg&) = default;
};

struct CdfSubmitMsg {
  std::uint32_t client_id = 0;
  std::vector<CiphertextChunk> chunks;
  friend bool operator==(const CdfSubmitMsg&, const CdfSubmitMsg&) = default;
};

struct AggResultMsg {
  std::uint32_t k = 0;
  std::vector<CiphertextChunk> chunks;
  friend bool operator==(const AggResultMsg&, const AggResultMsg&) = default;
};

struct ErrorMsg {
  std::uint32_t code = 0;
  std::string text;
  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Message = std::variant<HelloMsg, PolicyMsg, CdfSubmitMsg, AggResultMsg, ErrorMsg>;

inline MessageType type_of(const Message& m) {
  return static_cast<MessageType>(m.index() + 1);
}

inline std::string to_string(MessageType t) {
  switch (t) {
    case MessageType::kHello: return "HELLO";
    case MessageType::kPolicy: return "POLICY";
    case MessageType::kCdfSubmit: return "CDF_SUBMIT";
    case MessageType::kAggResult: return "AGG_RESULT";
    case MessageType::kError: return "ERROR";
  }
  return "UNKNOWN";
}

inline Message make_error(ErrorCode code, std::string text) {
  return ErrorMsg{static_cast<std::uint32_t>(code), std::move(text)};
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void put_domain(ByteWriter& w, const DomainSummary& d) {
  w.put_u8(static_cast<std::uint8_t>(d.kind));
  if (d.kind == DataKind::kLabels) {
    w.put_u32_be(static_cast<std::uint32_t>(d.labels.size()));
    for (std::int64_t l : d.labels) w.put_u64_be(static_cast<std::uint64_t>(l));
  } else {
    w.put_u32_be(static_cast<std::uint32_t>(d.ranges.size()));
    for (const auto& [lo, hi] : d.ranges) {
      w.put_f64_be(lo);
      w.put_f64_be(hi);
    }
  }
}

inline DataKind get_kind(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint8_t k = r.get_u8();
  if (k != 1 && k != 2) throw FramingError(at, "unknown data kind " + std::to_string(k));
  return static_cast<DataKind>(k);
}

// Guards element counts against the bytes actually present.
inline std::uint32_t get_count(ByteReader& r, std::size_t min_element_size) {
  const std::size_t at = r.offset();
  const std::uint32_t count = r.get_u32_be();
  if (static_cast<std::uint64_t>(count) * min_element_size > r.remaining()) {
    throw FramingError(at, "element count " + std::to_string(count) + " exceeds payload");
  }
  return count;
}

inline DomainSummary get_domain(ByteReader& r) {
  DomainSummary d;
  d.kind = get_kind(r);
  if (d.kind == DataKind::kLabels) {
    const std::uint32_t count = get_count(r, 8);
    d.labels.resize(count);
    for (auto& l : d.labels) l = static_cast<std::int64_t>(r.get_u64_be());
  } else {
    const std::uint32_t count = get_count(r, 16);
    d.ranges.resize(count);
    for (auto& [lo, hi] : d.ranges) {
      lo = r.get_f64_be();
      hi = r.get_f64_be();
    }
  }
  return d;
}

inline void put_chunks(ByteWriter& w, const std::vector<CiphertextChunk>& chunks) {
  w.put_u32_be(static_cast<std::uint32_t>(chunks.size()));
  for (const auto& c : chunks) {
    w.put_u32_be(c.index);
    w.put_u32_be(static_cast<std::uint32_t>(c.ciphertext.size()));
    w.put_raw(c.ciphertext);
  }
}

inline std::vector<CiphertextChunk> get_chunks(ByteReader& r) {
  const std::uint32_t count = get_count(r, 8);
  std::vector<CiphertextChunk> chunks(count);
  for (auto& c : chunks) {
    c.index = r.get_u32_be();
    const std::uint32_t len = get_count(r, 1);
    auto raw = r.get_raw(len);
    c.ciphertext.assign(raw.begin(), raw.end());
  }
  return chunks;
}

inline Bytes encode_payload(const Message& m) {
  ByteWriter w;
  std::visit(
      [&w](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, HelloMsg>) {
          w.put_u32_be(msg.client_id);
          put_domain(w, msg.domain);
        } else if constexpr (std::is_same_v<T, PolicyMsg>) {
          w.put_u32_be(msg.k);
          w.put_u32_be(msg.scheme.n);
          w.put_u64_be(msg.scheme.q);
          w.put_u8(msg.scheme.scale_bits);
          w.put_u8(msg.scheme.plain_modulus_bits);
          w.put_u8(static_cast<std::uint8_t>(msg.policy.kind));
          w.put_u32_be(static_cast<std::uint32_t>(msg.policy.grids.size()));
          for (const auto& g : msg.policy.grids) {
            w.put_u32_be(static_cast<std::uint32_t>(g.size()));
            for (double x : g) w.put_f64_be(x);
          }
        } else if constexpr (std::is_same_v<T, CdfSubmitMsg>) {
          w.put_u32_be(msg.client_id);
          put_chunks(w, msg.chunks);
        } else if constexpr (std::is_same_v<T, AggResultMsg>) {
          w.put_u32_be(msg.k);
          put_chunks(w, msg.chunks);
        } else {
          w.put_u32_be(msg.code);
          w.put_u32_be(static_cast<std::uint32_t>(msg.text.size()));
          w.put_raw(msg.text);
        }
      },
      m);
  return w.take();
}

inline Message decode_payload(MessageType type, ByteReader& r) {
  switch (type) {
    case MessageType::kHello: {
      HelloMsg m;
      m.client_id = r.get_u32_be();
      m.domain = get_domain(r);
      return m;
    }
    case MessageType::kPolicy: {
      PolicyMsg m;
      m.k = r.get_u32_be();
      m.scheme.n = r.get_u32_be();
      m.scheme.q = r.get_u64_be();
      m.scheme.scale_bits = r.get_u8();
      m.scheme.plain_modulus_bits = r.get_u8();
      m.policy.kind = get_kind(r);
      const std::uint32_t dims = get_count(r, 4);
      m.policy.grids.resize(dims);
      for (auto& g : m.policy.grids) {
        g.resize(get_count(r, 8));
        for (auto& x : g) x = r.get_f64_be();
      }
      return m;
    }
    case MessageType::kCdfSubmit: {
      CdfSubmitMsg m;
      m.client_id = r.get_u32_be();
      m.chunks = get_chunks(r);
      return m;
    }
    case MessageType::kAggResult: {
      AggResultMsg m;
      m.k = r.get_u32_be();
      m.chunks = get_chunks(r);
      return m;
    }
    case MessageType::kError: {
      ErrorMsg m;
      m.code = r.get_u32_be();
      m.text = r.get_string(get_count(r, 1));
      return m;
    }
  }
  throw FramingError(5, "unknown message type");
}

}  // namespace detail

inline Bytes serialize(const Message& m) {
  const Bytes payload = detail::encode_payload(m);
  require(payload.size() <= kMaxPayload, ErrorKind::kContract, "message exceeds 64 MiB frame cap");
  ByteWriter w;
  w.put_raw(std::string_view(kFrameMagic, 4));
  w.put_u8(kFrameVersion);
  w.put_u8(static_cast<std::uint8_t>(type_of(m)));
  w.put_u32_be(static_cast<std::uint32_t>(payload.size()));
  w.put_raw(payload);
  return w.take();
}

struct FrameHeader {
  MessageType type;
  std::uint32_t payload_size;
};

/// Validates the fixed 10-byte header and returns type and payload length.
inline FrameHeader parse_frame_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (std::size_t i = 0; i < 4; ++i) {
    if (r.get_u8() != static_cast<std::uint8_t>(kFrameMagic[i])) {
      throw FramingError(i, "bad frame magic");
    }
  }
  if (r.get_u8() != kFrameVersion) throw FramingError(4, "unsupported frame version");
  const std::uint8_t type = r.get_u8();
  if (type < 1 || type > 5) throw FramingError(5, "unknown message type " + std::to_string(type));
  const std::uint32_t len = r.get_u32_be();
  if (len > kMaxPayload) throw FramingError(6, "payload length " + std::to_string(len) +
                                                   " exceeds 64 MiB cap");
  return {static_cast<MessageType>(type), len};
}

inline Message deserialize(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = parse_frame_header(bytes);
  if (bytes.size() - kFrameHeaderSize < h.payload_size) {
    throw FramingError(bytes.size(), "truncated payload: header declares " +
                                         std::to_string(h.payload_size) + " bytes");
  }
  if (bytes.size() - kFrameHeaderSize > h.payload_size) {
    throw FramingError(kFrameHeaderSize + h.payload_size, "trailing bytes after payload");
  }
  ByteReader r(bytes.subspan(kFrameHeaderSize), kFrameHeaderSize);
  Message m = detail::decode_payload(h.type, r);
  if (!r.done()) throw FramingError(r.offset(), "payload longer than its contents");
  return m;
}

// ---------------------------------------------------------------------------
// Chunking of flattened CDF vectors into ring-sized ciphertexts.

inline std::size_t chunk_count(std::size_t values, std::size_t slots) {
  return (values + slots - 1) / slots;
}

inline std::size_t chunk_slots(std::size_t values, std::size_t slots, std::size_t index) {
  return std::min(slots, values - index * slots);
}

// ---------------------------------------------------------------------------
// Server state machine. The server holds no key material.

enum class ServerPhase { kCollectDomains, kPolicySent, kCollectCiphertexts, kDone };

inline std::string to_string(ServerPhase p) {
  switch (p) {
    case ServerPhase::kCollectDomains: return "collect-domains";
    case ServerPhase::kPolicySent: return "policy-sent";
    case ServerPhase::kCollectCiphertexts: return "collect-ciphertexts";
    case ServerPhase::kDone: return "done";
  }
  return "unknown";
}

struct ServerConfig {
  std::uint32_t k = 1;
  std::size_t grid_size = kDefaultGridSize;
  SchemeParams scheme;
};

struct ServerSession {
  ServerConfig config;
  ServerPhase phase = ServerPhase::kCollectDomains;
  std::map<std::uint32_t, DomainSummary> domains;
  std::map<std::uint32_t, std::vector<Ciphertext>> submissions;
  std::optional<DistributionPolicy> policy;
};

enum class Route { kReply, kClient };

struct Outgoing {
  Route route = Route::kReply;
  std::uint32_t client_id = 0;  // for Route::kClient
  Message message;
};

struct ServerStep {
  ServerSession session;
  std::vector<Outgoing> out;
};

inline ServerSession make_server_session(ServerConfig config) {
  require(config.k >= 1, ErrorKind::kValidation, "server needs k >= 1");
  require(config.k <= max_sum_depth(config.scheme), ErrorKind::kValidation,
          "k exceeds the scheme's summation capacity of " +
              std::to_string(max_sum_depth(config.scheme)));
  ServerSession s;
  s.config = std::move(config);
  return s;
}

namespace detail {

inline ServerStep reject(ServerSession s, ErrorCode code, std::string text) {
  ServerStep step{std::move(s), {}};
  step.out.push_back({Route::kReply, 0, make_error(code, std::move(text))});
  return step;
}

inline void broadcast(ServerStep& step, const Message& m) {
  for (const auto& [id, domain] : step.session.domains) step.out.push_back({Route::kClient, id, m});
}

inline ServerStep on_hello(ServerSession s, const HelloMsg& m) {
  if (s.phase != ServerPhase::kCollectDomains) {
    const bool extra = !s.domains.contains(m.client_id);
    return reject(std::move(s), extra ? ErrorCode::kTooManyClients : ErrorCode::kOutOfPhase,
                  extra ? "federation already has its clients" : "HELLO after policy was sent");
  }
  if (s.domains.contains(m.client_id)) {
    return reject(std::move(s), ErrorCode::kDuplicateClient,
                  "client id " + std::to_string(m.client_id) + " already registered");
  }
  if (!s.domains.empty() && (s.domains.begin()->second.kind != m.domain.kind ||
                             s.domains.begin()->second.dims() != m.domain.dims())) {
    return reject(std::move(s), ErrorCode::kKindMismatch,
                  "domain kind or dimension differs from other clients");
  }
  if (m.domain.kind == DataKind::kLabels ? m.domain.labels.empty() : m.domain.ranges.empty()) {
    return reject(std::move(s), ErrorCode::kMalformed, "empty domain summary");
  }
  s.domains.emplace(m.client_id, m.domain);
  ServerStep step{std::move(s), {}};
  if (step.session.domains.size() < step.session.config.k) return step;

  std::vector<DomainSummary> all;
  for (const auto& [id, d] : step.session.domains) all.push_back(d);
  try {
    step.session.policy = merge_domains(all, step.session.config.grid_size);
  } catch (const Error& e) {
    step.session.domains.erase(m.client_id);
    return reject(std::move(step.session), ErrorCode::kKindMismatch, e.what());
  }
  step.session.phase = ServerPhase::kPolicySent;
  broadcast(step, PolicyMsg{*step.session.policy, step.session.config.k,
                            SchemeProfile::of(step.session.config.scheme)});
  return step;
}

inline ServerStep on_submit(ServerSession s, const CdfSubmitMsg& m) {
  if (s.phase != ServerPhase::kPolicySent && s.phase != ServerPhase::kCollectCiphertexts) {
    return reject(std::move(s), ErrorCode::kOutOfPhase, "CDF_SUBMIT before policy or after aggregation");
  }
  if (!s.domains.contains(m.client_id)) {
    return reject(std::move(s), ErrorCode::kUnknownClient,
                  "client id " + std::to_string(m.client_id) + " never said HELLO");
  }
  if (s.submissions.contains(m.client_id)) {
    return reject(std::move(s), ErrorCode::kDuplicateClient,
                  "client id " + std::to_string(m.client_id) + " already submitted");
  }
  const SchemeParams scheme = s.config.scheme;
  const std::size_t total = s.policy->total_points();
  const std::size_t expected = chunk_count(total, scheme.slots());
  if (m.chunks.size() != expected) {
    return reject(std::move(s), ErrorCode::kMalformed,
                  "expected " + std::to_string(expected) + " ciphertext chunks, got " +
                      std::to_string(m.chunks.size()));
  }
  std::vector<Ciphertext> cts(expected);
  std::vector<bool> seen(expected, false);
  for (const auto& chunk : m.chunks) {
    if (chunk.index >= expected || seen[chunk.index]) {
      return reject(std::move(s), ErrorCode::kMalformed, "bad or repeated chunk index");
    }
    seen[chunk.index] = true;
    try {
      cts[chunk.index] = deserialize_ciphertext(chunk.ciphertext, scheme.ring);
    } catch (const Error& e) {
      const bool params = e.kind() == ErrorKind::kContract || e.kind() == ErrorKind::kParameter;
      return reject(std::move(s), params ? ErrorCode::kParamMismatch : ErrorCode::kMalformed,
                    e.what());
    }
    const Ciphertext& ct = cts[chunk.index];
    if (ct.slot_count != chunk_slots(total, scheme.slots(), chunk.index) || ct.sum_depth != 1) {
      return reject(std::move(s), ErrorCode::kMalformed,
                    "chunk " + std::to_string(chunk.index) + " has wrong slot count or depth");
    }
  }
  s.submissions.emplace(m.client_id, std::move(cts));
  s.phase = ServerPhase::kCollectCiphertexts;
  ServerStep step{std::move(s), {}};
  if (step.session.submissions.size() < step.session.config.k) return step;

  // Sums run in client-id order; modular addition makes the result
  // independent of arrival order anyway.
  AggResultMsg agg{step.session.config.k, {}};
  try {
    for (std::uint32_t c = 0; c < expected; ++c) {
      std::vector<Ciphertext> column;
      for (const auto& [id, sub] : step.session.submissions) column.push_back(sub[c]);
      agg.chunks.push_back({c, serialize_ciphertext(ct_sum(column, scheme))});
    }
  } catch (const Error& e) {
    ServerStep failed{std::move(step.session), {}};
    broadcast(failed, make_error(ErrorCode::kBudget, e.what()));
    return failed;
  }
  step.session.phase = ServerPhase::kDone;
  broadcast(step, agg);
  return step;
}

}  // namespace detail

/// Pure server transition: never mutates its input, never touches keys.
/// Illegal messages produce an ERROR reply and leave the session unchanged.
inline ServerStep server_step(ServerSession s, const Message& incoming) {
  return std::visit(
      [&s](const auto& m) -> ServerStep {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HelloMsg>) {
          return detail::on_hello(std::move(s), m);
        } else if constexpr (std::is_same_v<T, CdfSubmitMsg>) {
          return detail::on_submit(std::move(s), m);
        } else if constexpr (std::is_same_v<T, ErrorMsg>) {
          return ServerStep{std::move(s), {}};
        } else {
          return detail::reject(std::move(s), ErrorCode::kOutOfPhase,
                                to_string(type_of(Message{m})) + " is not a client message");
        }
      },
      incoming);
}

// ---------------------------------------------------------------------------
// Client state machine.

enum class ClientPhase { kIdle, kSentHello, kGotPolicy, kSubmitted, kGotAggregate, kReported, kAborted };

inline std::string to_string(ClientPhase p) {
  switch (p) {
    case ClientPhase::kIdle: return "idle";
    case ClientPhase::kSentHello: return "sent-hello";
    case ClientPhase::kGotPolicy: return "got-policy";
    case ClientPhase::kSubmitted: return "submitted";
    case ClientPhase::kGotAggregate: return "got-aggregate";
    case ClientPhase::kReported: return "reported";
    case ClientPhase::kAborted: return "aborted";
  }
  return "unknown";
}

struct ClientSession {
  std::uint32_t client_id = 0;
  Dataset dataset;
  SecretKey key;
  std::uint64_t seed = 0;  // encryption randomness, stream id = client id
  ClientPhase phase = ClientPhase::kIdle;
  std::optional<PolicyMsg> policy;
  std::optional<Ecdf> local;      // exact local eCDF
  std::optional<Ecdf> submitted;  // local eCDF on the fixed-point lattice, as encrypted
  std::optional<Ecdf> central;    // decrypted aggregate divided by k
  std::uint32_t k = 0;
  std::string abort_reason;
};

struct ClientStep {
  ClientSession session;
  std::vector<Message> out;
};

inline ClientSession make_client_session(std::uint32_t client_id, Dataset dataset, SecretKey key,
                                         std::uint64_t seed) {
  dataset.set_client_id(client_id);
  ClientSession c;
  c.client_id = client_id;
  c.dataset = std::move(dataset);
  c.key = std::move(key);
  c.seed = seed;
  return c;
}

namespace detail {

inline ClientStep abort_client(ClientSession c, ErrorCode code, std::string reason, bool notify) {
  c.phase = ClientPhase::kAborted;
  c.abort_reason = reason;
  ClientStep step{std::move(c), {}};
  if (notify) step.out.push_back(make_error(code, std::move(reason)));
  return step;
}

inline ClientStep on_policy(ClientSession c, const PolicyMsg& m) {
  try {
    m.policy.validate();
  } catch (const Error& e) {
    return abort_client(std::move(c), ErrorCode::kMalformed, e.what(), true);
  }
  if (m.policy.kind != c.dataset.kind() || m.policy.dims() != c.dataset.dims()) {
    return abort_client(std::move(c), ErrorCode::kKindMismatch,
                        "policy does not match local dataset kind/dimension", true);
  }
  c.policy = m;
  c.k = m.k;
  c.phase = ClientPhase::kGotPolicy;
  // Encrypt on the key's ring; the server rejects a ring that differs from its own.
  SchemeParams scheme;
  try {
    scheme = SchemeParams::make(c.key.s.params(), m.scheme.scale_bits, m.scheme.plain_modulus_bits);
  } catch (const Error& e) {
    return abort_client(std::move(c), ErrorCode::kParamMismatch, e.what(), true);
  }
  c.local = ecdf_eval(c.dataset, m.policy);
  const std::vector<double> flat = c.local->flatten();
  std::vector<double> quantized(flat.size());
  const double scale = static_cast<double>(scheme.scale());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    quantized[i] = static_cast<double>(round_even(flat[i] * scale)) / scale;
  }
  c.submitted = Ecdf::from_flat(m.policy, quantized, c.local->sample_count());

  ChaChaStream rng(c.seed, c.client_id);
  CdfSubmitMsg submit{c.client_id, {}};
  const std::size_t slots = scheme.slots();
  for (std::size_t i = 0; i < chunk_count(flat.size(), slots); ++i) {
    const auto first = flat.begin() + static_cast<std::ptrdiff_t>(i * slots);
    PlainVector pv{std::vector<double>(first, first + static_cast<std::ptrdiff_t>(
                                                          chunk_slots(flat.size(), slots, i))),
                   1.0};
    submit.chunks.push_back(
        {static_cast<std::uint32_t>(i), serialize_ciphertext(encrypt(c.key, pv, scheme, rng))});
  }
  c.phase = ClientPhase::kSubmitted;
  ClientStep step{std::move(c), {}};
  step.out.emplace_back(std::move(submit));
  return step;
}

inline ClientStep on_aggregate(ClientSession c, const AggResultMsg& m) {
  const std::size_t total = c.policy->policy.total_points();
  const SchemeParams scheme = SchemeParams::make(c.key.s.params(), c.policy->scheme.scale_bits,
                                                 c.policy->scheme.plain_modulus_bits);
  if (m.k != c.k || m.k == 0) {
    return abort_client(std::move(c), ErrorCode::kMalformed, "aggregate k differs from policy", false);
  }
  const std::size_t expected = chunk_count(total, scheme.slots());
  if (m.chunks.size() != expected) {
    return abort_client(std::move(c), ErrorCode::kMalformed, "aggregate has wrong chunk count", false);
  }
  std::vector<double> flat(total);
  try {
    for (const auto& chunk : m.chunks) {
      require(chunk.index < expected, ErrorKind::kProtocol, "bad aggregate chunk index");
      const Ciphertext ct = deserialize_ciphertext(chunk.ciphertext, scheme.ring);
      require(ct.sum_depth == m.k, ErrorKind::kProtocol, "aggregate depth differs from k");
      require(ct.slot_count == chunk_slots(total, scheme.slots(), chunk.index),
              ErrorKind::kProtocol, "aggregate chunk has wrong slot count");
      const PlainVector pv = decrypt(c.key, ct, scheme);
      std::copy(pv.values.begin(), pv.values.end(),
                flat.begin() + static_cast<std::ptrdiff_t>(chunk.index * scheme.slots()));
    }
    for (auto& v : flat) v /= static_cast<double>(m.k);
    c.central = Ecdf::from_flat(c.policy->policy, flat, m.k);
  } catch (const Error& e) {
    return abort_client(std::move(c), ErrorCode::kBudget,
                        std::string("undecryptable aggregate: ") + e.what(), false);
  }
  c.phase = ClientPhase::kGotAggregate;
  return ClientStep{std::move(c), {}};
}

}  // namespace detail

/// First client move: announce the local domain.
inline ClientStep client_start(ClientSession c) {
  require(c.phase == ClientPhase::kIdle, ErrorKind::kContract, "client already started");
  DomainSummary domain = local_domain(c.dataset);
  c.phase = ClientPhase::kSentHello;
  ClientStep step{std::move(c), {}};
  step.out.emplace_back(HelloMsg{step.session.client_id, std::move(domain)});
  return step;
}

/// Pure client transition. Out-of-phase messages abort the session.
inline ClientStep client_step(ClientSession c, const Message& incoming) {
  if (c.phase == ClientPhase::kAborted) return ClientStep{std::move(c), {}};
  if (const auto* err = std::get_if<ErrorMsg>(&incoming)) {
    return detail::abort_client(std::move(c), static_cast<ErrorCode>(err->code),
                                "server error " + std::to_string(err->code) + ": " + err->text,
                                false);
  }
  if (const auto* p = std::get_if<PolicyMsg>(&incoming)) {
    if (c.phase != ClientPhase::kSentHello) {
      return detail::abort_client(std::move(c), ErrorCode::kOutOfPhase, "unexpected POLICY", true);
    }
    return detail::on_policy(std::move(c), *p);
  }
  if (const auto* a = std::get_if<AggResultMsg>(&incoming)) {
    if (c.phase != ClientPhase::kSubmitted) {
      return detail::abort_client(std::move(c), ErrorCode::kOutOfPhase,
                                  "AGG_RESULT before policy/submission", true);
    }
    return detail::on_aggregate(std::move(c), *a);
  }
  return detail::abort_client(std::move(c), ErrorCode::kOutOfPhase,
                              to_string(type_of(incoming)) + " is not a server message", true);
}

}  // namespace fcdf

#endif  // FCDF_PROTOCOL_HPP_
