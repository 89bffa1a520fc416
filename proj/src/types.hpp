// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbc {

using ProcessId = uint32_t;
using Round = uint32_t;
using Value = uint8_t;  // binary: 0 or 1
using Tick = uint64_t;
using Bytes = std::vector<uint8_t>;

inline bool value_ok(uint32_t v) { return v == 0 || v == 1; }
inline Value opposite(Value v) { return static_cast<Value>(1 - v); }

// Round parity drives which value may be decided: 1 in odd rounds, 0 in even.
inline Value round_parity(Round r) { return static_cast<Value>(r % 2); }

enum class StopPolicy : uint8_t { Delayed = 0, Eager = 1, RunForever = 2 };

const char* stop_policy_name(StopPolicy p);
std::optional<StopPolicy> stop_policy_from_name(const std::string& s);

struct TimerPolicy {
  Round free_rounds = 10;   // timers of the first free_rounds rounds fire instantly
  uint64_t base = 20;
  uint64_t growth = 5;

  bool operator==(const TimerPolicy&) const = default;
};

// Timers are indexed 2r and 2r+1 within round r.  The first 2*free_rounds
// indices have zero duration; after that durations grow linearly so that
// eventually every timer outlasts the real network delay.
uint64_t timer_duration(const TimerPolicy& p, uint32_t timer_index);
inline Round timer_round(uint32_t timer_index) { return timer_index / 2; }

struct InstanceConfig {
  uint32_t n = 4;
  uint32_t t = 1;
  uint64_t instance_id = 0;
  TimerPolicy timers;
  Round coord_free_rounds = 10;
  StopPolicy stop_policy = StopPolicy::Delayed;

  uint32_t quorum() const { return n - t; }          // n - t
  uint32_t weak_threshold() const { return t + 1; }  // t + 1
  ProcessId coordinator(Round r) const { return r % n; }
  bool coordinator_active(Round r) const { return r > coord_free_rounds; }
  bool well_formed() const { return n >= 1 && n > 3 * t; }
};

struct AuxPayload {
  uint64_t instance_id = 0;
  Round round = 0;
  Value value = 0;

  auto operator<=>(const AuxPayload&) const = default;
};

// Canonical signing bytes: tag 'A', then instance, round, value, big-endian.
constexpr size_t kPayloadEncodedSize = 14;
constexpr uint8_t kPayloadTag = 0x41;

std::array<uint8_t, kPayloadEncodedSize> canonical_encode(const AuxPayload& p);
std::optional<AuxPayload> canonical_decode(std::span<const uint8_t> bytes);

struct SignedAux {
  AuxPayload payload;
  ProcessId sender = 0;
  Bytes signature;

  std::tuple<Round, Value, ProcessId> key() const {
    return {payload.round, payload.value, sender};
  }
  bool operator==(const SignedAux&) const = default;
};

// A round-r vote plus the witness set that makes it valid.  Witness votes
// are all from earlier rounds; a round-0 vote needs none.
struct AuxProofMsg {
  SignedAux vote;
  std::vector<SignedAux> proofs;

  bool operator==(const AuxProofMsg&) const = default;
};

// n-t matching signed votes for one (round, value); whoever holds one may
// decide immediately.
struct DecisionCert {
  uint64_t instance_id = 0;
  Round round = 0;
  Value value = 0;
  std::vector<SignedAux> quorum;

  bool operator==(const DecisionCert&) const = default;
};

size_t count_distinct_senders(std::span<const SignedAux> votes, Round r, Value v);

// Distinct-sender tallies per (round, value), the shape every validity rule
// is expressed in.
class ProofCounts {
 public:
  void add(Round r, Value v, ProcessId sender);
  size_t count(Round r, Value v) const;
  bool empty() const { return senders_.empty(); }

 private:
  std::map<std::pair<Round, Value>, std::set<ProcessId>> senders_;
};

struct ProtocolMisuse : std::logic_error {
  using std::logic_error::logic_error;
};

std::string hex(std::span<const uint8_t> bytes);
std::optional<Bytes> from_hex(const std::string& s);

// splitmix64: tiny deterministic PRNG with identical output on every
// platform, used wherever reproducibility across machines matters.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}
  uint64_t next();
  // Uniform in [lo, hi], inclusive.  Requires lo <= hi.
  uint64_t range(uint64_t lo, uint64_t hi);
  double unit();  // uniform in [0, 1)
};

uint64_t splitmix64_once(uint64_t x);
uint64_t mix_seed(std::initializer_list<uint64_t> parts);

uint64_t fnv1a64(std::span<const uint8_t> bytes);
uint32_t crc32(std::span<const uint8_t> bytes);

}  // namespace bbc
