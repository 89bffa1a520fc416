// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "doctest.h"
#include "types.hpp"

using namespace bbc;

TEST_CASE("canonical encoding is fixed-width big-endian with a leading tag") {
  auto enc = canonical_encode({0, 0, 1});
  CHECK(hex(enc) == "41000000000000000000000000" "01");
  enc = canonical_encode({0x0102030405060708ULL, 9, 0});
  CHECK(hex(enc) == "41" "0102030405060708" "00000009" "00");
}

TEST_CASE("canonical decode round-trips every encodable payload") {
  for (uint64_t inst : {0ULL, 1ULL, 0xffffffffffffffffULL, 0xdeadbeefULL}) {
    for (Round r : {0u, 1u, 2u, 77u, 0xffffffffu}) {
      for (Value v : {Value{0}, Value{1}}) {
        AuxPayload p{inst, r, v};
        auto decoded = canonical_decode(canonical_encode(p));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == p);
      }
    }
  }
}

TEST_CASE("canonical decode rejects malformed bytes") {
  auto enc = canonical_encode({7, 3, 1});
  SUBCASE("wrong length") {
    Bytes shorter(enc.begin(), enc.end() - 1);
    CHECK(!canonical_decode(shorter).has_value());
    Bytes longer(enc.begin(), enc.end());
    longer.push_back(0);
    CHECK(!canonical_decode(longer).has_value());
  }
  SUBCASE("wrong tag") {
    enc[0] = 0x42;
    CHECK(!canonical_decode(enc).has_value());
  }
  SUBCASE("non-binary value") {
    enc[13] = 2;
    CHECK(!canonical_decode(enc).has_value());
  }
}

TEST_CASE("timer durations are zero through the free rounds then grow linearly") {
  TimerPolicy p{10, 20, 5};
  for (uint32_t index = 0; index <= 2 * p.free_rounds + 1; ++index) {
    if (timer_round(index) <= p.free_rounds)
      CHECK(timer_duration(p, index) == 0);
  }
  CHECK(timer_duration(p, 21) == 0);   // round 10, still free
  CHECK(timer_duration(p, 22) == 30);  // 20 + 5*(22-20)
  CHECK(timer_duration(p, 23) == 35);
  CHECK(timer_duration(p, 40) == 120);
  TimerPolicy zero{0, 4, 2};
  CHECK(timer_duration(zero, 0) == 0);  // round 0 is always free
  CHECK(timer_duration(zero, 1) == 0);
  CHECK(timer_duration(zero, 2) == 8);
}

static SignedAux vote_of(Round r, Value v, ProcessId sender) {
  SignedAux sa;
  sa.payload = {0, r, v};
  sa.sender = sender;
  return sa;
}

TEST_CASE("count_distinct_senders ignores duplicates and other cells") {
  std::vector<SignedAux> votes = {vote_of(1, 1, 0), vote_of(1, 1, 0), vote_of(1, 1, 2),
                                  vote_of(1, 0, 1), vote_of(2, 1, 3)};
  CHECK(count_distinct_senders(votes, 1, 1) == 2);
  CHECK(count_distinct_senders(votes, 1, 0) == 1);
  CHECK(count_distinct_senders(votes, 2, 1) == 1);
  CHECK(count_distinct_senders(votes, 0, 0) == 0);
}

TEST_CASE("count_distinct_senders is monotone under union and bounded by the sender set") {
  SplitMix64 rng(99);
  std::vector<SignedAux> base, extra;
  for (int i = 0; i < 40; ++i) {
    auto v = vote_of(static_cast<Round>(rng.range(0, 3)), static_cast<Value>(rng.range(0, 1)),
                     static_cast<ProcessId>(rng.range(0, 5)));
    (i % 2 ? base : extra).push_back(v);
  }
  std::vector<SignedAux> merged = base;
  merged.insert(merged.end(), extra.begin(), extra.end());
  for (Round r = 0; r <= 3; ++r) {
    for (Value v : {Value{0}, Value{1}}) {
      CHECK(count_distinct_senders(merged, r, v) >= count_distinct_senders(base, r, v));
      CHECK(count_distinct_senders(merged, r, v) <= 6);
    }
  }
}

TEST_CASE("ProofCounts tallies distinct senders per (round, value)") {
  ProofCounts counts;
  CHECK(counts.empty());
  counts.add(1, 1, 0);
  counts.add(1, 1, 0);
  counts.add(1, 1, 3);
  counts.add(2, 0, 0);
  CHECK(counts.count(1, 1) == 2);
  CHECK(counts.count(2, 0) == 1);
  CHECK(counts.count(2, 1) == 0);
  CHECK(!counts.empty());
}

TEST_CASE("config thresholds and coordinator rotation") {
  InstanceConfig cfg;
  cfg.n = 7;
  cfg.t = 2;
  cfg.coord_free_rounds = 3;
  CHECK(cfg.quorum() == 5);
  CHECK(cfg.weak_threshold() == 3);
  CHECK(cfg.coordinator(0) == 0);
  CHECK(cfg.coordinator(9) == 2);
  CHECK(!cfg.coordinator_active(3));
  CHECK(cfg.coordinator_active(4));
  CHECK(cfg.well_formed());
  cfg.t = 3;
  CHECK(!cfg.well_formed());  // needs n > 3t
}

TEST_CASE("round parity gates which value is decidable") {
  CHECK(round_parity(0) == 0);
  CHECK(round_parity(1) == 1);
  CHECK(round_parity(2) == 0);
  CHECK(opposite(0) == 1);
  CHECK(opposite(1) == 0);
}

TEST_CASE("hex round-trips and rejects odd or non-hex input") {
  Bytes b = {0x00, 0xff, 0x1a};
  CHECK(hex(b) == "00ff1a");
  CHECK(from_hex("00ff1a") == b);
  CHECK(from_hex("0") == std::nullopt);
  CHECK(from_hex("zz") == std::nullopt);
  CHECK(from_hex("") == Bytes{});
}

TEST_CASE("splitmix64 stream is stable across runs") {
  SplitMix64 a(12345), b(12345);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  // Reference values of the published splitmix64 sequence for seed 1234567.
  SplitMix64 c(1234567);
  CHECK(c.next() == 6457827717110365317ULL);
  CHECK(c.next() == 3203168211198807973ULL);
}

TEST_CASE("splitmix64 range stays within bounds and unit within [0,1)") {
  SplitMix64 rng(42);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = rng.range(3, 17);
    CHECK(v >= 3);
    CHECK(v <= 17);
    double u = rng.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("mix_seed depends on order and every part") {
  CHECK(mix_seed({1, 2}) != mix_seed({2, 1}));
  CHECK(mix_seed({1, 2}) != mix_seed({1, 3}));
  CHECK(mix_seed({1, 2}) == mix_seed({1, 2}));
}

TEST_CASE("crc32 and fnv1a64 match their published check values") {
  const char* s = "123456789";
  std::span<const uint8_t> bytes(reinterpret_cast<const uint8_t*>(s), 9);
  CHECK(crc32(bytes) == 0xcbf43926u);
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const char* a = "a";
  CHECK(fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(a), 1)) ==
        0xaf63dc4c8601ec8cULL);
}

TEST_CASE("stop policy names round-trip") {
  for (StopPolicy p : {StopPolicy::Delayed, StopPolicy::Eager, StopPolicy::RunForever})
    CHECK(stop_policy_from_name(stop_policy_name(p)) == p);
  CHECK(stop_policy_from_name("bogus") == std::nullopt);
}
