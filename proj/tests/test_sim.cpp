// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include <algorithm>

#include "doctest.h"
#include "scenario.hpp"

using namespace bbc;

namespace {

SimParams base_params(uint32_t n, std::vector<Value> proposals, uint64_t seed = 1) {
  SimParams p;
  p.config.n = n;
  p.config.t = (n - 1) / 3;
  p.proposals = std::move(proposals);
  p.seed = seed;
  return p;
}

void check_all(const SimParams& p, const SimResult& r) {
  auto report = check_invariants(p, r);
  if (!report.all_pass) {
    CAPTURE(report.first_failure);
    REQUIRE(report.all_pass);
  }
}

}  // namespace

TEST_CASE("identical parameters produce byte-identical runs") {
  SimParams p = base_params(7, {1, 0, 1, 0, 1, 0, 1}, 99);
  p.synchrony = {10, 2, 5};
  SimResult a = run_instance(p);
  SimResult b = run_instance(p);
  REQUIRE(a.trace.size() == b.trace.size());
  CHECK(a.trace == b.trace);
  CHECK(a.end_time == b.end_time);
  CHECK(a.vote_msgs == b.vote_msgs);
  for (ProcessId i = 0; i < 7; ++i) {
    CHECK(a.outcomes[i].decided == b.outcomes[i].decided);
    CHECK(a.outcomes[i].decide_time == b.outcomes[i].decide_time);
  }
  SimParams other = p;
  other.seed = 100;
  SimResult c = run_instance(other);
  CHECK(a.trace != c.trace);
}

TEST_CASE("the trace opens with the first start event and its effects") {
  SimParams p = base_params(4, {1, 1, 1, 1});
  SimResult r = run_instance(p);
  REQUIRE(!r.trace.empty());
  CHECK(r.trace[0] == "t=0 seq=0 p=0 ev=start v=1 :: bcast(r=0,v=1,np=0),arm(m=2,d=0)");
}

TEST_CASE("unanimous 1 decides value 1 in round 1, unanimous 0 in round 2") {
  for (uint32_t n : {4u, 7u, 16u}) {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      SimParams p1 = base_params(n, std::vector<Value>(n, 1), seed);
      SimResult r1 = run_instance(p1);
      REQUIRE(r1.liveness_ok);
      for (const auto& o : r1.outcomes) {
        CHECK(o.decided == Value{1});
        CHECK(o.decision_round == Round{1});
      }
      check_all(p1, r1);

      SimParams p0 = base_params(n, std::vector<Value>(n, 0), seed);
      SimResult r0 = run_instance(p0);
      REQUIRE(r0.liveness_ok);
      for (const auto& o : r0.outcomes) {
        CHECK(o.decided == Value{0});
        CHECK(o.decision_round == Round{2});
      }
      check_all(p0, r0);
    }
  }
}

TEST_CASE("frozen mixed-proposal outcomes stay put") {
  SimParams p = base_params(4, {1, 1, 1, 0});
  SimResult r = run_instance(p);
  REQUIRE(r.liveness_ok);
  CHECK(r.outcomes[0].decided == Value{1});
  CHECK(r.outcomes[0].decision_round == Round{1});
  check_all(p, r);

  SimParams q = base_params(4, {0, 0, 0, 1});
  SimResult s = run_instance(q);
  REQUIRE(s.liveness_ok);
  CHECK(s.outcomes[0].decided == Value{0});
  CHECK(s.outcomes[0].decision_round == Round{2});
  check_all(q, s);
}

TEST_CASE("fault-free vote volume is n squared per round including self-sends") {
  SimParams p = base_params(4, {1, 1, 1, 1});
  SimResult r = run_instance(p);
  Round term = 0;
  for (const auto& o : r.outcomes) term = std::max(term, *o.decision_round);
  CHECK(r.vote_msgs == 16 * (term + 1));
  CHECK(r.vote_msgs == 32);  // round 0 and round 1, 4x4 each
  // Simultaneous decisions under the delayed policy ship no certificates.
  CHECK(r.cert_broadcasts == 0);
  CHECK(r.cert_msgs == 0);
}

TEST_CASE("every adversary family leaves safety intact") {
  auto run_with = [&](AdversaryKind kind, uint32_t n, std::vector<Value> proposals,
                      uint64_t seed) {
    SimParams p = base_params(n, std::move(proposals), seed);
    p.adversary.kind = kind;
    for (ProcessId i = 0; i < p.config.t; ++i) p.adversary.corrupted.insert(i);
    p.adversary.crash_at_round = 1;
    p.adversary.hold = 50;
    p.synchrony = {8, 2, 6};
    SimResult r = run_instance(p);
    check_all(p, r);
    return r;
  };

  SUBCASE("silent") {
    SimResult r = run_with(AdversaryKind::Silent, 7, {1, 1, 0, 0, 1, 0, 1}, 5);
    REQUIRE(r.liveness_ok);
  }
  SUBCASE("crash") {
    SimResult r = run_with(AdversaryKind::Crash, 7, {0, 0, 1, 1, 0, 1, 0}, 6);
    REQUIRE(r.liveness_ok);
  }
  SUBCASE("equivocate") {
    SimResult r = run_with(AdversaryKind::Equivocate, 7, {1, 0, 1, 0, 1, 0, 1}, 7);
    REQUIRE(r.liveness_ok);
  }
  SUBCASE("delay release") {
    SimResult r = run_with(AdversaryKind::DelayRelease, 7, {1, 0, 0, 1, 1, 0, 1}, 8);
    REQUIRE(r.liveness_ok);
    // The run outlives the hold, so held messages were eventually released.
    CHECK(r.end_time >= 50);
  }
}

TEST_CASE("a scripted adversary injects exactly the written schedule") {
  SimParams p = base_params(4, {1, 1, 0, 0});
  p.adversary.kind = AdversaryKind::Script;
  p.adversary.corrupted = {3};
  // The corrupted process says nothing except one forged proposal to p0.
  Keyring ring = keygen(mock_scheme(), 4, mix_seed({0x6b657973ULL, 4}));
  AuxProofMsg msg;
  msg.vote.payload = {0, 0, 1};
  msg.vote.sender = 3;
  msg.vote.signature =
      mock_scheme().sign(ring.pairs[3].private_key, canonical_encode(msg.vote.payload));
  p.adversary.script.push_back({1, 0, msg, std::nullopt});
  SimResult r = run_instance(p);
  check_all(p, r);
  REQUIRE(r.liveness_ok);
  auto& store0 = r.final_store[0];
  CHECK(std::find(store0.begin(), store0.end(), std::tuple<Round, Value, ProcessId>{0, 1, 3}) !=
        store0.end());
}

TEST_CASE("gst snapshot records each process round when delays stabilize") {
  SimParams p = base_params(4, {1, 0, 1, 0}, 13);
  p.synchrony = {6, 1, 8};
  SimResult r = run_instance(p);
  REQUIRE(r.liveness_ok);
  for (const auto& o : r.outcomes) CHECK(o.round_at_gst <= o.final_round);
}

TEST_CASE("the invariant checker flags forged agreement and parity breaks") {
  SimParams p = base_params(4, {1, 1, 1, 1});
  SimResult r = run_instance(p);
  REQUIRE(check_invariants(p, r).all_pass);

  SUBCASE("agreement") {
    r.outcomes[2].decided = 0;
    r.outcomes[2].decision_round = 2;
    auto report = check_invariants(p, r);
    CHECK(!report.all_pass);
    CHECK(report.first_failure.substr(0, 9) == "agreement");
  }
  SUBCASE("parity") {
    r.outcomes[2].decision_round = 2;  // value 1 in an even round
    auto report = check_invariants(p, r);
    CHECK(!report.all_pass);
    bool parity_failed = false;
    for (const auto& c : report.checks)
      if (c.name == "parity" && !c.pass) parity_failed = true;
    CHECK(parity_failed);
  }
  SUBCASE("validity by provenance") {
    // A non-faulty round-1 vote for 0 in a unanimous-1 run is impossible.
    r.vote_ledger.insert({1, 0, 2});
    auto report = check_invariants(p, r);
    bool validity_failed = false;
    for (const auto& c : report.checks)
      if (c.name == "validity" && !c.pass) validity_failed = true;
    CHECK(validity_failed);
  }
  SUBCASE("quorum uniqueness") {
    for (ProcessId s = 0; s < 3; ++s) r.vote_ledger.insert({1, 0, s});
    auto report = check_invariants(p, r);
    bool failed = false;
    for (const auto& c : report.checks)
      if (c.name == "quorum_uniqueness" && !c.pass) failed = true;
    CHECK(failed);
  }
  SUBCASE("decision spread") {
    r.outcomes[2].decided = 1;
    r.outcomes[2].decision_round = 3;  // rounds 1 and 3 differ by 2: allowed
    auto ok = check_invariants(p, r);
    bool spread_failed = false;
    for (const auto& c : ok.checks)
      if (c.name == "decision_spread" && !c.pass) spread_failed = true;
    CHECK(!spread_failed);
    r.outcomes[2].decided = 0;
    r.outcomes[2].decision_round = 4;  // round 4 is neither r nor r+2
    auto report = check_invariants(p, r);
    spread_failed = false;
    for (const auto& c : report.checks)
      if (c.name == "decision_spread" && !c.pass) spread_failed = true;
    CHECK(spread_failed);
  }
}

TEST_CASE("run-forever policy still converges once everyone has decided") {
  SimParams p = base_params(4, {1, 1, 0, 0}, 21);
  p.config.stop_policy = StopPolicy::RunForever;
  SimResult r = run_instance(p);
  REQUIRE(r.liveness_ok);
  CHECK(r.end_reason == "all_decided");
  CHECK(r.cert_msgs == 0);
  check_all(p, r);
}

TEST_CASE("eager policy ships certificates to everyone") {
  SimParams p = base_params(4, {1, 1, 0, 0}, 21);
  p.config.stop_policy = StopPolicy::Eager;
  SimResult r = run_instance(p);
  REQUIRE(r.liveness_ok);
  CHECK(r.cert_broadcasts >= 1);
  CHECK(r.cert_msgs >= p.config.quorum());
  check_all(p, r);
}

namespace {

// Rebuilds a randomized adversarial scenario from its iteration seed, the
// same way the fuzz harness draws one.
SimParams fuzz_scenario(uint64_t it_seed) {
  SplitMix64 rng(it_seed);
  SimParams p;
  const uint32_t n_set[] = {4, 7, 10};
  p.config.n = n_set[rng.next() % 3];
  p.config.t = (p.config.n - 1) / 3;
  p.config.instance_id = it_seed;
  p.seed = it_seed;
  p.round_cap = 64;
  p.capture_trace = false;
  const AdversaryKind kinds[] = {AdversaryKind::Silent, AdversaryKind::Crash,
                                 AdversaryKind::Equivocate, AdversaryKind::DelayRelease};
  p.adversary.kind = kinds[rng.next() % 4];
  std::vector<ProcessId> ids(p.config.n);
  for (ProcessId i = 0; i < p.config.n; ++i) ids[i] = i;
  for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.next() % i]);
  for (uint32_t i = 0; i < p.config.t; ++i) p.adversary.corrupted.insert(ids[i]);
  p.adversary.crash_at_round = static_cast<Round>(rng.range(0, 6));
  p.adversary.hold = rng.range(1, 100);
  if (rng.next() % 2 == 0)
    for (ProcessId i = 0; i < p.config.n; ++i)
      if (!p.adversary.corrupted.count(i) && rng.next() % 2 == 0) p.adversary.targets.insert(i);
  p.synchrony.gst = rng.range(0, 40);
  p.synchrony.delta = rng.range(1, 6);
  p.synchrony.pre_gst_max = rng.range(p.synchrony.delta, 12);
  const double fracs[] = {0.25, 0.5, 0.75};
  p.proposals = draw_proposals(p.config.n, fracs[rng.next() % 3], it_seed);
  return p;
}

}  // namespace

TEST_CASE("laggards once stranded by an edge-triggered certificate release now terminate") {
  // Both scenarios used to deadlock: the decision landed on the very event
  // that delivered the laggard's vote, so a release keyed to later arrivals
  // never fired, and the only other decider was corrupted.
  for (uint64_t it_seed : {5152197186086104736ULL, 15699086682980542025ULL}) {
    SimParams p = fuzz_scenario(it_seed);
    SimResult r = run_instance(p);
    CAPTURE(it_seed);
    CHECK(r.liveness_ok);
    check_all(p, r);
  }
}
