// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include <chrono>

#include "doctest.h"
#include "engine.hpp"

using namespace bbc;

// Independent reference for the vote-justification rule, transcribed
// clause-for-clause with its own sender counting over raw triples.  The
// production satisfying_branch must agree with this on every input.
static bool reference_valid(uint32_t n, uint32_t t, Round r, Value est,
                            const std::vector<std::tuple<Round, Value, ProcessId>>& proofs) {
  auto tally = [&](Round pr, Value pv) {
    bool seen[8] = {false};
    size_t k = 0;
    for (const auto& [vr, vv, vs] : proofs)
      if (vr == pr && vv == pv && !seen[vs]) {
        seen[vs] = true;
        ++k;
      }
    return k;
  };
  if (r == 0) return true;
  if (r == 1) return tally(0, est) >= t + 1;
  const Value b = static_cast<Value>((r - 1) % 2);
  if (est == b) {
    if (r == 2) return tally(0, b) >= t + 1;
    return tally(r - 2, b) >= n - t;
  }
  return tally(r - 1, est) >= n - t;
}

namespace {

const InstanceConfig kSmall = [] {
  InstanceConfig cfg;
  cfg.n = 4;
  cfg.t = 1;
  return cfg;
}();

ProofCounts counts_of(const std::vector<std::tuple<Round, Value, ProcessId>>& triples) {
  ProofCounts counts;
  for (const auto& [r, v, s] : triples) counts.add(r, v, s);
  return counts;
}

// Distinct-sender votes for one (round, value) cell.
std::vector<std::tuple<Round, Value, ProcessId>> cell(Round r, Value v, uint32_t senders) {
  std::vector<std::tuple<Round, Value, ProcessId>> out;
  for (ProcessId s = 0; s < senders; ++s) out.emplace_back(r, v, s);
  return out;
}

}  // namespace

TEST_CASE("round zero estimates need no justification") {
  CHECK(is_valid(kSmall, 0, 0, ProofCounts{}));
  CHECK(is_valid(kSmall, 0, 1, ProofCounts{}));
}

TEST_CASE("round one estimates need t+1 initial proposals for the value") {
  CHECK(is_valid(kSmall, 1, 1, counts_of(cell(0, 1, 2))));
  CHECK(!is_valid(kSmall, 1, 1, counts_of(cell(0, 1, 1))));
  CHECK(is_valid(kSmall, 1, 0, counts_of(cell(0, 0, 2))));
  CHECK(!is_valid(kSmall, 1, 0, counts_of(cell(0, 1, 4))));  // wrong value cell
}

TEST_CASE("round two keeps accepting t+1 initial proposals for the previous-parity value") {
  // Previous round parity is 1, so estimate 1 rides on round-0 support.
  CHECK(is_valid(kSmall, 2, 1, counts_of(cell(0, 1, 2))));
  CHECK(!is_valid(kSmall, 2, 1, counts_of(cell(0, 1, 1))));
}

TEST_CASE("later rounds need a full quorum two rounds back for the previous-parity value") {
  // Previous round parity at round 3 is 0, witnessed by n-t votes at round 1.
  CHECK(is_valid(kSmall, 3, 0, counts_of(cell(1, 0, 3))));
  CHECK(!is_valid(kSmall, 3, 0, counts_of(cell(1, 0, 2))));
  // Same clause at round 4 for value 1, witnessed at round 2.
  CHECK(is_valid(kSmall, 4, 1, counts_of(cell(2, 1, 3))));
  CHECK(!is_valid(kSmall, 4, 1, counts_of(cell(2, 1, 2))));
}

TEST_CASE("switching away from the previous parity needs a quorum one round back") {
  CHECK(is_valid(kSmall, 2, 0, counts_of(cell(1, 0, 3))));
  CHECK(!is_valid(kSmall, 2, 0, counts_of(cell(1, 0, 2))));
  CHECK(is_valid(kSmall, 3, 1, counts_of(cell(2, 1, 3))));
  CHECK(!is_valid(kSmall, 3, 1, counts_of(cell(2, 1, 2))));
}

TEST_CASE("support in unrelated cells never helps") {
  // Piles of votes everywhere except the cells the clauses inspect.
  auto triples = cell(0, 0, 4);
  auto more = cell(2, 0, 4);
  triples.insert(triples.end(), more.begin(), more.end());
  auto counts = counts_of(triples);
  CHECK(!is_valid(kSmall, 1, 1, counts));
  CHECK(!is_valid(kSmall, 3, 1, counts));
  CHECK(!is_valid(kSmall, 4, 1, counts));
}

TEST_CASE("validity matches the independent reference on every small input") {
  const uint32_t n = 4, t = 1;
  InstanceConfig cfg;
  cfg.n = n;
  cfg.t = t;
  const auto start = std::chrono::steady_clock::now();
  uint64_t cases = 0;
  for (Round r = 0; r <= 4; ++r) {
    // All proof multisets over the cells any clause could inspect: one
    // distinct-sender count in 0..4 per (earlier round, value) cell.
    const uint32_t cells = 2 * r;
    std::vector<uint32_t> counts(cells, 0);
    for (;;) {
      std::vector<std::tuple<Round, Value, ProcessId>> triples;
      ProofCounts pc;
      for (uint32_t c = 0; c < cells; ++c) {
        const Round pr = c / 2;
        const Value pv = static_cast<Value>(c % 2);
        for (ProcessId s = 0; s < counts[c]; ++s) {
          triples.emplace_back(pr, pv, s);
          pc.add(pr, pv, s);
        }
      }
      for (Value est : {Value{0}, Value{1}}) {
        ++cases;
        const bool expect = reference_valid(n, t, r, est, triples);
        const bool got = is_valid(cfg, r, est, pc);
        if (expect != got) {
          CAPTURE(r);
          CAPTURE(int(est));
          REQUIRE(expect == got);
        }
      }
      uint32_t c = 0;
      while (c < cells && counts[c] == n) counts[c++] = 0;
      if (c == cells) break;
      ++counts[c];
    }
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(cases > 100000);
  CHECK(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count() < 10);
}

TEST_CASE("satisfying_branch reports the clause that fired") {
  auto b = satisfying_branch(kSmall, 0, 1, ProofCounts{});
  REQUIRE(b.has_value());
  CHECK(b->threshold == 0);

  b = satisfying_branch(kSmall, 1, 1, counts_of(cell(0, 1, 3)));
  REQUIRE(b.has_value());
  CHECK(b->round == 0);
  CHECK(b->value == 1);
  CHECK(b->threshold == 2);

  b = satisfying_branch(kSmall, 3, 0, counts_of(cell(1, 0, 3)));
  REQUIRE(b.has_value());
  CHECK(b->round == 1);
  CHECK(b->threshold == 3);

  b = satisfying_branch(kSmall, 3, 1, counts_of(cell(2, 1, 3)));
  REQUIRE(b.has_value());
  CHECK(b->round == 2);
  CHECK(b->threshold == 3);

  CHECK(!satisfying_branch(kSmall, 2, 0, counts_of(cell(1, 0, 2))).has_value());
}

// Engine harness: all four key pairs are at hand, so the test can forge any
// well-signed vote, including equivocations and future rounds.
namespace {

struct Bench {
  InstanceConfig cfg;
  Keyring ring;
  std::unique_ptr<Engine> engine;

  explicit Bench(InstanceConfig c = kSmall, ProcessId me = 0)
      : cfg(c), ring(keygen(mock_scheme(), c.n, 7)) {
    engine = std::make_unique<Engine>(cfg, me, mock_scheme(), ring.directory,
                                      ring.pairs[me].private_key);
  }

  SignedAux vote(Round r, Value v, ProcessId sender) const {
    SignedAux sa;
    sa.payload = {cfg.instance_id, r, v};
    sa.sender = sender;
    sa.signature =
        mock_scheme().sign(ring.pairs[sender].private_key, canonical_encode(sa.payload));
    return sa;
  }

  AuxProofMsg msg(Round r, Value v, ProcessId sender,
                  std::vector<std::tuple<Round, Value, ProcessId>> proofs = {}) const {
    AuxProofMsg m;
    m.vote = vote(r, v, sender);
    for (const auto& [pr, pv, ps] : proofs) m.proofs.push_back(vote(pr, pv, ps));
    return m;
  }
};

template <class T>
size_t count_effects(const std::vector<Effect>& effects) {
  size_t k = 0;
  for (const auto& e : effects)
    if (std::holds_alternative<T>(e)) ++k;
  return k;
}

template <class T>
const T* find_effect(const std::vector<Effect>& effects) {
  for (const auto& e : effects)
    if (const T* p = std::get_if<T>(&e)) return p;
  return nullptr;
}

}  // namespace

TEST_CASE("start broadcasts the bare proposal and arms the first round timer") {
  Bench b;
  auto effects = b.engine->handle_start(1);
  const auto* bcast = find_effect<BroadcastEffect>(effects);
  REQUIRE(bcast != nullptr);
  CHECK(bcast->msg.vote.payload.round == 0);
  CHECK(bcast->msg.vote.payload.value == 1);
  CHECK(bcast->msg.proofs.empty());
  const auto* arm = find_effect<ArmTimerEffect>(effects);
  REQUIRE(arm != nullptr);
  CHECK(arm->timer_index == 2);
  CHECK(b.engine->round() == 1);
  CHECK(b.engine->phase() == Phase::AwaitTimerA);
}

TEST_CASE("starting twice or with a non-binary proposal is misuse") {
  Bench b;
  CHECK_THROWS_AS(b.engine->handle_start(2), ProtocolMisuse);
  b.engine->handle_start(0);
  CHECK_THROWS_AS(b.engine->handle_start(0), ProtocolMisuse);
}

TEST_CASE("constructor rejects broken configurations") {
  Keyring ring = keygen(mock_scheme(), 4, 7);
  InstanceConfig bad = kSmall;
  bad.t = 2;  // violates n > 3t
  CHECK_THROWS_AS(Engine(bad, 0, mock_scheme(), ring.directory, ring.pairs[0].private_key),
                  ProtocolMisuse);
  CHECK_THROWS_AS(Engine(kSmall, 9, mock_scheme(), ring.directory, ring.pairs[0].private_key),
                  ProtocolMisuse);
  KeyDirectory tiny("mock", {ring.directory.key(0)});
  CHECK_THROWS_AS(Engine(kSmall, 0, mock_scheme(), tiny, ring.pairs[0].private_key),
                  ProtocolMisuse);
}

TEST_CASE("a full unanimous exchange decides value 1 in round 1") {
  Bench b;
  b.engine->handle_start(1);
  // Everyone proposed 1; loop back our own broadcast like a host would.
  for (ProcessId p = 0; p < 4; ++p) b.engine->handle_receive(b.msg(0, 1, p));
  b.engine->handle_timer(2);
  std::vector<Effect> all;
  for (ProcessId p = 0; p < 4; ++p) {
    auto fx = b.engine->handle_receive(b.msg(1, 1, p, {{0, 1, 0}, {0, 1, 1}}));
    all.insert(all.end(), fx.begin(), fx.end());
  }
  // The quorum armed the round's second timer; the host fires it at once.
  const auto* arm = find_effect<ArmTimerEffect>(all);
  REQUIRE(arm != nullptr);
  CHECK(arm->timer_index == 3);
  auto fx = b.engine->handle_timer(3);
  all.insert(all.end(), fx.begin(), fx.end());
  const auto* decide = find_effect<DecideEffect>(all);
  REQUIRE(decide != nullptr);
  CHECK(decide->value == 1);
  CHECK(decide->round == 1);
  REQUIRE(b.engine->decided().has_value());
  CHECK(b.engine->decided()->first == 1);
  CHECK(b.engine->phase() == Phase::Halted);  // delayed policy holds the cert
  CHECK(!b.engine->certificate_sent());
  REQUIRE(b.engine->certificate().has_value());
  CHECK(b.engine->certificate()->quorum.size() == 3);
}

TEST_CASE("broadcast defers until some estimate is justifiable") {
  Bench b;
  b.engine->handle_start(1);
  b.engine->handle_receive(b.msg(0, 1, 0));  // own loopback only: 1 < t+1
  auto fx = b.engine->handle_timer(2);
  CHECK(count_effects<BroadcastEffect>(fx) == 0);
  CHECK(b.engine->phase() == Phase::AwaitTimerA);
  CHECK(!b.engine->sent_message(1).has_value());
  // The missing second proposal arrives; the held-back vote goes out now.
  fx = b.engine->handle_receive(b.msg(0, 1, 1));
  const auto* bcast = find_effect<BroadcastEffect>(fx);
  REQUIRE(bcast != nullptr);
  CHECK(bcast->msg.vote.payload.round == 1);
  CHECK(bcast->msg.vote.payload.value == 1);
  CHECK(bcast->msg.proofs.size() == 2);
  CHECK(b.engine->phase() == Phase::AwaitQuorum);
  CHECK(b.engine->sent_message(1).has_value());
}

TEST_CASE("the quorum wait tolerates mixed-value rounds and moves on without deciding") {
  Bench b;
  b.engine->handle_start(1);
  for (ProcessId p : {0u, 1u}) b.engine->handle_receive(b.msg(0, 1, p));
  for (ProcessId p : {2u, 3u}) b.engine->handle_receive(b.msg(0, 0, p));
  b.engine->handle_timer(2);
  b.engine->handle_receive(b.msg(1, 1, 0, {{0, 1, 0}, {0, 1, 1}}));
  b.engine->handle_receive(b.msg(1, 1, 1, {{0, 1, 0}, {0, 1, 1}}));
  auto fx = b.engine->handle_receive(b.msg(1, 0, 2, {{0, 0, 2}, {0, 0, 3}}));
  // Three distinct round-1 senders, only two for value 1: no decision.
  const auto* arm = find_effect<ArmTimerEffect>(fx);
  REQUIRE(arm != nullptr);
  CHECK(arm->timer_index == 3);
  CHECK(count_effects<DecideEffect>(fx) == 0);
  fx = b.engine->handle_timer(3);
  CHECK(count_effects<DecideEffect>(fx) == 0);
  CHECK(b.engine->round() == 2);
  CHECK(!b.engine->decided().has_value());
}

TEST_CASE("catch-up expires early timers but never skips the quorum wait") {
  InstanceConfig cfg = kSmall;
  cfg.timers = {0, 7, 1};  // nonzero so nothing fires by itself
  Bench c(cfg);
  c.engine->handle_start(1);
  c.engine->handle_receive(c.msg(0, 1, 0));
  c.engine->handle_receive(c.msg(0, 1, 1));
  CHECK(c.engine->phase() == Phase::AwaitTimerA);  // timer 2 armed, not fired
  // Two distinct round-5 voters prove at least one non-faulty process got
  // that far, so every timer up to round 5 may be skipped.
  auto high = [&](ProcessId s) {
    return c.msg(5, 1, s, {{4, 1, 1}, {4, 1, 2}, {4, 1, 3}});
  };
  auto fx = c.engine->handle_receive(high(1));
  CHECK(c.engine->catch_up_round() == 4);  // the witness votes alone show round 4
  const auto* bcast = find_effect<BroadcastEffect>(fx);
  REQUIRE(bcast != nullptr);  // timer 2 now counts as expired
  CHECK(bcast->msg.vote.payload.round == 1);
  CHECK(c.engine->round() == 1);
  CHECK(c.engine->phase() == Phase::AwaitQuorum);  // still waiting for n-t senders
  c.engine->handle_receive(high(2));
  CHECK(c.engine->catch_up_round() == 5);
  CHECK(c.engine->phase() == Phase::AwaitQuorum);
  // Quorum arrives; both round-1 timers are already expired, so the round
  // resolves to a decision with no further timer input.
  c.engine->handle_receive(c.msg(1, 1, 1, {{0, 1, 0}, {0, 1, 1}}));
  std::vector<Effect> all;
  for (ProcessId p : {2u, 0u}) {
    auto more = c.engine->handle_receive(c.msg(1, 1, p, {{0, 1, 0}, {0, 1, 1}}));
    all.insert(all.end(), more.begin(), more.end());
  }
  const auto* decide = find_effect<DecideEffect>(all);
  REQUIRE(decide != nullptr);
  CHECK(decide->round == 1);
  // One broadcast per round, no matter how many times timers expired.
  CHECK(count_effects<BroadcastEffect>(all) == 0);
  CHECK(c.engine->sent_message(1).has_value());
}

TEST_CASE("duplicate deliveries neither re-broadcast nor double-count") {
  Bench b;
  b.engine->handle_start(1);
  auto m = b.msg(0, 1, 1);
  auto fx1 = b.engine->handle_receive(m);
  auto fx2 = b.engine->handle_receive(m);
  CHECK(fx2.empty());
  CHECK(b.engine->stored_votes() == 1);
  b.engine->handle_receive(b.msg(0, 1, 0));
  size_t before = b.engine->stored_votes();
  b.engine->handle_receive(b.msg(0, 1, 0));
  CHECK(b.engine->stored_votes() == before);
}

TEST_CASE("unarmed or repeated timers are inert") {
  Bench b;
  CHECK(b.engine->handle_timer(2).empty());  // never armed
  b.engine->handle_start(1);
  for (ProcessId p = 0; p < 2; ++p) b.engine->handle_receive(b.msg(0, 1, p));
  auto fx = b.engine->handle_timer(2);
  CHECK(count_effects<BroadcastEffect>(fx) == 1);
  CHECK(b.engine->handle_timer(2).empty());  // already fired
  CHECK(b.engine->handle_timer(99).empty());
}

TEST_CASE("structurally broken messages are dropped and counted") {
  Bench b;
  b.engine->handle_start(1);
  const auto dropped = [&] { return b.engine->invalid_dropped(); };
  uint64_t n = dropped();

  // Wrong instance.
  auto m = b.msg(0, 1, 1);
  m.vote.payload.instance_id = 99;
  m.vote.signature =
      mock_scheme().sign(b.ring.pairs[1].private_key, canonical_encode(m.vote.payload));
  b.engine->handle_receive(m);
  CHECK(dropped() == ++n);

  // Round-0 votes carry no witnesses.
  b.engine->handle_receive(b.msg(0, 1, 1, {{0, 1, 2}}));
  CHECK(dropped() == ++n);

  // Witness rounds must be strictly earlier than the vote round.
  b.engine->handle_receive(b.msg(1, 1, 1, {{1, 1, 0}, {1, 1, 2}}));
  CHECK(dropped() == ++n);

  // Duplicate witness entries.
  b.engine->handle_receive(b.msg(1, 1, 1, {{0, 1, 0}, {0, 1, 0}}));
  CHECK(dropped() == ++n);

  // Out-of-range sender.
  m = b.msg(0, 1, 1);
  m.vote.sender = 7;
  b.engine->handle_receive(m);
  CHECK(dropped() == ++n);

  // Bad signature on the vote.
  m = b.msg(0, 1, 1);
  m.vote.signature[0] ^= 1;
  b.engine->handle_receive(m);
  CHECK(dropped() == ++n);

  // Bad signature on a witness.
  m = b.msg(1, 1, 1, {{0, 1, 0}, {0, 1, 2}});
  m.proofs[0].signature[0] ^= 1;
  b.engine->handle_receive(m);
  CHECK(dropped() == ++n);

  // Witness set too small for any clause.
  b.engine->handle_receive(b.msg(1, 1, 1, {{0, 1, 0}}));
  CHECK(dropped() == ++n);

  CHECK(b.engine->stored_votes() == 0);
}

TEST_CASE("the attached witness set must justify the vote by itself") {
  Bench b;
  b.engine->handle_start(1);
  // Local store already justifies (1, 1), but the message arrives with an
  // unrelated witness set; it is still dropped.
  b.engine->handle_receive(b.msg(0, 1, 0));
  b.engine->handle_receive(b.msg(0, 1, 1));
  uint64_t before = b.engine->invalid_dropped();
  b.engine->handle_receive(b.msg(1, 1, 2, {{0, 0, 2}, {0, 0, 3}}));
  CHECK(b.engine->invalid_dropped() == before + 1);
  CHECK(!b.engine->stored_vote(1, 1, 2).has_value());
}

TEST_CASE("only the minimal witness subset is absorbed into the store") {
  Bench b;
  b.engine->handle_start(1);
  // Vote arrives with four round-0 witnesses; only the two lowest senders
  // of the clause that fired are kept.
  b.engine->handle_receive(b.msg(1, 1, 3, {{0, 1, 3}, {0, 1, 1}, {0, 1, 2}, {0, 1, 0}}));
  auto keys = b.engine->stored_keys();
  std::vector<std::tuple<Round, Value, ProcessId>> expect = {
      {0, 1, 0}, {0, 1, 1}, {1, 1, 3}};
  CHECK(keys == expect);
}

TEST_CASE("absorbed witnesses make later estimates justifiable") {
  Bench b;
  b.engine->handle_start(0);
  CHECK(!b.engine->locally_justified(1, 1));
  b.engine->handle_receive(b.msg(1, 1, 2, {{0, 1, 1}, {0, 1, 3}}));
  CHECK(b.engine->locally_justified(1, 1));
  auto w = b.engine->witness_for(1, 1);
  REQUIRE(w.has_value());
  REQUIRE(w->size() == 2);
  CHECK((*w)[0].sender == 1);
  CHECK((*w)[1].sender == 3);
}

TEST_CASE("witness_for picks threshold-many lowest senders") {
  Bench b;
  b.engine->handle_start(1);
  for (ProcessId p : {3u, 1u, 2u}) b.engine->handle_receive(b.msg(0, 1, p));
  auto w = b.engine->witness_for(1, 1);
  REQUIRE(w.has_value());
  REQUIRE(w->size() == 2);
  CHECK((*w)[0].sender == 1);
  CHECK((*w)[1].sender == 2);
  CHECK(!b.engine->witness_for(1, 0).has_value());
}

TEST_CASE("local acceptance takes bare votes once the store justifies them") {
  Bench b;
  b.engine->handle_start(1);
  auto bare = b.vote(1, 1, 2);
  auto [res1, fx1] = b.engine->try_accept_local(bare);
  CHECK(res1 == Engine::LocalAccept::NeedProofs);
  CHECK(b.engine->stored_votes() == 0);
  b.engine->handle_receive(b.msg(0, 1, 0));
  b.engine->handle_receive(b.msg(0, 1, 1));
  auto [res2, fx2] = b.engine->try_accept_local(bare);
  CHECK(res2 == Engine::LocalAccept::Accepted);
  CHECK(b.engine->stored_vote(1, 1, 2).has_value());
  // Replaying the same bare vote is a harmless accept.
  auto [res3, fx3] = b.engine->try_accept_local(bare);
  CHECK(res3 == Engine::LocalAccept::Accepted);
}

TEST_CASE("local acceptance rejects forgeries outright") {
  Bench b;
  b.engine->handle_start(1);
  auto bad = b.vote(1, 1, 2);
  bad.signature[0] ^= 1;
  auto [res, fx] = b.engine->try_accept_local(bad);
  CHECK(res == Engine::LocalAccept::Rejected);
  auto alien = b.vote(1, 1, 2);
  alien.payload.instance_id = 5;
  auto [res2, fx2] = b.engine->try_accept_local(alien);
  CHECK(res2 == Engine::LocalAccept::Rejected);
}

namespace {

// Drives one engine to a round-1 decision on value 1 under any policy.
std::vector<Effect> decide_round_one(Bench& b) {
  b.engine->handle_start(1);
  for (ProcessId p = 0; p < 4; ++p) b.engine->handle_receive(b.msg(0, 1, p));
  b.engine->handle_timer(2);
  std::vector<Effect> all;
  for (ProcessId p = 0; p < 4; ++p) {
    auto fx = b.engine->handle_receive(b.msg(1, 1, p, {{0, 1, 0}, {0, 1, 1}}));
    all.insert(all.end(), fx.begin(), fx.end());
  }
  auto fx = b.engine->handle_timer(3);
  all.insert(all.end(), fx.begin(), fx.end());
  return all;
}

}  // namespace

TEST_CASE("eager policy ships the certificate with the decision") {
  InstanceConfig cfg = kSmall;
  cfg.stop_policy = StopPolicy::Eager;
  Bench b(cfg);
  auto fx = decide_round_one(b);
  CHECK(count_effects<DecideEffect>(fx) == 1);
  const auto* cert = find_effect<BroadcastCertEffect>(fx);
  REQUIRE(cert != nullptr);
  CHECK(cert->cert.value == 1);
  CHECK(cert->cert.round == 1);
  CHECK(cert->cert.quorum.size() == 3);
  CHECK(count_effects<StoppedEffect>(fx) == 1);
  CHECK(b.engine->phase() == Phase::Stopped);
  CHECK(b.engine->certificate_sent());
}

TEST_CASE("delayed policy holds the certificate until a later-round vote shows a laggard") {
  Bench b;
  auto fx = decide_round_one(b);
  CHECK(count_effects<BroadcastCertEffect>(fx) == 0);
  CHECK(b.engine->phase() == Phase::Halted);
  // A round-1 vote is not evidence anyone is stuck past our decision round.
  auto same = b.engine->handle_receive(b.msg(1, 0, 3, {{0, 0, 0}, {0, 0, 1}}));
  CHECK(count_effects<BroadcastCertEffect>(same) == 0);
  // A round-2 vote is.
  auto later = b.engine->handle_receive(b.msg(2, 1, 3, {{0, 1, 0}, {0, 1, 1}}));
  const auto* cert = find_effect<BroadcastCertEffect>(later);
  REQUIRE(cert != nullptr);
  CHECK(cert->cert.round == 1);
  CHECK(count_effects<StoppedEffect>(later) == 1);
  CHECK(b.engine->phase() == Phase::Stopped);
  CHECK(b.engine->certificate_sent());
  // Further laggard evidence does not re-send.
  auto again = b.engine->handle_receive(b.msg(2, 1, 2, {{0, 1, 0}, {0, 1, 1}}));
  CHECK(count_effects<BroadcastCertEffect>(again) == 0);
}

TEST_CASE("laggard evidence stored before the decision still releases the certificate") {
  Bench b;
  b.engine->handle_start(1);
  for (ProcessId p = 0; p < 4; ++p) b.engine->handle_receive(b.msg(0, 1, p));
  // The round-2 vote arrives while we are still working on round 1.
  b.engine->handle_receive(b.msg(2, 1, 3, {{0, 1, 0}, {0, 1, 1}}));
  b.engine->handle_timer(2);
  for (ProcessId p = 0; p < 3; ++p)
    b.engine->handle_receive(b.msg(1, 1, p, {{0, 1, 0}, {0, 1, 1}}));
  auto all = b.engine->handle_timer(3);
  // The decision and the certificate release happen in the same burst.
  CHECK(count_effects<DecideEffect>(all) == 1);
  CHECK(count_effects<BroadcastCertEffect>(all) == 1);
  CHECK(b.engine->phase() == Phase::Stopped);
}

TEST_CASE("run-forever policy keeps voting past the decision") {
  InstanceConfig cfg = kSmall;
  cfg.stop_policy = StopPolicy::RunForever;
  Bench b(cfg);
  auto fx = decide_round_one(b);
  CHECK(count_effects<DecideEffect>(fx) == 1);
  CHECK(count_effects<BroadcastCertEffect>(fx) == 0);
  CHECK(b.engine->round() == 2);  // moved on instead of halting
  CHECK(b.engine->phase() != Phase::Halted);
  CHECK(b.engine->phase() != Phase::Stopped);
  // Certificates delivered to a run-forever process are ignored.
  Bench peer(cfg, 1);
  DecisionCert cert;
  cert.instance_id = cfg.instance_id;
  cert.round = 1;
  cert.value = 1;
  for (ProcessId p = 0; p < 3; ++p) cert.quorum.push_back(peer.vote(1, 1, p));
  CHECK(peer.engine->handle_cert(cert).empty());
  CHECK(!peer.engine->decided().has_value());
}

TEST_CASE("a valid certificate decides and stops an undecided process immediately") {
  Bench b(kSmall, 3);
  DecisionCert cert;
  cert.instance_id = 0;
  cert.round = 1;
  cert.value = 1;
  for (ProcessId p = 0; p < 3; ++p) cert.quorum.push_back(b.vote(1, 1, p));
  auto fx = b.engine->handle_cert(cert);
  const auto* decide = find_effect<DecideEffect>(fx);
  REQUIRE(decide != nullptr);
  CHECK(decide->value == 1);
  CHECK(decide->round == 1);
  CHECK(count_effects<StoppedEffect>(fx) == 1);
  CHECK(b.engine->phase() == Phase::Stopped);
  // A start arriving after adoption changes nothing.
  CHECK(b.engine->handle_start(0).empty());
  CHECK(b.engine->decided()->first == 1);
}

TEST_CASE("broken certificates are dropped") {
  Bench b;
  const auto dropped = [&] { return b.engine->invalid_dropped(); };
  auto make = [&] {
    DecisionCert cert;
    cert.instance_id = 0;
    cert.round = 1;
    cert.value = 1;
    for (ProcessId p = 0; p < 3; ++p) cert.quorum.push_back(b.vote(1, 1, p));
    return cert;
  };
  uint64_t n = dropped();

  auto cert = make();
  cert.value = 0;  // parity mismatch: value 0 is not decidable in round 1
  b.engine->handle_cert(cert);
  CHECK(dropped() == ++n);

  cert = make();
  cert.quorum.pop_back();  // below quorum
  b.engine->handle_cert(cert);
  CHECK(dropped() == ++n);

  cert = make();
  cert.quorum[1] = cert.quorum[0];  // duplicate sender does not add weight
  b.engine->handle_cert(cert);
  CHECK(dropped() == ++n);

  cert = make();
  cert.quorum[0].signature[0] ^= 1;
  b.engine->handle_cert(cert);
  CHECK(dropped() == ++n);

  cert = make();
  cert.instance_id = 9;
  b.engine->handle_cert(cert);
  CHECK(dropped() == ++n);

  CHECK(!b.engine->decided().has_value());
}

TEST_CASE("an active coordinator broadcasts at round entry and others adopt its value") {
  InstanceConfig cfg = kSmall;
  cfg.coord_free_rounds = 1;  // coordinator acts from round 2 on
  cfg.timers = {0, 5, 1};     // nothing fires without an explicit timer call
  auto drive_to_round_two = [&](Bench& b) {
    b.engine->handle_start(0);
    b.engine->handle_receive(b.msg(0, 1, 1));
    b.engine->handle_receive(b.msg(0, 1, 2));
    b.engine->handle_receive(b.msg(0, 0, 0));
    b.engine->handle_timer(2);  // broadcast (1, 1): parity preference
    b.engine->handle_receive(b.msg(1, 1, 0, {{0, 1, 1}, {0, 1, 2}}));
    b.engine->handle_receive(b.msg(1, 0, 2, {{0, 0, 0}, {0, 0, 3}}));
    b.engine->handle_receive(b.msg(1, 0, 3, {{0, 0, 0}, {0, 0, 3}}));
    b.engine->handle_receive(b.msg(1, 0, 1, {{0, 0, 0}, {0, 0, 3}}));
    b.engine->handle_timer(3);
    REQUIRE(b.engine->round() == 2);
    // Both values are now justifiable at round 2: value 1 from t+1 initial
    // proposals, value 0 from the round-1 quorum.
    REQUIRE(b.engine->locally_justified(2, 0));
    REQUIRE(b.engine->locally_justified(2, 1));
  };

  SUBCASE("without the coordinator's vote the round parity wins") {
    Bench b(cfg);
    drive_to_round_two(b);
    auto fx = b.engine->handle_timer(4);
    const auto* bcast = find_effect<BroadcastEffect>(fx);
    REQUIRE(bcast != nullptr);
    CHECK(bcast->msg.vote.payload.value == 0);
  }

  SUBCASE("the coordinator's stored vote overrides the parity preference") {
    Bench b(cfg);
    drive_to_round_two(b);
    // Round 2's coordinator is process 2; its vote arrives before our timer.
    b.engine->handle_receive(b.msg(2, 1, 2, {{0, 1, 1}, {0, 1, 2}}));
    auto fx = b.engine->handle_timer(4);
    const auto* bcast = find_effect<BroadcastEffect>(fx);
    REQUIRE(bcast != nullptr);
    CHECK(bcast->msg.vote.payload.value == 1);
  }

  SUBCASE("the coordinator itself announces before its first timer") {
    Bench b(cfg, 2);
    drive_to_round_two(b);
    // Process 2 coordinates round 2 and must have spoken at round entry.
    auto sent = b.engine->sent_message(2);
    REQUIRE(sent.has_value());
    CHECK(sent->vote.payload.round == 2);
  }
}

TEST_CASE("armed_pending reports exactly the timers a recovering host must re-arm") {
  InstanceConfig cfg = kSmall;
  cfg.timers = {0, 5, 1};
  Bench b(cfg);
  b.engine->handle_start(1);
  CHECK(b.engine->armed_pending() == std::vector<uint32_t>{2});
  b.engine->handle_receive(b.msg(0, 1, 0));
  b.engine->handle_receive(b.msg(0, 1, 1));
  b.engine->handle_timer(2);
  CHECK(b.engine->armed_pending().empty());
  for (ProcessId p : {0u, 1u, 2u})
    b.engine->handle_receive(b.msg(1, 1, p, {{0, 1, 0}, {0, 1, 1}}));
  CHECK(b.engine->armed_pending() == std::vector<uint32_t>{3});
}

TEST_CASE("state digests agree exactly when the input history agrees") {
  Bench a, b;
  auto feed = [&](Bench& x) {
    x.engine->handle_start(1);
    x.engine->handle_receive(x.msg(0, 1, 1));
    x.engine->handle_receive(x.msg(0, 0, 2));
    x.engine->handle_timer(2);
  };
  feed(a);
  feed(b);
  CHECK(a.engine->state_digest() == b.engine->state_digest());
  b.engine->handle_receive(b.msg(0, 0, 3));
  CHECK(a.engine->state_digest() != b.engine->state_digest());
}
