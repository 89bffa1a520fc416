// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <functional>
#include <variant>

#include "crypto.hpp"
#include "types.hpp"

namespace bbc {

// One consensus instance as a deterministic event-driven state machine.
// Inputs are Start, vote/cert deliveries and timer expirations; every input
// returns the full list of effects the host must perform.  The machine
// itself never touches clocks, sockets or randomness.

struct BroadcastEffect {
  AuxProofMsg msg;
};
struct BroadcastCertEffect {
  DecisionCert cert;
};
struct ArmTimerEffect {
  uint32_t timer_index = 0;
  uint64_t duration = 0;
};
struct DecideEffect {
  Value value = 0;
  Round round = 0;
};
struct StoppedEffect {};

using Effect =
    std::variant<BroadcastEffect, BroadcastCertEffect, ArmTimerEffect, DecideEffect, StoppedEffect>;

std::string effect_brief(const Effect& e);

enum class Phase : uint8_t {
  Idle,         // not yet started; deliveries accumulate
  AwaitTimerA,  // within a round, before the first timer fires
  AwaitQuorum,  // first timer fired, waiting for n-t round-r votes
  AwaitTimerB,  // quorum seen, waiting for the second timer
  Halted,       // decided, vote loop stopped, certificate held back
  Stopped,      // decided and certificate duty done (or adopted)
};

const char* phase_name(Phase p);

// Which clause of the validity predicate a (round, estimate) pair can be
// justified by: threshold-many distinct-sender votes for (round, value).
struct WitnessSpec {
  Round round = 0;
  Value value = 0;
  uint32_t threshold = 0;  // 0 for round 0: no witness needed
};

// Validity of voting est in round r given distinct-sender tallies of
// earlier-round votes.  Clauses, first match wins:
//   r = 0: always valid.
//   r = 1: t+1 votes for (0, est).
//   est == parity(r-1):  r == 2 with t+1 votes for (0, est), else n-t votes
//                        for (r-2, est).
//   est != parity(r-1):  n-t votes for (r-1, est).
std::optional<WitnessSpec> satisfying_branch(const InstanceConfig& cfg, Round r, Value est,
                                             const ProofCounts& counts);
bool is_valid(const InstanceConfig& cfg, Round r, Value est, const ProofCounts& counts);

class Engine {
 public:
  Engine(InstanceConfig cfg, ProcessId me, const SignatureScheme& scheme,
         KeyDirectory directory, Bytes private_key);

  // Each handler may be called at most once per distinct input; all are
  // safe to call in any order, including before start().
  std::vector<Effect> handle_start(Value proposal);
  std::vector<Effect> handle_receive(const AuxProofMsg& msg);
  std::vector<Effect> handle_cert(const DecisionCert& cert);
  std::vector<Effect> handle_timer(uint32_t timer_index);

  // Votes arriving without proofs (lazy mode).  Accepted when the local
  // store already justifies them; NeedProofs when only the witness set is
  // missing; Rejected when the vote itself cannot be used.
  enum class LocalAccept : uint8_t { Accepted, NeedProofs, Rejected };
  std::pair<LocalAccept, std::vector<Effect>> try_accept_local(const SignedAux& vote);

  // True when the local store alone already justifies (r, v).
  bool locally_justified(Round r, Value v) const;
  // Witness set this process used (or would use) to justify (r, est).
  std::optional<std::vector<SignedAux>> witness_for(Round r, Value est) const;
  // The vote and proof set actually broadcast for round r, if any.
  std::optional<AuxProofMsg> sent_message(Round r) const;
  // Stored vote from a given sender, for answering proof requests.
  std::optional<SignedAux> stored_vote(Round r, Value v, ProcessId sender) const;

  Round round() const { return round_; }
  Phase phase() const { return phase_; }
  bool started() const { return started_; }
  std::optional<std::pair<Value, Round>> decided() const { return decided_; }
  const std::optional<DecisionCert>& certificate() const { return certificate_; }
  bool certificate_sent() const { return certificate_sent_; }
  std::set<Value> valid_values(Round r) const;
  const InstanceConfig& config() const { return cfg_; }
  ProcessId id() const { return me_; }
  uint64_t invalid_dropped() const { return invalid_dropped_; }
  size_t stored_votes() const { return store_.size(); }
  Round catch_up_round() const { return rho_; }

  // Armed timers that have not fired yet; a recovering host re-arms these.
  std::vector<uint32_t> armed_pending() const;

  // Complete deterministic state summary; equal strings mean equal state.
  std::string state_digest() const;

  // All stored (round, value, sender) triples, for invariant checks.
  std::vector<std::tuple<Round, Value, ProcessId>> stored_keys() const;

 private:
  bool verify_vote(const SignedAux& sa) const;
  bool ingest(const SignedAux& sa);
  void note_round_sender(Round r, ProcessId sender);
  void update_catch_up();
  bool timer_expired(uint32_t index) const;
  void arm_timer(uint32_t index, std::vector<Effect>& out);
  void enter_round(Round r, std::vector<Effect>& out);
  void try_broadcast(std::vector<Effect>& out);
  void progress(std::vector<Effect>& out);
  void do_decide(Value v, std::vector<Effect>& out);
  void maybe_release_certificate(std::vector<Effect>& out);
  std::optional<SignedAux> coordinator_vote(Round r, const std::set<Value>& valid) const;
  Value select_estimate(Round r, const std::set<Value>& valid,
                        const std::optional<SignedAux>& coord) const;
  std::vector<SignedAux> build_proofs(Round r, Value est) const;
  DecisionCert build_certificate(Round r, Value v) const;

  InstanceConfig cfg_;
  ProcessId me_;
  const SignatureScheme* scheme_;
  KeyDirectory directory_;
  Bytes private_key_;

  Phase phase_ = Phase::Idle;
  Round round_ = 0;
  bool started_ = false;

  // Every distinct valid signed vote seen, keyed (round, value, sender).
  std::map<std::tuple<Round, Value, ProcessId>, SignedAux> store_;
  ProofCounts counts_;
  std::map<Round, std::set<ProcessId>> round_senders_;

  // Timer state.  Indices at or below the watermark count as expired
  // without ever being armed: evidence of t+1 processes in round rho
  // retires every timer up to 2*rho.
  std::set<uint32_t> armed_;
  std::set<uint32_t> fired_;
  uint32_t expired_watermark_ = 0;
  Round rho_ = 0;

  std::set<Round> broadcast_done_;
  std::map<Round, AuxProofMsg> sent_;

  std::optional<std::pair<Value, Round>> decided_;
  std::optional<DecisionCert> certificate_;
  bool certificate_sent_ = false;
  Round max_other_round_ = 0;
  uint64_t invalid_dropped_ = 0;
};

}  // namespace bbc
