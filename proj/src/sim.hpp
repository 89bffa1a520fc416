// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include "engine.hpp"

namespace bbc {

// Discrete-event network simulation: integer ticks, every delivery delay
// drawn from a seeded deterministic stream, so a (params, seed) pair always
// produces the identical run.

struct SynchronyModel {
  Tick gst = 0;          // before this tick delays are drawn from [1, pre_gst_max]
  Tick delta = 1;        // after gst, delays are drawn from [1, delta]
  Tick pre_gst_max = 1;

  bool operator==(const SynchronyModel&) const = default;
};

enum class AdversaryKind : uint8_t {
  None = 0,
  Silent,        // corrupted processes never act
  Crash,         // corrupted processes act until they reach crash_at_round
  Equivocate,    // corrupted processes send each justifiable value to half the peers
  DelayRelease,  // corrupted processes deliver to targets only after `hold` ticks
  Script,        // corrupted processes replay an explicit send schedule
};

const char* adversary_name(AdversaryKind k);
std::optional<AdversaryKind> adversary_from_name(const std::string& s);

struct ScriptedSend {
  Tick time = 0;
  ProcessId to = 0;
  std::optional<AuxProofMsg> vote;
  std::optional<DecisionCert> cert;
};

struct AdversaryStrategy {
  AdversaryKind kind = AdversaryKind::None;
  std::set<ProcessId> corrupted;
  Round crash_at_round = 0;
  Tick hold = 0;                  // DelayRelease: exact delivery delay
  std::set<ProcessId> targets;    // DelayRelease: empty means everyone
  std::vector<ScriptedSend> script;
};

struct SimParams {
  InstanceConfig config;
  std::vector<Value> proposals;  // one per process
  SynchronyModel synchrony;
  AdversaryStrategy adversary;
  uint64_t seed = 0;
  Round round_cap = 64;
  bool capture_trace = true;
};

struct ProcessOutcome {
  bool faulty = false;
  std::optional<Value> decided;
  std::optional<Round> decision_round;
  Tick decide_time = 0;
  bool stopped = false;
  uint64_t msgs_sent = 0;  // point-to-point, self included
  uint64_t msgs_recv = 0;
  uint64_t invalid_dropped = 0;
  Round round_at_gst = 0;
  Round final_round = 0;
};

struct SimResult {
  std::vector<ProcessOutcome> outcomes;
  std::vector<std::string> trace;
  bool liveness_ok = false;
  std::string end_reason;
  Tick end_time = 0;
  Round max_round = 0;  // over non-faulty processes
  uint64_t vote_msgs = 0;       // point-to-point vote sends, self included
  uint64_t cert_msgs = 0;       // point-to-point certificate sends
  uint64_t cert_broadcasts = 0; // certificate broadcast effects that hit the wire
  // Every (round, value, sender) that appeared on the wire in a vote.
  std::set<std::tuple<Round, Value, ProcessId>> vote_ledger;
  // Final stored vote keys per process.
  std::vector<std::vector<std::tuple<Round, Value, ProcessId>>> final_store;
};

SimResult run_instance(const SimParams& params);

struct InvariantCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct InvariantReport {
  std::vector<InvariantCheck> checks;
  bool all_pass = true;
  std::string first_failure;
};

// Safety checks over a finished run: agreement, validity, round-parity of
// decisions, per-round quorum uniqueness on the wire, unanimity provenance,
// and (for fault-free or crash-style runs) the two-round decision spread.
InvariantReport check_invariants(const SimParams& params, const SimResult& result);

}  // namespace bbc
