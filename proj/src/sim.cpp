// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "sim.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace bbc {

const char* adversary_name(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::None: return "none";
    case AdversaryKind::Silent: return "silent";
    case AdversaryKind::Crash: return "crash";
    case AdversaryKind::Equivocate: return "equivocate";
    case AdversaryKind::DelayRelease: return "delay_release";
    case AdversaryKind::Script: return "script";
  }
  return "?";
}

std::optional<AdversaryKind> adversary_from_name(const std::string& s) {
  for (auto k : {AdversaryKind::None, AdversaryKind::Silent, AdversaryKind::Crash,
                 AdversaryKind::Equivocate, AdversaryKind::DelayRelease, AdversaryKind::Script})
    if (s == adversary_name(k)) return k;
  return std::nullopt;
}

namespace {

struct Event {
  Tick time = 0;
  uint64_t seq = 0;
  enum Kind : uint8_t { Start, Vote, Cert, TimerFire } kind = Start;
  ProcessId target = 0;
  ProcessId from = 0;
  Value proposal = 0;
  AuxProofMsg vote;
  DecisionCert cert;
  uint32_t timer_index = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  }
};

class Sim {
 public:
  explicit Sim(const SimParams& p)
      : p_(p),
        rng_(mix_seed({p.seed, 0x73696d6e6574ULL})),
        ring_(keygen(mock_scheme(), p.config.n, mix_seed({0x6b657973ULL, p.config.n}))) {
    const uint32_t n = p_.config.n;
    if (p_.proposals.size() != n) throw ProtocolMisuse("proposals size must equal n");
    engines_.reserve(n);
    for (ProcessId i = 0; i < n; ++i)
      engines_.emplace_back(p_.config, i, mock_scheme(), ring_.directory,
                            ring_.pairs[i].private_key);
    result_.outcomes.resize(n);
    for (ProcessId i = 0; i < n; ++i) result_.outcomes[i].faulty = corrupted(i);
  }

  SimResult run();

 private:
  bool corrupted(ProcessId p) const { return p_.adversary.corrupted.count(p) > 0; }

  bool dead(ProcessId p) const {
    if (!corrupted(p)) return false;
    switch (p_.adversary.kind) {
      case AdversaryKind::Silent:
      case AdversaryKind::Script:
        return true;
      case AdversaryKind::Crash:
        return engines_[p].round() >= p_.adversary.crash_at_round;
      default:
        return false;
    }
  }

  void enqueue(Event e) {
    e.seq = next_seq_++;
    queue_.push(std::move(e));
  }

  Tick delay_for(ProcessId from, ProcessId to, Tick send_time) {
    const uint64_t raw = rng_.next();  // consumed unconditionally: stable stream
    if (to == from) return 0;
    if (p_.adversary.kind == AdversaryKind::DelayRelease && corrupted(from) &&
        (p_.adversary.targets.empty() || p_.adversary.targets.count(to) > 0))
      return p_.adversary.hold;
    const Tick bound =
        std::max<Tick>(1, send_time < p_.synchrony.gst ? p_.synchrony.pre_gst_max
                                                       : p_.synchrony.delta);
    return 1 + raw % bound;
  }

  void send_vote(ProcessId from, ProcessId to, const AuxProofMsg& msg, Tick now) {
    result_.vote_ledger.insert(msg.vote.key());
    ++result_.outcomes[from].msgs_sent;
    ++result_.vote_msgs;
    Event e;
    e.time = now + delay_for(from, to, now);
    e.kind = Event::Vote;
    e.target = to;
    e.from = from;
    e.vote = msg;
    enqueue(std::move(e));
  }

  void send_cert(ProcessId from, ProcessId to, const DecisionCert& cert, Tick now) {
    ++result_.outcomes[from].msgs_sent;
    ++result_.cert_msgs;
    Event e;
    e.time = now + delay_for(from, to, now);
    e.kind = Event::Cert;
    e.target = to;
    e.from = from;
    e.cert = cert;
    enqueue(std::move(e));
  }

  void equivocate_send(ProcessId p, Round r, Tick now) {
    const uint32_t n = p_.config.n;
    size_t sent0 = 0, sent1 = 0;
    for (Value v : {Value{0}, Value{1}}) {
      auto witness = engines_[p].witness_for(r, v);
      if (!witness) continue;
      AuxProofMsg msg;
      msg.vote.payload = {p_.config.instance_id, r, v};
      msg.vote.sender = p;
      msg.vote.signature =
          mock_scheme().sign(ring_.pairs[p].private_key, canonical_encode(msg.vote.payload));
      msg.proofs = *witness;
      const ProcessId lo = v == 0 ? 0 : n / 2;
      const ProcessId hi = v == 0 ? n / 2 : n;
      for (ProcessId to = lo; to < hi; ++to) {
        send_vote(p, to, msg, now);
        (v == 0 ? sent0 : sent1)++;
      }
    }
    if (p_.capture_trace) {
      std::ostringstream os;
      os << "t=" << now << " p=" << p << " adv=equivocate r=" << r << " sent0=" << sent0
         << " sent1=" << sent1;
      result_.trace.push_back(os.str());
    }
  }

  void dispatch(ProcessId p, const std::vector<Effect>& effects, Tick now) {
    for (const auto& eff : effects) {
      if (const auto* b = std::get_if<BroadcastEffect>(&eff)) {
        const Round r = b->msg.vote.payload.round;
        if (corrupted(p)) {
          if (p_.adversary.kind == AdversaryKind::Crash && r >= p_.adversary.crash_at_round)
            continue;
          if (p_.adversary.kind == AdversaryKind::Equivocate) {
            equivocate_send(p, r, now);
            continue;
          }
        }
        for (ProcessId to = 0; to < p_.config.n; ++to) send_vote(p, to, b->msg, now);
      } else if (const auto* c = std::get_if<BroadcastCertEffect>(&eff)) {
        if (corrupted(p)) continue;  // Byzantine processes keep certificates to themselves
        ++result_.cert_broadcasts;
        for (ProcessId to = 0; to < p_.config.n; ++to) send_cert(p, to, c->cert, now);
      } else if (const auto* t = std::get_if<ArmTimerEffect>(&eff)) {
        Event e;
        e.time = now + t->duration;
        e.kind = Event::TimerFire;
        e.target = p;
        e.timer_index = t->timer_index;
        enqueue(std::move(e));
      } else if (const auto* d = std::get_if<DecideEffect>(&eff)) {
        result_.outcomes[p].decided = d->value;
        result_.outcomes[p].decision_round = d->round;
        result_.outcomes[p].decide_time = now;
      } else {
        result_.outcomes[p].stopped = true;
      }
    }
  }

  std::string event_brief(const Event& e) const {
    std::ostringstream os;
    switch (e.kind) {
      case Event::Start:
        os << "start v=" << int(e.proposal);
        break;
      case Event::Vote:
        os << "vote from=" << e.from << " r=" << e.vote.vote.payload.round
           << " v=" << int(e.vote.vote.payload.value) << " np=" << e.vote.proofs.size();
        break;
      case Event::Cert:
        os << "cert from=" << e.from << " r=" << e.cert.round << " v=" << int(e.cert.value)
           << " nq=" << e.cert.quorum.size();
        break;
      case Event::TimerFire:
        os << "timer m=" << e.timer_index;
        break;
    }
    return os.str();
  }

  void trace_event(const Event& e, const std::vector<Effect>* effects) {
    if (!p_.capture_trace) return;
    std::ostringstream os;
    os << "t=" << e.time << " seq=" << e.seq << " p=" << e.target << " ev=" << event_brief(e)
       << " :: ";
    if (!effects) {
      os << "dead";
    } else if (effects->empty()) {
      os << "-";
    } else {
      for (size_t i = 0; i < effects->size(); ++i) {
        if (i) os << ",";
        os << effect_brief((*effects)[i]);
      }
    }
    result_.trace.push_back(os.str());
  }

  bool all_nonfaulty_decided() const {
    for (ProcessId i = 0; i < p_.config.n; ++i)
      if (!result_.outcomes[i].faulty && !result_.outcomes[i].decided) return false;
    return true;
  }

  const SimParams& p_;
  SplitMix64 rng_;
  Keyring ring_;
  std::vector<Engine> engines_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  uint64_t next_seq_ = 0;
  SimResult result_;
};

SimResult Sim::run() {
  const uint32_t n = p_.config.n;
  for (ProcessId i = 0; i < n; ++i) {
    Event e;
    e.time = 0;
    e.kind = Event::Start;
    e.target = i;
    e.proposal = p_.proposals[i];
    enqueue(std::move(e));
  }
  if (p_.adversary.kind == AdversaryKind::Script) {
    for (const auto& s : p_.adversary.script) {
      Event e;
      e.time = s.time;
      e.target = s.to;
      if (s.vote) {
        e.kind = Event::Vote;
        e.from = s.vote->vote.sender;
        e.vote = *s.vote;
      } else if (s.cert) {
        e.kind = Event::Cert;
        e.cert = *s.cert;
      } else {
        continue;
      }
      enqueue(std::move(e));
    }
  }

  bool gst_snapped = p_.synchrony.gst == 0;
  if (gst_snapped)
    for (ProcessId i = 0; i < n; ++i) result_.outcomes[i].round_at_gst = 0;
  const uint64_t event_budget = 200000ULL * n + 100000ULL;
  uint64_t processed = 0;

  while (!queue_.empty()) {
    Event e = queue_.top();
    queue_.pop();
    if (!gst_snapped && e.time >= p_.synchrony.gst) {
      for (ProcessId i = 0; i < n; ++i) result_.outcomes[i].round_at_gst = engines_[i].round();
      gst_snapped = true;
    }
    result_.end_time = e.time;
    if (++processed > event_budget) {
      result_.end_reason = "event_budget";
      break;
    }

    if (dead(e.target)) {
      trace_event(e, nullptr);
      continue;
    }

    std::vector<Effect> effects;
    switch (e.kind) {
      case Event::Start:
        effects = engines_[e.target].handle_start(e.proposal);
        break;
      case Event::Vote:
        ++result_.outcomes[e.target].msgs_recv;
        effects = engines_[e.target].handle_receive(e.vote);
        break;
      case Event::Cert:
        ++result_.outcomes[e.target].msgs_recv;
        effects = engines_[e.target].handle_cert(e.cert);
        break;
      case Event::TimerFire:
        effects = engines_[e.target].handle_timer(e.timer_index);
        break;
    }
    trace_event(e, &effects);
    dispatch(e.target, effects, e.time);

    if (engines_[e.target].round() > p_.round_cap && !corrupted(e.target)) {
      result_.end_reason = "round_cap";
      break;
    }
    if (p_.config.stop_policy == StopPolicy::RunForever && all_nonfaulty_decided()) {
      result_.end_reason = "all_decided";
      break;
    }
  }
  if (result_.end_reason.empty()) result_.end_reason = "drained";

  for (ProcessId i = 0; i < n; ++i) {
    auto& o = result_.outcomes[i];
    o.invalid_dropped = engines_[i].invalid_dropped();
    o.final_round = engines_[i].round();
    if (!o.faulty) result_.max_round = std::max(result_.max_round, o.final_round);
    result_.final_store.push_back(engines_[i].stored_keys());
  }
  result_.liveness_ok = all_nonfaulty_decided();

  if (p_.capture_trace) {
    for (ProcessId i = 0; i < n; ++i) {
      const auto& o = result_.outcomes[i];
      std::ostringstream os;
      os << "outcome p=" << i << " faulty=" << o.faulty << " decided=";
      if (o.decided)
        os << int(*o.decided) << "@" << *o.decision_round;
      else
        os << "-";
      os << " t=" << o.decide_time << " stopped=" << o.stopped << " sent=" << o.msgs_sent
         << " recv=" << o.msgs_recv << " dropped=" << o.invalid_dropped;
      result_.trace.push_back(os.str());
    }
    std::ostringstream os;
    os << "summary end=" << result_.end_reason << " t=" << result_.end_time
       << " votes=" << result_.vote_msgs << " certs=" << result_.cert_msgs
       << " live=" << result_.liveness_ok;
    result_.trace.push_back(os.str());
  }
  return result_;
}

}  // namespace

SimResult run_instance(const SimParams& params) {
  Sim sim(params);
  return sim.run();
}

InvariantReport check_invariants(const SimParams& params, const SimResult& result) {
  InvariantReport report;
  const uint32_t n = params.config.n;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    report.checks.push_back({name, pass, detail});
    if (!pass && report.all_pass) {
      report.all_pass = false;
      report.first_failure = name + ": " + detail;
    }
  };
  auto faulty = [&](ProcessId p) { return result.outcomes[p].faulty; };

  {
    std::set<Value> values;
    for (ProcessId i = 0; i < n; ++i)
      if (!faulty(i) && result.outcomes[i].decided) values.insert(*result.outcomes[i].decided);
    std::ostringstream os;
    for (Value v : values) os << int(v) << " ";
    add("agreement", values.size() <= 1, "decided values: " + os.str());
  }

  {
    // Unanimity is judged over non-faulty proposals only.
    std::optional<Value> ref;
    bool unanimous = true;
    for (ProcessId i = 0; i < n; ++i) {
      if (faulty(i)) continue;
      if (!ref)
        ref = params.proposals[i];
      else if (*ref != params.proposals[i])
        unanimous = false;
    }
    bool pass = true;
    std::string detail = "not unanimous";
    if (unanimous && ref) {
      detail = "all proposed " + std::to_string(int(*ref));
      for (ProcessId i = 0; i < n; ++i)
        if (!faulty(i) && result.outcomes[i].decided && *result.outcomes[i].decided != *ref)
          pass = false;
      // Provenance: no vote for the other value by a non-faulty sender may
      // exist past round 0, on the wire or in any non-faulty store.
      for (const auto& [r, v, sender] : result.vote_ledger)
        if (r >= 1 && !faulty(sender) && v != *ref) pass = false;
      for (ProcessId i = 0; i < n; ++i) {
        if (faulty(i)) continue;
        for (const auto& [r, v, sender] : result.final_store[i])
          if (r >= 1 && !faulty(sender) && v != *ref) pass = false;
      }
    }
    add("validity", pass, detail);
  }

  {
    bool pass = true;
    std::string detail;
    for (ProcessId i = 0; i < n; ++i) {
      const auto& o = result.outcomes[i];
      if (!faulty(i) && o.decided && *o.decided != round_parity(*o.decision_round)) {
        pass = false;
        detail = "p" + std::to_string(i) + " decided " + std::to_string(int(*o.decided)) +
                 " in round " + std::to_string(*o.decision_round);
      }
    }
    add("parity", pass, detail);
  }

  {
    std::map<Round, std::array<std::set<ProcessId>, 2>> per_round;
    for (const auto& [r, v, sender] : result.vote_ledger) per_round[r][v].insert(sender);
    bool pass = true;
    std::string detail;
    for (const auto& [r, senders] : per_round) {
      if (senders[0].size() >= params.config.quorum() &&
          senders[1].size() >= params.config.quorum()) {
        pass = false;
        detail = "round " + std::to_string(r) + " has quorums for both values";
      }
    }
    add("quorum_uniqueness", pass, detail);
  }

  {
    const auto kind = params.adversary.kind;
    const bool crash_like = kind == AdversaryKind::None || kind == AdversaryKind::Silent ||
                            kind == AdversaryKind::Crash;
    bool pass = true;
    std::string detail = "not a crash-style run";
    if (crash_like) {
      std::optional<Round> rmin;
      for (ProcessId i = 0; i < n; ++i) {
        const auto& o = result.outcomes[i];
        if (faulty(i) || !o.decided) continue;
        if (!rmin || *o.decision_round < *rmin) rmin = *o.decision_round;
      }
      detail = "no decisions";
      if (rmin) {
        detail = "first decision round " + std::to_string(*rmin);
        for (ProcessId i = 0; i < n; ++i) {
          const auto& o = result.outcomes[i];
          if (faulty(i) || !o.decided) continue;
          if (*o.decision_round != *rmin && *o.decision_round != *rmin + 2) {
            pass = false;
            detail += ", p" + std::to_string(i) + " decided in round " +
                      std::to_string(*o.decision_round);
          }
        }
      }
    }
    add("decision_spread", pass, detail);
  }

  return report;
}

}  // namespace bbc
