// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "engine.hpp"

#include <algorithm>
#include <sstream>

namespace bbc {

// Fault-injection hook for mutation tests: widens one validity threshold by
// one so the safety checker can demonstrate it detects real protocol bugs.
// Never enabled in shipping builds.
#ifdef BBC_FAULT_LOOSE_THRESHOLD
static constexpr uint32_t kFaultSlack = 1;
#else
static constexpr uint32_t kFaultSlack = 0;
#endif

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::AwaitTimerA: return "await_timer_a";
    case Phase::AwaitQuorum: return "await_quorum";
    case Phase::AwaitTimerB: return "await_timer_b";
    case Phase::Halted: return "halted";
    case Phase::Stopped: return "stopped";
  }
  return "?";
}

std::string effect_brief(const Effect& e) {
  std::ostringstream os;
  if (const auto* b = std::get_if<BroadcastEffect>(&e)) {
    os << "bcast(r=" << b->msg.vote.payload.round << ",v=" << int(b->msg.vote.payload.value)
       << ",np=" << b->msg.proofs.size() << ")";
  } else if (const auto* c = std::get_if<BroadcastCertEffect>(&e)) {
    os << "cert(r=" << c->cert.round << ",v=" << int(c->cert.value) << ")";
  } else if (const auto* t = std::get_if<ArmTimerEffect>(&e)) {
    os << "arm(m=" << t->timer_index << ",d=" << t->duration << ")";
  } else if (const auto* d = std::get_if<DecideEffect>(&e)) {
    os << "decide(v=" << int(d->value) << ",r=" << d->round << ")";
  } else {
    os << "stop";
  }
  return os.str();
}

std::optional<WitnessSpec> satisfying_branch(const InstanceConfig& cfg, Round r, Value est,
                                             const ProofCounts& counts) {
  const uint32_t weak = cfg.weak_threshold() - kFaultSlack;
  const uint32_t quorum = cfg.quorum() - kFaultSlack;
  if (r == 0) return WitnessSpec{0, 0, 0};
  if (r == 1) {
    if (counts.count(0, est) >= weak) return WitnessSpec{0, est, weak};
    return std::nullopt;
  }
  const Value b = round_parity(r - 1);
  if (est == b) {
    if (r == 2 && counts.count(0, b) >= weak) return WitnessSpec{0, b, weak};
    if (counts.count(r - 2, b) >= quorum) return WitnessSpec{r - 2, b, quorum};
    return std::nullopt;
  }
  if (counts.count(r - 1, est) >= quorum) return WitnessSpec{r - 1, est, quorum};
  return std::nullopt;
}

bool is_valid(const InstanceConfig& cfg, Round r, Value est, const ProofCounts& counts) {
  return satisfying_branch(cfg, r, est, counts).has_value();
}

Engine::Engine(InstanceConfig cfg, ProcessId me, const SignatureScheme& scheme,
               KeyDirectory directory, Bytes private_key)
    : cfg_(cfg),
      me_(me),
      scheme_(&scheme),
      directory_(std::move(directory)),
      private_key_(std::move(private_key)) {
  if (!cfg_.well_formed()) throw ProtocolMisuse("config requires n > 3t");
  if (me_ >= cfg_.n) throw ProtocolMisuse("process index out of range");
  if (directory_.size() < cfg_.n) throw ProtocolMisuse("key directory smaller than n");
}

bool Engine::verify_vote(const SignedAux& sa) const {
  if (sa.payload.instance_id != cfg_.instance_id) return false;
  if (!value_ok(sa.payload.value)) return false;
  if (!directory_.has(sa.sender) || sa.sender >= cfg_.n) return false;
  auto msg = canonical_encode(sa.payload);
  return scheme_->verify(directory_.key(sa.sender), msg, sa.signature);
}

bool Engine::ingest(const SignedAux& sa) {
  auto [it, inserted] = store_.emplace(sa.key(), sa);
  if (!inserted) return false;
  counts_.add(sa.payload.round, sa.payload.value, sa.sender);
  note_round_sender(sa.payload.round, sa.sender);
  if (sa.sender != me_ && sa.payload.round > max_other_round_)
    max_other_round_ = sa.payload.round;
  return true;
}

void Engine::note_round_sender(Round r, ProcessId sender) {
  auto& senders = round_senders_[r];
  senders.insert(sender);
  if (senders.size() >= cfg_.weak_threshold() && r > rho_) {
    rho_ = r;
    update_catch_up();
  }
}

// t+1 distinct senders already voting in round rho means at least one
// non-faulty process got there, so every timer up to 2*rho may be skipped.
void Engine::update_catch_up() {
  expired_watermark_ = std::max(expired_watermark_, 2 * rho_);
}

bool Engine::timer_expired(uint32_t index) const {
  return index <= expired_watermark_ || fired_.count(index) > 0;
}

void Engine::arm_timer(uint32_t index, std::vector<Effect>& out) {
  if (timer_expired(index) || armed_.count(index) > 0) return;
  armed_.insert(index);
  out.push_back(ArmTimerEffect{index, timer_duration(cfg_.timers, index)});
}

std::set<Value> Engine::valid_values(Round r) const {
  std::set<Value> vals;
  for (Value v : {Value{0}, Value{1}})
    if (is_valid(cfg_, r, v, counts_)) vals.insert(v);
  return vals;
}

std::optional<SignedAux> Engine::coordinator_vote(Round r, const std::set<Value>& valid) const {
  if (!cfg_.coordinator_active(r)) return std::nullopt;
  const ProcessId coord = cfg_.coordinator(r);
  for (Value v : {Value{0}, Value{1}}) {
    if (!valid.count(v)) continue;
    auto it = store_.find({r, v, coord});
    if (it != store_.end()) return it->second;
  }
  return std::nullopt;
}

Value Engine::select_estimate(Round r, const std::set<Value>& valid,
                              const std::optional<SignedAux>& coord) const {
  if (coord && valid.count(coord->payload.value)) return coord->payload.value;
  // Prefer the value this round is allowed to decide.
  const Value target = round_parity(r);
  if (valid.count(target)) return target;
  return opposite(target);
}

std::vector<SignedAux> Engine::build_proofs(Round r, Value est) const {
  auto witness = witness_for(r, est);
  if (!witness) throw ProtocolMisuse("no witness for estimate");
  return *witness;
}

bool Engine::locally_justified(Round r, Value v) const {
  return satisfying_branch(cfg_, r, v, counts_).has_value();
}

std::optional<std::vector<SignedAux>> Engine::witness_for(Round r, Value est) const {
  auto branch = satisfying_branch(cfg_, r, est, counts_);
  if (!branch) return std::nullopt;
  std::vector<SignedAux> out;
  if (branch->threshold == 0) return out;
  auto it = store_.lower_bound({branch->round, branch->value, 0});
  for (; it != store_.end() && out.size() < branch->threshold; ++it) {
    const auto& [key, vote] = *it;
    if (std::get<0>(key) != branch->round || std::get<1>(key) != branch->value) break;
    out.push_back(vote);
  }
  if (out.size() < branch->threshold) return std::nullopt;
  return out;
}

std::optional<AuxProofMsg> Engine::sent_message(Round r) const {
  auto it = sent_.find(r);
  if (it == sent_.end()) return std::nullopt;
  return it->second;
}

std::optional<SignedAux> Engine::stored_vote(Round r, Value v, ProcessId sender) const {
  auto it = store_.find({r, v, sender});
  if (it == store_.end()) return std::nullopt;
  return it->second;
}

void Engine::try_broadcast(std::vector<Effect>& out) {
  if (broadcast_done_.count(round_) > 0) return;
  auto valid = valid_values(round_);
  if (valid.empty()) return;  // deferred: retried on each later input
  auto coord = coordinator_vote(round_, valid);
  const Value est = select_estimate(round_, valid, coord);
  AuxProofMsg msg;
  msg.vote.payload = {cfg_.instance_id, round_, est};
  msg.vote.sender = me_;
  msg.vote.signature = scheme_->sign(private_key_, canonical_encode(msg.vote.payload));
  msg.proofs = build_proofs(round_, est);
  sent_[round_] = msg;
  broadcast_done_.insert(round_);
  out.push_back(BroadcastEffect{std::move(msg)});
}

void Engine::enter_round(Round r, std::vector<Effect>& out) {
  round_ = r;
  phase_ = Phase::AwaitTimerA;
  // An active coordinator announces its estimate at round entry so that
  // everyone else sees it before their first timer runs out.
  if (cfg_.coordinator_active(r) && cfg_.coordinator(r) == me_) try_broadcast(out);
  arm_timer(2 * r, out);
}

std::vector<Effect> Engine::handle_start(Value proposal) {
  std::vector<Effect> out;
  if (!value_ok(proposal)) throw ProtocolMisuse("proposal must be 0 or 1");
  if (started_) throw ProtocolMisuse("instance already started");
  started_ = true;
  // A certificate may have arrived before our own start; the decision stands.
  if (phase_ == Phase::Stopped || phase_ == Phase::Halted) return out;

  AuxProofMsg msg;
  msg.vote.payload = {cfg_.instance_id, 0, proposal};
  msg.vote.sender = me_;
  msg.vote.signature = scheme_->sign(private_key_, canonical_encode(msg.vote.payload));
  sent_[0] = msg;
  broadcast_done_.insert(0);
  out.push_back(BroadcastEffect{std::move(msg)});
  enter_round(1, out);
  progress(out);
  return out;
}

std::vector<Effect> Engine::handle_receive(const AuxProofMsg& msg) {
  std::vector<Effect> out;
  const auto& vote = msg.vote;
  // Structural checks: wrong instance, non-binary values, out-of-range
  // senders, witness rounds not strictly earlier, or duplicate witness
  // entries all make the whole message unusable.
  if (vote.payload.instance_id != cfg_.instance_id || !value_ok(vote.payload.value) ||
      vote.sender >= cfg_.n) {
    ++invalid_dropped_;
    return out;
  }
  if (vote.payload.round == 0 && !msg.proofs.empty()) {
    ++invalid_dropped_;
    return out;
  }
  std::set<std::tuple<Round, Value, ProcessId>> seen;
  for (const auto& p : msg.proofs) {
    if (p.payload.instance_id != cfg_.instance_id || !value_ok(p.payload.value) ||
        p.sender >= cfg_.n || p.payload.round >= vote.payload.round ||
        !seen.insert(p.key()).second) {
      ++invalid_dropped_;
      return out;
    }
  }
  if (!verify_vote(vote)) {
    ++invalid_dropped_;
    return out;
  }
  for (const auto& p : msg.proofs) {
    if (!verify_vote(p)) {
      ++invalid_dropped_;
      return out;
    }
  }
  // The attached witness set alone must justify the vote.
  ProofCounts attached;
  for (const auto& p : msg.proofs) attached.add(p.payload.round, p.payload.value, p.sender);
  auto branch = satisfying_branch(cfg_, vote.payload.round, vote.payload.value, attached);
  if (!branch) {
    ++invalid_dropped_;
    return out;
  }
  // Keep only the minimal witness subset: lowest-sender votes of the
  // clause that fired.
  std::vector<const SignedAux*> witness;
  for (const auto& p : msg.proofs) {
    if (p.payload.round == branch->round && p.payload.value == branch->value)
      witness.push_back(&p);
  }
  std::sort(witness.begin(), witness.end(),
            [](const SignedAux* a, const SignedAux* b) { return a->sender < b->sender; });
  witness.resize(std::min<size_t>(witness.size(), branch->threshold));
  ingest(vote);
  for (const auto* p : witness) ingest(*p);
  maybe_release_certificate(out);
  progress(out);
  return out;
}

std::pair<Engine::LocalAccept, std::vector<Effect>> Engine::try_accept_local(
    const SignedAux& vote) {
  std::vector<Effect> out;
  if (vote.payload.instance_id != cfg_.instance_id || !value_ok(vote.payload.value) ||
      vote.sender >= cfg_.n) {
    ++invalid_dropped_;
    return {LocalAccept::Rejected, std::move(out)};
  }
  if (store_.count(vote.key()) > 0) {
    maybe_release_certificate(out);
    progress(out);
    return {LocalAccept::Accepted, std::move(out)};
  }
  if (!verify_vote(vote)) {
    ++invalid_dropped_;
    return {LocalAccept::Rejected, std::move(out)};
  }
  if (!is_valid(cfg_, vote.payload.round, vote.payload.value, counts_))
    return {LocalAccept::NeedProofs, std::move(out)};
  ingest(vote);
  maybe_release_certificate(out);
  progress(out);
  return {LocalAccept::Accepted, std::move(out)};
}

std::vector<Effect> Engine::handle_cert(const DecisionCert& cert) {
  std::vector<Effect> out;
  if (cfg_.stop_policy == StopPolicy::RunForever) return out;
  if (cert.instance_id != cfg_.instance_id || !value_ok(cert.value) ||
      cert.value != round_parity(cert.round)) {
    ++invalid_dropped_;
    return out;
  }
  std::set<ProcessId> senders;
  for (const auto& sa : cert.quorum) {
    if (sa.payload.round != cert.round || sa.payload.value != cert.value || !verify_vote(sa)) {
      ++invalid_dropped_;
      return out;
    }
    senders.insert(sa.sender);
  }
  if (senders.size() < cfg_.quorum()) {
    ++invalid_dropped_;
    return out;
  }
  if (!decided_) {
    decided_ = {cert.value, cert.round};
    certificate_ = cert;
    out.push_back(DecideEffect{cert.value, cert.round});
    phase_ = Phase::Stopped;
    out.push_back(StoppedEffect{});
    return out;
  }
  if (phase_ == Phase::Halted) {
    phase_ = Phase::Stopped;
    out.push_back(StoppedEffect{});
  }
  return out;
}

std::vector<Effect> Engine::handle_timer(uint32_t timer_index) {
  std::vector<Effect> out;
  if (armed_.count(timer_index) == 0 || timer_expired(timer_index)) return out;
  fired_.insert(timer_index);
  progress(out);
  return out;
}

void Engine::do_decide(Value v, std::vector<Effect>& out) {
  decided_ = {v, round_};
  out.push_back(DecideEffect{v, round_});
  certificate_ = build_certificate(round_, v);
  switch (cfg_.stop_policy) {
    case StopPolicy::RunForever:
      break;  // keep voting so laggards see fresh rounds
    case StopPolicy::Eager:
      out.push_back(BroadcastCertEffect{*certificate_});
      certificate_sent_ = true;
      phase_ = Phase::Stopped;
      out.push_back(StoppedEffect{});
      break;
    case StopPolicy::Delayed:
      // Hold the certificate; release it only on evidence of a laggard.
      phase_ = Phase::Halted;
      maybe_release_certificate(out);
      break;
  }
}

DecisionCert Engine::build_certificate(Round r, Value v) const {
  DecisionCert cert;
  cert.instance_id = cfg_.instance_id;
  cert.round = r;
  cert.value = v;
  auto it = store_.lower_bound({r, v, 0});
  for (; it != store_.end() && cert.quorum.size() < cfg_.quorum(); ++it) {
    const auto& [key, vote] = *it;
    if (std::get<0>(key) != r || std::get<1>(key) != v) break;
    cert.quorum.push_back(vote);
  }
  if (cert.quorum.size() < cfg_.quorum()) throw ProtocolMisuse("certificate without quorum");
  return cert;
}

void Engine::maybe_release_certificate(std::vector<Effect>& out) {
  // Laggard evidence is a state condition, not an arrival edge: the vote
  // proving someone is past our decision round may have been stored before
  // we decided.
  if (cfg_.stop_policy != StopPolicy::Delayed) return;
  if (!decided_ || !certificate_ || certificate_sent_) return;
  if (max_other_round_ <= decided_->second) return;
  out.push_back(BroadcastCertEffect{*certificate_});
  certificate_sent_ = true;
  if (phase_ == Phase::Halted) {
    phase_ = Phase::Stopped;
    out.push_back(StoppedEffect{});
  }
}

void Engine::progress(std::vector<Effect>& out) {
  for (;;) {
    switch (phase_) {
      case Phase::Idle:
      case Phase::Halted:
      case Phase::Stopped:
        return;
      case Phase::AwaitTimerA: {
        if (cfg_.coordinator_active(round_) && cfg_.coordinator(round_) == me_)
          try_broadcast(out);
        if (!timer_expired(2 * round_)) return;
        try_broadcast(out);
        if (broadcast_done_.count(round_) == 0) return;  // no justifiable value yet
        phase_ = Phase::AwaitQuorum;
        break;
      }
      case Phase::AwaitQuorum: {
        auto it = round_senders_.find(round_);
        const size_t seen = it == round_senders_.end() ? 0 : it->second.size();
        if (seen < cfg_.quorum()) return;
        arm_timer(2 * round_ + 1, out);
        phase_ = Phase::AwaitTimerB;
        break;
      }
      case Phase::AwaitTimerB: {
        if (!timer_expired(2 * round_ + 1)) return;
        const Value b = round_parity(round_);
        if (!decided_ && counts_.count(round_, b) >= cfg_.quorum()) do_decide(b, out);
        if (phase_ == Phase::Halted || phase_ == Phase::Stopped) return;
        enter_round(round_ + 1, out);
        break;
      }
    }
  }
}

std::vector<uint32_t> Engine::armed_pending() const {
  std::vector<uint32_t> out;
  for (uint32_t index : armed_)
    if (!timer_expired(index)) out.push_back(index);
  return out;
}

std::vector<std::tuple<Round, Value, ProcessId>> Engine::stored_keys() const {
  std::vector<std::tuple<Round, Value, ProcessId>> keys;
  keys.reserve(store_.size());
  for (const auto& [key, vote] : store_) keys.push_back(key);
  return keys;
}

std::string Engine::state_digest() const {
  std::ostringstream os;
  os << "phase=" << phase_name(phase_) << " round=" << round_ << " started=" << started_;
  os << " decided=";
  if (decided_)
    os << int(decided_->first) << "@" << decided_->second;
  else
    os << "-";
  os << " wm=" << expired_watermark_ << " rho=" << rho_;
  os << " bcast=";
  for (Round r : broadcast_done_) os << r << ",";
  os << " fired=";
  for (uint32_t m : fired_) os << m << ",";
  os << " cert=";
  if (certificate_)
    os << int(certificate_->value) << "@" << certificate_->round
       << (certificate_sent_ ? "!" : "");
  else
    os << "-";
  os << " dropped=" << invalid_dropped_;
  os << " store=";
  for (const auto& [key, vote] : store_) {
    os << std::get<0>(key) << ":" << int(std::get<1>(key)) << ":" << std::get<2>(key) << "#"
       << fnv1a64(vote.signature) % 0xffff << ",";
  }
  return os.str();
}

}  // namespace bbc
