// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "net/node.hpp"

#include <cinttypes>
#include <deque>

namespace bbc::net {

namespace {

struct PendingVote {
  SignedAux vote;
  TimePoint next_request;
  uint32_t interval_ms;
};

struct NodeInstance {
  std::unique_ptr<Engine> engine;
  std::map<uint32_t, TimePoint> timer_deadlines;
  std::map<std::tuple<Round, Value, ProcessId>, PendingVote> pending;
  TimePoint started_at{};
  TimePoint decided_at{};
  bool result_printed = false;
  bool recovered_decided = false;
  uint64_t msgs_sent = 0;
  uint64_t msgs_recv = 0;
};

class Node {
 public:
  Node(const NodeOptions& opts) : opts_(opts), out_(opts.out ? opts.out : stdout) {}

  int run();

 private:
  NodeInstance& instance(uint64_t id);
  InstanceConfig config_for(uint64_t id) const;
  Value proposal_for(uint64_t id) const;

  void start_instance(uint64_t id);
  void on_frame(const Frame& frame);
  void on_vote_frame(const Frame& frame);
  void on_cert_frame(const Frame& frame);
  void on_proof_request(const Frame& frame);
  void on_proof_response(const Frame& frame);
  void dispatch(uint64_t id, std::vector<Effect> effects);
  void deliver_self(uint64_t id, const AuxProofMsg& msg);
  void retry_pending(uint64_t id);
  void request_proofs(uint64_t id, PendingVote& pv);
  void fire_due_timers();
  void service_pending_requests();
  void print_result(uint64_t id);
  bool vote_msg_plausible(const Engine& eng, const AuxProofMsg& msg) const;

  void wal_append(uint8_t type, const Bytes& payload) {
    if (wal_) wal_->append(type, payload);
  }

  const NodeOptions& opts_;
  FILE* out_;
  uint32_t n_ = 0;
  const SignatureScheme* scheme_ = nullptr;
  KeyDirectory directory_;
  Bytes private_key_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<Wal> wal_;
  std::map<uint64_t, NodeInstance> instances_;
  uint64_t current_ = 0;  // instance id being driven
  std::deque<std::pair<uint64_t, AuxProofMsg>> self_queue_;
  bool round_cap_hit_ = false;
};

NodeInstance& Node::instance(uint64_t id) {
  auto it = instances_.find(id);
  if (it != instances_.end()) return it->second;
  NodeInstance inst;
  inst.engine = std::make_unique<Engine>(config_for(id), opts_.id, *scheme_, directory_,
                                         private_key_);
  inst.started_at = Clock::now();
  return instances_.emplace(id, std::move(inst)).first->second;
}

InstanceConfig Node::config_for(uint64_t id) const {
  InstanceConfig cfg;
  cfg.n = n_;
  cfg.t = (n_ - 1) / 3;
  cfg.instance_id = id;
  cfg.timers = opts_.timers;
  cfg.coord_free_rounds = opts_.coord_free_rounds;
  cfg.stop_policy = opts_.stop_policy;
  return cfg;
}

Value Node::proposal_for(uint64_t id) const {
  if (opts_.proposal == "0") return 0;
  if (opts_.proposal == "1") return 1;
  const double p = std::stod(opts_.proposal.substr(7));
  SplitMix64 rng(mix_seed({opts_.seed, 0x70726f70ULL, id, opts_.id}));
  return rng.unit() < p ? 1 : 0;
}

void Node::start_instance(uint64_t id) {
  current_ = id;
  NodeInstance& inst = instance(id);
  inst.started_at = Clock::now();
  if (inst.engine->started() || inst.engine->decided()) {
    if (inst.engine->decided()) {
      inst.recovered_decided = true;
      print_result(id);
    } else if (auto sent = inst.engine->sent_message(inst.engine->round())) {
      // Pre-crash datagrams may have died unsent; peers drop duplicates.
      AuxProofMsg outbound = *sent;
      if (opts_.lazy_proofs) outbound.proofs.clear();
      const Bytes body = encode_vote_body(outbound);
      for (ProcessId peer = 0; peer < n_; ++peer) {
        if (peer == opts_.id) continue;
        transport_->send(peer, kFrameVote, body);
        ++inst.msgs_sent;
      }
    }
    return;
  }
  const Value v = proposal_for(id);
  Bytes payload;
  put_u64(payload, id);
  payload.push_back(v);
  wal_append(kWalStart, payload);
  dispatch(id, inst.engine->handle_start(v));
}

bool Node::vote_msg_plausible(const Engine& eng, const AuxProofMsg& msg) const {
  ProofCounts counts;
  for (const auto& p : msg.proofs) {
    if (p.payload.instance_id != eng.config().instance_id) return false;
    if (!directory_.has(p.sender) ||
        !scheme_->verify(directory_.key(p.sender), canonical_encode(p.payload), p.signature))
      return false;
    counts.add(p.payload.round, p.payload.value, p.sender);
  }
  return is_valid(eng.config(), msg.vote.payload.round, msg.vote.payload.value, counts);
}

void Node::deliver_self(uint64_t id, const AuxProofMsg& msg) {
  NodeInstance& inst = instance(id);
  wal_append(kWalVoteIn, encode_vote_body(msg));
  dispatch(id, inst.engine->handle_receive(msg));
}

void Node::dispatch(uint64_t id, std::vector<Effect> effects) {
  NodeInstance& inst = instance(id);
  const TimePoint now = Clock::now();
  for (auto& eff : effects) {
    if (auto* b = std::get_if<BroadcastEffect>(&eff)) {
      wal_append(kWalOwnVote, encode_vote_body(b->msg));
      AuxProofMsg outbound = b->msg;
      if (opts_.lazy_proofs) outbound.proofs.clear();
      const Bytes body = encode_vote_body(outbound);
      for (ProcessId peer = 0; peer < n_; ++peer) {
        if (peer == opts_.id) continue;
        transport_->send(peer, kFrameVote, body);
        ++inst.msgs_sent;
      }
      self_queue_.emplace_back(id, b->msg);  // own copy keeps its proofs
      ++inst.msgs_sent;
    } else if (auto* c = std::get_if<BroadcastCertEffect>(&eff)) {
      const Bytes body = encode_cert_body(c->cert);
      for (ProcessId peer = 0; peer < n_; ++peer) {
        if (peer == opts_.id) continue;
        transport_->send(peer, kFrameCert, body);
        ++inst.msgs_sent;
      }
    } else if (auto* t = std::get_if<ArmTimerEffect>(&eff)) {
      inst.timer_deadlines.emplace(t->timer_index, now + Millis(t->duration));
    } else if (auto* d = std::get_if<DecideEffect>(&eff)) {
      (void)d;
      inst.decided_at = now;
    }
  }
  if (inst.engine->round() > opts_.round_cap) round_cap_hit_ = true;
}

void Node::on_vote_frame(const Frame& frame) {
  auto msg = decode_vote_body(frame.body);
  if (!msg) return;
  const uint64_t id = msg->vote.payload.instance_id;
  NodeInstance& inst = instance(id);
  ++inst.msgs_recv;
  const size_t stored_before = inst.engine->stored_votes();
  if (msg->proofs.empty() && msg->vote.payload.round > 0) {
    // Proofless vote: accept from local evidence or ask the sender.
    wal_append(kWalLocalVote, encode_vote_body(*msg));
    auto [acc, effects] = inst.engine->try_accept_local(msg->vote);
    dispatch(id, std::move(effects));
    if (acc == Engine::LocalAccept::NeedProofs) {
      auto key = msg->vote.key();
      if (!inst.pending.count(key)) {
        PendingVote pv{msg->vote, Clock::now(), opts_.retransmit_ms};
        request_proofs(id, pv);
        inst.pending.emplace(key, std::move(pv));
      }
    }
  } else {
    wal_append(kWalVoteIn, frame.body);
    dispatch(id, inst.engine->handle_receive(*msg));
  }
  if (inst.engine->stored_votes() > stored_before) retry_pending(id);
}

void Node::on_cert_frame(const Frame& frame) {
  auto cert = decode_cert_body(frame.body);
  if (!cert) return;
  NodeInstance& inst = instance(cert->instance_id);
  ++inst.msgs_recv;
  wal_append(kWalCertIn, frame.body);
  dispatch(cert->instance_id, inst.engine->handle_cert(*cert));
}

void Node::on_proof_request(const Frame& frame) {
  auto req = decode_proof_req_body(frame.body);
  if (!req || frame.sender >= n_) return;
  auto it = instances_.find(req->instance_id);
  if (it == instances_.end()) return;
  Engine& eng = *it->second.engine;
  std::optional<std::vector<SignedAux>> proofs;
  if (auto sent = eng.sent_message(req->round);
      sent && sent->vote.payload.value == req->value && req->vote_sender == opts_.id)
    proofs = sent->proofs;
  else
    proofs = eng.witness_for(req->round, req->value);
  if (!proofs) return;  // nothing to offer; requester will retry
  ProofResponse resp{*req, std::move(*proofs)};
  transport_->send(frame.sender, kFrameProofResp, encode_proof_resp_body(resp));
  ++it->second.msgs_sent;
}

void Node::on_proof_response(const Frame& frame) {
  auto resp = decode_proof_resp_body(frame.body);
  if (!resp) return;
  const uint64_t id = resp->about.instance_id;
  auto it = instances_.find(id);
  if (it == instances_.end()) return;
  NodeInstance& inst = it->second;
  ++inst.msgs_recv;
  auto key = std::make_tuple(resp->about.round, resp->about.value, resp->about.vote_sender);
  auto pit = inst.pending.find(key);
  if (pit == inst.pending.end()) return;
  AuxProofMsg completed{pit->second.vote, resp->proofs};
  // A response that does not actually justify the vote leaves it pending.
  if (!vote_msg_plausible(*inst.engine, completed)) return;
  inst.pending.erase(pit);
  const size_t stored_before = inst.engine->stored_votes();
  wal_append(kWalVoteIn, encode_vote_body(completed));
  dispatch(id, inst.engine->handle_receive(completed));
  if (inst.engine->stored_votes() > stored_before) retry_pending(id);
}

void Node::retry_pending(uint64_t id) {
  NodeInstance& inst = instance(id);
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (auto it = inst.pending.begin(); it != inst.pending.end();) {
      // Only re-run votes the local store can now justify; each re-run is
      // logged so replay repeats the exact engine call sequence.
      const auto& vote = it->second.vote;
      if (!inst.engine->locally_justified(vote.payload.round, vote.payload.value)) {
        ++it;
        continue;
      }
      wal_append(kWalLocalVote, encode_vote_body({vote, {}}));
      auto [acc, effects] = inst.engine->try_accept_local(vote);
      dispatch(id, std::move(effects));
      if (acc == Engine::LocalAccept::NeedProofs) {
        ++it;
      } else {
        it = inst.pending.erase(it);
        progressed = true;
      }
    }
  }
}

void Node::request_proofs(uint64_t id, PendingVote& pv) {
  ProofRequest req{id, pv.vote.payload.round, pv.vote.payload.value, pv.vote.sender};
  if (pv.vote.sender != opts_.id) {
    transport_->send(pv.vote.sender, kFrameProofReq, encode_proof_req_body(req));
    ++instance(id).msgs_sent;
  }
  pv.interval_ms = std::min(pv.interval_ms * 2, 5000u);
  pv.next_request = Clock::now() + Millis(pv.interval_ms);
}

void Node::service_pending_requests() {
  const TimePoint now = Clock::now();
  for (auto& [id, inst] : instances_)
    for (auto& [key, pv] : inst.pending)
      if (pv.next_request <= now) request_proofs(id, pv);
}

void Node::fire_due_timers() {
  const TimePoint now = Clock::now();
  for (auto& [id, inst] : instances_) {
    for (;;) {
      auto due = inst.timer_deadlines.end();
      for (auto it = inst.timer_deadlines.begin(); it != inst.timer_deadlines.end(); ++it) {
        if (it->second <= now) {
          due = it;
          break;
        }
      }
      if (due == inst.timer_deadlines.end()) break;
      const uint32_t index = due->first;
      inst.timer_deadlines.erase(due);
      Bytes payload;
      put_u64(payload, id);
      put_u32(payload, index);
      wal_append(kWalTimer, payload);
      dispatch(id, inst.engine->handle_timer(index));
    }
  }
}

void Node::print_result(uint64_t id) {
  NodeInstance& inst = instance(id);
  if (inst.result_printed || !inst.engine->decided()) return;
  inst.result_printed = true;
  const auto [value, round] = *inst.engine->decided();
  double latency_ms = 0.0;
  if (!inst.recovered_decided)
    latency_ms = std::chrono::duration<double, std::milli>(
                     (inst.decided_at == TimePoint{} ? Clock::now() : inst.decided_at) -
                     inst.started_at)
                     .count();
  std::fprintf(out_, "result instance=%" PRIu64 " decided=%u round=%u latency_ms=%.3f"
               " msgs_sent=%" PRIu64 " msgs_recv=%" PRIu64 " recovered=%d\n",
               id, unsigned(value), unsigned(round), latency_ms, inst.msgs_sent,
               inst.msgs_recv, inst.recovered_decided ? 1 : 0);
  std::fflush(out_);
}

void Node::on_frame(const Frame& frame) {
  switch (frame.kind) {
    case kFrameVote:
      on_vote_frame(frame);
      break;
    case kFrameCert:
      on_cert_frame(frame);
      break;
    case kFrameProofReq:
      on_proof_request(frame);
      break;
    case kFrameProofResp:
      on_proof_response(frame);
      break;
    default:
      break;
  }
}

int Node::run() {
  std::vector<PeerAddr> peers;
  try {
    peers = load_peer_file(opts_.peers_path);
    n_ = static_cast<uint32_t>(peers.size());
    directory_ = load_key_directory(opts_.keys_dir);
    private_key_ = load_private_key(opts_.keys_dir, opts_.id);
    scheme_ = scheme_by_name(directory_.scheme());
    if (!scheme_) throw std::runtime_error("unknown scheme " + directory_.scheme());
    if (opts_.id >= n_) throw std::runtime_error("node id out of range");
    if (directory_.size() < n_) throw std::runtime_error("key directory smaller than n");
    if (opts_.proposal != "0" && opts_.proposal != "1" &&
        opts_.proposal.rfind("random:", 0) != 0)
      throw std::runtime_error("bad proposal: " + opts_.proposal);
    transport_ = std::make_unique<Transport>(
        opts_.id, peers, Transport::Options{opts_.retransmit_ms, 5000});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "node %u: %s\n", opts_.id, e.what());
    return 64;
  }

  uint64_t epoch = 1;
  if (!opts_.wal_path.empty()) {
    try {
      ReplayResult replay = wal_replay(opts_.wal_path, config_for(0), *scheme_, directory_,
                                       private_key_, opts_.id);
      epoch = replay.epoch + 1;
      for (auto& [id, rec] : replay.instances) {
        NodeInstance inst;
        inst.engine = std::move(rec.engine);
        inst.started_at = Clock::now();
        const TimePoint now = Clock::now();
        for (uint32_t index : inst.engine->armed_pending())
          inst.timer_deadlines.emplace(index,
                                       now + Millis(timer_duration(opts_.timers, index)));
        instances_.emplace(id, std::move(inst));
      }
      wal_ = std::make_unique<Wal>(opts_.wal_path);
      Bytes payload;
      put_u64(payload, epoch);
      wal_->append(kWalEpoch, payload);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "node %u: wal: %s\n", opts_.id, e.what());
      return 65;
    }
  }
  transport_->set_seq_epoch(epoch << 24);

  const TimePoint boot = Clock::now();
  const TimePoint watchdog = boot + Millis(opts_.deadline_ms);
  start_instance(opts_.instance_base);

  std::optional<TimePoint> all_done_at;
  for (;;) {
    const TimePoint now = Clock::now();
    if (now > watchdog) {
      std::fprintf(stderr, "node %u: watchdog deadline\n", opts_.id);
      return 2;
    }
    if (round_cap_hit_) {
      std::fprintf(stderr, "node %u: round cap exceeded\n", opts_.id);
      return 3;
    }

    transport_->poll(Millis(20), [this](const Frame& f) { on_frame(f); });
    while (!self_queue_.empty()) {
      auto [id, msg] = std::move(self_queue_.front());
      self_queue_.pop_front();
      deliver_self(id, msg);
    }
    fire_due_timers();
    service_pending_requests();

    // Instance bookkeeping: print results, advance, or linger then exit.
    if (instance(current_).engine->decided()) {
      print_result(current_);
      const uint64_t last = opts_.instance_base + opts_.instances - 1;
      if (current_ < last) {
        start_instance(current_ + 1);
        all_done_at.reset();
      } else if (!all_done_at) {
        all_done_at = Clock::now();
      }
    }
    if (all_done_at && Clock::now() >= *all_done_at + Millis(opts_.linger_ms) &&
        transport_->all_acked())
      break;
    if (all_done_at && Clock::now() >= *all_done_at + Millis(opts_.linger_ms * 4))
      break;  // peers gone; unacked frames will never clear
  }
  return 0;
}

}  // namespace

int node_main(const NodeOptions& options) {
  try {
    Node node(options);
    return node.run();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "node %u: fatal: %s\n", options.id, e.what());
    return 70;
  }
}

}  // namespace bbc::net
