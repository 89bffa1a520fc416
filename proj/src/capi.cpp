// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "bbc.h"

#include <cstdlib>
#include <cstring>
#include <deque>
#include <sstream>

#include "crypto.hpp"
#include "engine.hpp"
#include "experiment.hpp"
#include "net/node.hpp"
#include "net/proxy.hpp"
#include "net/spawn.hpp"
#include "wire.hpp"

namespace {

thread_local std::string g_last_error;

bbc_status fail(bbc_status st, const std::string& msg) {
  g_last_error = msg;
  return st;
}

template <typename Fn>
bbc_status guard(Fn&& fn) {
  try {
    return fn();
  } catch (const bbc::ProtocolMisuse& e) {
    return fail(BBC_ERR_MISUSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(BBC_ERR_ARGUMENT, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(BBC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(BBC_ERR_RUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_commas(const char* s) {
  std::vector<std::string> out;
  if (!s || !*s) return out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

struct bbc_engine {
  bbc::Keyring ring;
  std::unique_ptr<bbc::Engine> engine;
  std::deque<bbc::Effect> effects;
  bbc::Bytes scratch;  // wire bytes for the effect last handed out
};

extern "C" {

const char* bbc_version(void) { return "1.0.0"; }

const char* bbc_last_error(void) { return g_last_error.c_str(); }

void bbc_string_free(char* s) { std::free(s); }

bbc_status bbc_engine_new(const bbc_engine_config* cfg, bbc_engine** out) {
  if (!cfg || !out) return fail(BBC_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guard([&] {
    bbc::InstanceConfig ic;
    ic.n = cfg->n;
    ic.t = cfg->t;
    ic.instance_id = cfg->instance_id;
    ic.timers = {cfg->free_rounds, cfg->timer_base, cfg->timer_growth};
    ic.coord_free_rounds = cfg->free_rounds;
    if (cfg->stop_policy < 0 || cfg->stop_policy > 2)
      return fail(BBC_ERR_ARGUMENT, "stop_policy out of range");
    ic.stop_policy = static_cast<bbc::StopPolicy>(cfg->stop_policy);
    if (!ic.well_formed()) return fail(BBC_ERR_ARGUMENT, "need n > 3t and n >= 1");
    if (cfg->process_id >= cfg->n) return fail(BBC_ERR_ARGUMENT, "process_id out of range");
    const char* scheme_name = cfg->scheme ? cfg->scheme : "mock";
    const bbc::SignatureScheme* scheme = bbc::scheme_by_name(scheme_name);
    if (!scheme) return fail(BBC_ERR_ARGUMENT, std::string("unknown scheme ") + scheme_name);
    auto e = std::make_unique<bbc_engine>();
    e->ring = bbc::keygen(*scheme, cfg->n, cfg->keyring_seed);
    e->engine = std::make_unique<bbc::Engine>(ic, cfg->process_id, *scheme, e->ring.directory,
                                              e->ring.pairs[cfg->process_id].private_key);
    *out = e.release();
    return BBC_OK;
  });
}

void bbc_engine_free(bbc_engine* e) { delete e; }

bbc_status bbc_engine_start(bbc_engine* e, uint8_t proposal) {
  if (!e) return fail(BBC_ERR_ARGUMENT, "null engine");
  if (proposal > 1) return fail(BBC_ERR_ARGUMENT, "proposal must be 0 or 1");
  return guard([&] {
    auto effects = e->engine->handle_start(proposal);
    e->effects.insert(e->effects.end(), effects.begin(), effects.end());
    return BBC_OK;
  });
}

bbc_status bbc_engine_deliver_vote(bbc_engine* e, const uint8_t* data, size_t size) {
  if (!e || (!data && size > 0)) return fail(BBC_ERR_ARGUMENT, "null argument");
  return guard([&] {
    auto msg = bbc::decode_vote_body({data, size});
    if (!msg) return fail(BBC_ERR_ARGUMENT, "unparsable vote message");
    auto effects = e->engine->handle_receive(*msg);
    e->effects.insert(e->effects.end(), effects.begin(), effects.end());
    return BBC_OK;
  });
}

bbc_status bbc_engine_deliver_cert(bbc_engine* e, const uint8_t* data, size_t size) {
  if (!e || (!data && size > 0)) return fail(BBC_ERR_ARGUMENT, "null argument");
  return guard([&] {
    auto cert = bbc::decode_cert_body({data, size});
    if (!cert) return fail(BBC_ERR_ARGUMENT, "unparsable certificate");
    auto effects = e->engine->handle_cert(*cert);
    e->effects.insert(e->effects.end(), effects.begin(), effects.end());
    return BBC_OK;
  });
}

bbc_status bbc_engine_timer_fired(bbc_engine* e, uint32_t timer_index) {
  if (!e) return fail(BBC_ERR_ARGUMENT, "null engine");
  return guard([&] {
    auto effects = e->engine->handle_timer(timer_index);
    e->effects.insert(e->effects.end(), effects.begin(), effects.end());
    return BBC_OK;
  });
}

int bbc_engine_next_effect(bbc_engine* e, bbc_effect* out) {
  if (!e || !out || e->effects.empty()) return 0;
  *out = {};
  const bbc::Effect eff = std::move(e->effects.front());
  e->effects.pop_front();
  if (const auto* b = std::get_if<bbc::BroadcastEffect>(&eff)) {
    out->kind = BBC_EFFECT_BROADCAST_VOTE;
    e->scratch = bbc::encode_vote_body(b->msg);
    out->data = e->scratch.data();
    out->size = e->scratch.size();
  } else if (const auto* c = std::get_if<bbc::BroadcastCertEffect>(&eff)) {
    out->kind = BBC_EFFECT_BROADCAST_CERT;
    e->scratch = bbc::encode_cert_body(c->cert);
    out->data = e->scratch.data();
    out->size = e->scratch.size();
  } else if (const auto* t = std::get_if<bbc::ArmTimerEffect>(&eff)) {
    out->kind = BBC_EFFECT_ARM_TIMER;
    out->timer_index = t->timer_index;
    out->timer_duration = t->duration;
  } else if (const auto* d = std::get_if<bbc::DecideEffect>(&eff)) {
    out->kind = BBC_EFFECT_DECIDE;
    out->value = d->value;
    out->round = d->round;
  } else {
    out->kind = BBC_EFFECT_STOPPED;
  }
  return 1;
}

int bbc_engine_decided(const bbc_engine* e, uint8_t* value, uint32_t* round) {
  if (!e || !e->engine->decided()) return 0;
  const auto [v, r] = *e->engine->decided();
  if (value) *value = v;
  if (round) *round = r;
  return 1;
}

uint32_t bbc_engine_round(const bbc_engine* e) { return e ? e->engine->round() : 0; }

bbc_status bbc_keygen(const char* scheme, uint32_t n, uint64_t seed, const char* out_dir) {
  if (!scheme || !out_dir) return fail(BBC_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const bbc::SignatureScheme* s = bbc::scheme_by_name(scheme);
    if (!s) return fail(BBC_ERR_ARGUMENT, std::string("unknown scheme ") + scheme);
    bbc::write_key_files(bbc::keygen(*s, n, seed), out_dir);
    return BBC_OK;
  });
}

bbc_status bbc_sim_run_file(const char* scenario_path, char** summary) {
  if (!scenario_path) return fail(BBC_ERR_ARGUMENT, "null path");
  if (summary) *summary = nullptr;
  return guard([&] {
    bbc::ExperimentSpec spec = bbc::parse_scenario_file(scenario_path);
    bbc::ExperimentResult res = bbc::run_experiment(spec);
    std::ostringstream out;
    out << res.raw_csv << "\n" << res.metrics_csv;
    if (!res.failure.empty()) {
      out << "\nSAFETY VIOLATION: " << res.failure << "\n";
      if (!res.failing_trace_path.empty()) out << "trace: " << res.failing_trace_path << "\n";
    }
    if (summary) *summary = dup_string(out.str());
    if (!res.failure.empty()) return fail(BBC_ERR_RUNTIME, res.failure);
    return BBC_OK;
  });
}

bbc_status bbc_fuzz(uint64_t iterations, uint64_t seed, char** summary, uint64_t* violations) {
  if (summary) *summary = nullptr;
  return guard([&] {
    bbc::FuzzReport rep = bbc::fuzz_safety(iterations, seed, {4, 7, 10});
    if (summary) *summary = dup_string(rep.text);
    if (violations) *violations = rep.violations;
    return BBC_OK;
  });
}

bbc_status bbc_check_messages(char** summary, int* ok) {
  if (summary) *summary = nullptr;
  return guard([&] {
    bbc::ModelCheckReport rep = bbc::check_message_model({4, 7, 16}, 1);
    if (summary) *summary = dup_string(rep.text);
    if (ok) *ok = rep.all_ok ? 1 : 0;
    return BBC_OK;
  });
}

int bbc_node_run(const bbc_node_options* opts) {
  if (!opts || !opts->peers_path || !opts->keys_dir || !opts->proposal) {
    g_last_error = "null argument";
    return 64;
  }
  bbc::net::NodeOptions no;
  no.id = opts->id;
  no.peers_path = opts->peers_path;
  no.keys_dir = opts->keys_dir;
  no.instances = opts->instances ? opts->instances : 1;
  no.proposal = opts->proposal;
  no.lazy_proofs = opts->lazy_proofs != 0;
  no.timers = {opts->coord_free_rounds, opts->timer_base, opts->timer_growth};
  no.coord_free_rounds = opts->coord_free_rounds;
  if (opts->wal_path) no.wal_path = opts->wal_path;
  no.seed = opts->seed;
  if (opts->retransmit_ms) no.retransmit_ms = opts->retransmit_ms;
  if (opts->linger_ms) no.linger_ms = opts->linger_ms;
  if (opts->deadline_ms) no.deadline_ms = opts->deadline_ms;
  return bbc::net::node_main(no);
}

int bbc_proxy_run(const bbc_proxy_options* opts) {
  if (!opts || !opts->listen_path || !opts->targets_path) {
    g_last_error = "null argument";
    return 64;
  }
  bbc::net::ProxyOptions po;
  po.listen_path = opts->listen_path;
  po.targets_path = opts->targets_path;
  po.drop = opts->drop;
  po.seed = opts->seed;
  return bbc::net::proxy_main(po);
}

bbc_status bbc_spawn_local(const bbc_spawn_options* opts, char** summary, int* ok) {
  if (!opts || !opts->exe) return fail(BBC_ERR_ARGUMENT, "null argument");
  if (summary) *summary = nullptr;
  if (ok) *ok = 0;
  return guard([&] {
    bbc::net::SpawnOptions so;
    so.n = opts->n;
    so.exe = opts->exe;
    if (opts->work_dir) so.work_dir = opts->work_dir;
    so.proposals = split_commas(opts->proposals);
    so.instances = opts->instances ? opts->instances : 1;
    so.lazy_proofs = opts->lazy_proofs != 0;
    so.lossy_drop = opts->lossy_drop;
    so.seed = opts->seed;
    if (opts->scheme) so.scheme = opts->scheme;
    if (opts->timer_base) so.timers.base = opts->timer_base;
    if (opts->timer_growth) so.timers.growth = opts->timer_growth;
    so.timers.free_rounds = opts->coord_free_rounds;
    so.coord_free_rounds = opts->coord_free_rounds;
    if (opts->retransmit_ms) so.retransmit_ms = opts->retransmit_ms;
    if (opts->linger_ms) so.linger_ms = opts->linger_ms;
    so.kill_id = opts->kill_id;
    so.kill_after_ms = opts->kill_after_ms;
    so.restart_after_ms = opts->restart_after_ms;
    so.wrong_keys_id = opts->wrong_keys_id;
    if (opts->deadline_ms) so.deadline_ms = opts->deadline_ms;
    so.keep_work_dir = opts->keep_work_dir != 0;
    bbc::net::SpawnReport rep = bbc::net::spawn_local(so);
    std::ostringstream out;
    for (const auto& r : rep.results) {
      out << "node=" << r.node << " instance=" << r.instance
          << " decided=" << static_cast<unsigned>(r.decided) << " round=" << r.round
          << " latency_ms=" << r.latency_ms << " msgs_sent=" << r.msgs_sent
          << " msgs_recv=" << r.msgs_recv << " recovered=" << (r.recovered ? 1 : 0) << "\n";
    }
    out << "work_dir=" << rep.work_dir << "\n";
    out << (rep.consistent && rep.complete ? "verdict=ok" : "verdict=fail " + rep.failure)
        << "\n";
    if (summary) *summary = dup_string(out.str());
    if (ok) *ok = (rep.consistent && rep.complete) ? 1 : 0;
    return BBC_OK;
  });
}

}  // extern "C"
