// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "bbc.h"

namespace {

void print_and_free(char* s) {
  if (!s) return;
  std::fputs(s, stdout);
  bbc_string_free(s);
}

std::string self_exe() {
  char buf[4096];
  ssize_t len = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (len <= 0) return "";
  buf[len] = '\0';
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binary consensus toolkit"};
  app.require_subcommand(1);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "write a key directory");
  std::string kg_scheme = "ed25519";
  uint32_t kg_n = 4;
  uint64_t kg_seed = 1;
  std::string kg_out = "keys";
  keygen->add_option("--scheme", kg_scheme, "mock or ed25519");
  keygen->add_option("--n", kg_n, "process count")->required();
  keygen->add_option("--seed", kg_seed, "keyring seed");
  keygen->add_option("--out", kg_out, "output directory")->required();

  // sim run / sim fuzz
  auto* sim = app.add_subcommand("sim", "deterministic simulation");
  sim->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "run the experiment in a scenario file");
  std::string scenario_path;
  sim_run->add_option("scenario", scenario_path, "scenario file")->required();
  auto* sim_fuzz = sim->add_subcommand("fuzz", "randomized adversarial safety search");
  uint64_t fuzz_iterations = 1000;
  uint64_t fuzz_seed = 1;
  sim_fuzz->add_option("--iterations", fuzz_iterations, "scenario count");
  sim_fuzz->add_option("--seed", fuzz_seed, "base seed");

  // check-messages
  auto* check = app.add_subcommand("check-messages", "verify the message count model");

  // net spawn-local
  auto* net = app.add_subcommand("net", "real processes over UDP");
  net->require_subcommand(1);
  auto* spawn = net->add_subcommand("spawn-local", "run n local nodes to agreement");
  bbc_spawn_options so{};
  uint32_t sp_n = 4;
  std::string sp_workdir, sp_proposals, sp_scheme = "ed25519";
  uint64_t sp_timer_base = 40, sp_timer_growth = 10;
  uint32_t sp_free_rounds = 10;
  spawn->add_option("n", sp_n, "process count")->required();
  spawn->add_option("--instances", so.instances, "instances per node");
  spawn->add_option("--proposals", sp_proposals, "comma-separated per-node proposal specs");
  spawn->add_flag("--lazy-proofs", so.lazy_proofs, "strip proofs from outbound votes");
  spawn->add_option("--drop", so.lossy_drop, "datagram drop probability via proxy");
  spawn->add_option("--seed", so.seed, "run seed");
  spawn->add_option("--scheme", sp_scheme, "signature scheme");
  spawn->add_option("--timer-base", sp_timer_base, "round timer base, ms");
  spawn->add_option("--timer-growth", sp_timer_growth, "round timer growth, ms");
  spawn->add_option("--coord-free-rounds", sp_free_rounds, "untimed leading rounds");
  spawn->add_option("--retransmit-ms", so.retransmit_ms, "initial retransmit interval");
  spawn->add_option("--linger-ms", so.linger_ms, "serving window after decisions");
  spawn->add_option("--kill-id", so.kill_id, "node to SIGKILL");
  spawn->add_option("--kill-after-ms", so.kill_after_ms, "when to kill");
  spawn->add_option("--restart-after-ms", so.restart_after_ms, "when to restart (0: never)");
  spawn->add_option("--wrong-keys-id", so.wrong_keys_id, "node signing with unlisted key");
  spawn->add_option("--deadline-ms", so.deadline_ms, "overall deadline");
  spawn->add_option("--work-dir", sp_workdir, "working directory (default: temp)");
  spawn->add_flag("--keep-work-dir", so.keep_work_dir, "keep files after a clean run");
  so.kill_id = -1;
  so.wrong_keys_id = -1;
  so.instances = 1;
  so.seed = 1;
  so.deadline_ms = 60000;

  // node (one consensus process; normally started by spawn-local)
  auto* node = app.add_subcommand("node", "run one consensus process");
  bbc_node_options no{};
  std::string nd_peers, nd_keys, nd_proposal = "random:0.5", nd_wal;
  uint64_t nd_timer_base = 40, nd_timer_growth = 10;
  no.instances = 1;
  no.coord_free_rounds = 10;
  node->add_option("--id", no.id, "process id")->required();
  node->add_option("--peers", nd_peers, "peer address file")->required();
  node->add_option("--keys", nd_keys, "key directory")->required();
  node->add_option("--instances", no.instances, "consecutive instances to decide");
  node->add_option("--proposal", nd_proposal, "0, 1 or random:<p>");
  node->add_flag("--lazy-proofs", no.lazy_proofs, "strip proofs from outbound votes");
  node->add_option("--timer-base", nd_timer_base, "round timer base, ms");
  node->add_option("--timer-growth", nd_timer_growth, "round timer growth, ms");
  node->add_option("--coord-free-rounds", no.coord_free_rounds, "untimed leading rounds");
  node->add_option("--wal", nd_wal, "write-ahead log path");
  node->add_option("--seed", no.seed, "seed for random proposals");
  node->add_option("--retransmit-ms", no.retransmit_ms, "initial retransmit interval");
  node->add_option("--linger-ms", no.linger_ms, "serving window after decisions");
  node->add_option("--deadline-ms", no.deadline_ms, "watchdog deadline");

  // proxy (lossy forwarder; normally started by spawn-local)
  auto* proxy = app.add_subcommand("proxy", "lossy datagram forwarder");
  bbc_proxy_options po{};
  std::string px_listen, px_targets;
  proxy->add_option("--listen", px_listen, "addresses to bind")->required();
  proxy->add_option("--targets", px_targets, "addresses to forward to")->required();
  proxy->add_option("--drop", po.drop, "drop probability");
  proxy->add_option("--seed", po.seed, "drop decision seed");

  CLI11_PARSE(app, argc, argv);

  if (*keygen) {
    bbc_status st = bbc_keygen(kg_scheme.c_str(), kg_n, kg_seed, kg_out.c_str());
    if (st != BBC_OK) {
      std::fprintf(stderr, "keygen: %s\n", bbc_last_error());
      return 1;
    }
    std::printf("wrote %u %s keys to %s\n", kg_n, kg_scheme.c_str(), kg_out.c_str());
    return 0;
  }

  if (*sim_run) {
    char* summary = nullptr;
    bbc_status st = bbc_sim_run_file(scenario_path.c_str(), &summary);
    print_and_free(summary);
    if (st != BBC_OK) {
      std::fprintf(stderr, "sim run: %s\n", bbc_last_error());
      return 1;
    }
    return 0;
  }

  if (*sim_fuzz) {
    char* summary = nullptr;
    uint64_t violations = 0;
    bbc_status st = bbc_fuzz(fuzz_iterations, fuzz_seed, &summary, &violations);
    print_and_free(summary);
    if (st != BBC_OK) {
      std::fprintf(stderr, "sim fuzz: %s\n", bbc_last_error());
      return 1;
    }
    return violations == 0 ? 0 : 1;
  }

  if (*check) {
    char* summary = nullptr;
    int ok = 0;
    bbc_status st = bbc_check_messages(&summary, &ok);
    print_and_free(summary);
    if (st != BBC_OK) {
      std::fprintf(stderr, "check-messages: %s\n", bbc_last_error());
      return 1;
    }
    return ok ? 0 : 1;
  }

  if (*spawn) {
    const std::string exe = self_exe();
    so.n = sp_n;
    so.exe = exe.c_str();
    so.work_dir = sp_workdir.empty() ? nullptr : sp_workdir.c_str();
    so.proposals = sp_proposals.empty() ? nullptr : sp_proposals.c_str();
    so.scheme = sp_scheme.c_str();
    so.timer_base = sp_timer_base;
    so.timer_growth = sp_timer_growth;
    so.coord_free_rounds = sp_free_rounds;
    char* summary = nullptr;
    int ok = 0;
    bbc_status st = bbc_spawn_local(&so, &summary, &ok);
    print_and_free(summary);
    if (st != BBC_OK) {
      std::fprintf(stderr, "spawn-local: %s\n", bbc_last_error());
      return 1;
    }
    return ok ? 0 : 1;
  }

  if (*node) {
    no.peers_path = nd_peers.c_str();
    no.keys_dir = nd_keys.c_str();
    no.proposal = nd_proposal.c_str();
    no.wal_path = nd_wal.empty() ? nullptr : nd_wal.c_str();
    no.timer_base = nd_timer_base;
    no.timer_growth = nd_timer_growth;
    int code = bbc_node_run(&no);
    if (code == 64 || code == 65) std::fprintf(stderr, "node: %s\n", bbc_last_error());
    return code;
  }

  if (*proxy) {
    po.listen_path = px_listen.c_str();
    po.targets_path = px_targets.c_str();
    return bbc_proxy_run(&po);
  }

  return 0;
}
