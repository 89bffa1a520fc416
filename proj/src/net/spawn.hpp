// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "types.hpp"

namespace bbc::net {

struct SpawnOptions {
  uint32_t n = 4;
  std::string exe;       // binary exec'd for node and proxy children
  std::string work_dir;  // created under /tmp when empty
  // Per-process proposal specs ("0", "1", "random:<p>"); empty means
  // "random:0.5" for everyone.
  std::vector<std::string> proposals;
  uint32_t instances = 1;
  bool lazy_proofs = false;
  double lossy_drop = 0.0;  // >0 routes every link through a lossy proxy
  uint64_t seed = 1;
  std::string scheme = "ed25519";
  TimerPolicy timers{10, 40, 10};
  Round coord_free_rounds = 10;
  uint32_t retransmit_ms = 50;
  uint32_t linger_ms = 1500;
  // Crash schedule: SIGKILL node kill_id at kill_after_ms, restart it at
  // restart_after_ms (0 means never restart).  kill_id < 0 disables.
  int kill_id = -1;
  uint64_t kill_after_ms = 0;
  uint64_t restart_after_ms = 0;
  // This node signs with a key the directory does not list.
  int wrong_keys_id = -1;
  uint64_t deadline_ms = 60000;
  bool keep_work_dir = false;
};

struct SpawnResult {
  uint32_t node = 0;
  uint64_t instance = 0;
  Value decided = 0;
  Round round = 0;
  double latency_ms = 0.0;
  uint64_t msgs_sent = 0;
  uint64_t msgs_recv = 0;
  bool recovered = false;
};

struct SpawnReport {
  std::string work_dir;
  std::vector<SpawnResult> results;  // final report per (node, instance)
  std::vector<int> exit_codes;       // last observed per node, -1 if running
  bool consistent = false;           // per-instance decided values agree
  bool complete = false;             // every surviving node reported everything
  std::string failure;               // first problem found, empty when clean
};

SpawnReport spawn_local(const SpawnOptions& opts);

}  // namespace bbc::net
