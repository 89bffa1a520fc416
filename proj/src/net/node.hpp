// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdio>

#include "net/channel.hpp"
#include "net/wal.hpp"

namespace bbc::net {

struct NodeOptions {
  ProcessId id = 0;
  std::string peers_path;
  std::string keys_dir;
  uint32_t instances = 1;
  std::string proposal = "1";  // "0" | "1" | "random:<p>"
  bool lazy_proofs = false;
  TimerPolicy timers{10, 40, 10};  // node timer units are milliseconds
  Round coord_free_rounds = 10;
  StopPolicy stop_policy = StopPolicy::Delayed;
  std::string wal_path;  // empty disables durability
  uint64_t seed = 0;
  uint32_t retransmit_ms = 200;
  uint32_t linger_ms = 1500;   // serving window after the last decision
  Round round_cap = 256;
  uint64_t deadline_ms = 120000;
  uint64_t instance_base = 0;  // instance ids run base..base+instances-1
  FILE* out = nullptr;         // defaults to stdout
};

// Exit codes: 0 success, 2 watchdog deadline, 3 round cap,
// 64 configuration error, 65 unrecoverable WAL.
int node_main(const NodeOptions& options);

}  // namespace bbc::net
