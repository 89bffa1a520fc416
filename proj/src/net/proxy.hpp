// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <string>

namespace bbc::net {

struct ProxyOptions {
  // Peer-format file of addresses this proxy binds, one per process.
  std::string listen_path;
  // Peer-format file of the real process addresses, same indexing.
  std::string targets_path;
  double drop = 0.0;  // independent drop probability per datagram
  uint64_t seed = 1;
};

// Stateless lossy forwarder: a datagram arriving on listen socket i is
// forwarded to target i or dropped.  Runs until killed or orphaned.
// Returns a sysexits-style code on setup failure.
int proxy_main(const ProxyOptions& opts);

}  // namespace bbc::net
