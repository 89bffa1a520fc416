// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <chrono>
#include <functional>

#include "wire.hpp"

namespace bbc::net {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Millis = std::chrono::milliseconds;

struct PeerAddr {
  std::string host;
  uint16_t port = 0;
};

// Peer address file: one "index host port" line per process.
std::vector<PeerAddr> load_peer_file(const std::string& path);
void write_peer_file(const std::string& path, const std::vector<PeerAddr>& peers);

// Reliable exactly-once frame delivery over UDP: every non-ack frame is
// retransmitted until acked; receivers ack everything and deduplicate by
// per-link sequence number before delivering upward.
class Transport {
 public:
  struct Options {
    uint32_t retransmit_ms = 200;  // doubled per retry, capped at 5000
    uint32_t retransmit_cap_ms = 5000;
  };

  Transport(ProcessId me, const std::vector<PeerAddr>& peers, Options opts);
  ~Transport();
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  // Sequence numbers start above this epoch; a recovering process passes a
  // larger epoch so its fresh frames cannot collide with pre-crash ones.
  void set_seq_epoch(uint64_t epoch);

  // Late address fix-up, for tests that bind ephemeral ports first.
  void set_peer(ProcessId peer, const PeerAddr& addr);

  // Queues one reliable frame to a peer.  Self-sends are not supported
  // here; the node loops its own messages back directly.
  void send(ProcessId to, uint8_t kind, Bytes body);

  // Drains the socket and retransmission schedule.  Delivers each new
  // frame upward exactly once.  Returns after `wait` or earlier.
  void poll(Millis wait, const std::function<void(const Frame&)>& deliver);

  // Earliest pending retransmission deadline, if any.
  std::optional<TimePoint> next_deadline() const;

  bool all_acked() const;
  uint64_t datagrams_sent() const { return datagrams_sent_; }
  uint64_t datagrams_received() const { return datagrams_received_; }
  uint64_t retransmissions() const { return retransmissions_; }
  uint16_t local_port() const { return local_port_; }

 private:
  struct Pending {
    Bytes datagram;
    TimePoint next_send;
    uint32_t interval_ms;
  };
  struct Link {
    uint64_t next_seq = 1;
    std::map<uint64_t, Pending> unacked;
    // Dedup state: everything at or below the watermark was delivered.
    uint64_t delivered_floor = 0;
    std::set<uint64_t> delivered_above;
  };

  void raw_send(ProcessId to, const Bytes& datagram);
  void send_ack(ProcessId to, uint64_t seq);
  void handle_datagram(std::span<const uint8_t> data,
                       const std::function<void(const Frame&)>& deliver);
  void retransmit_due();

  ProcessId me_;
  std::vector<PeerAddr> peers_;
  Options opts_;
  int fd_ = -1;
  uint16_t local_port_ = 0;
  std::vector<Link> links_;
  uint64_t seq_epoch_ = 0;
  uint64_t datagrams_sent_ = 0;
  uint64_t datagrams_received_ = 0;
  uint64_t retransmissions_ = 0;
};

}  // namespace bbc::net
