// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "net/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <sstream>

namespace bbc::net {

std::vector<PeerAddr> load_peer_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open peer file " + path);
  std::vector<PeerAddr> peers;
  uint32_t index;
  std::string host;
  uint16_t port;
  while (in >> index >> host >> port) {
    if (index != peers.size()) throw std::runtime_error("peer file indices out of order");
    peers.push_back({host, port});
  }
  if (peers.empty()) throw std::runtime_error("peer file is empty: " + path);
  return peers;
}

void write_peer_file(const std::string& path, const std::vector<PeerAddr>& peers) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write peer file " + path);
  for (size_t i = 0; i < peers.size(); ++i)
    out << i << " " << peers[i].host << " " << peers[i].port << "\n";
}

namespace {

sockaddr_in to_sockaddr(const PeerAddr& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  if (inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1)
    throw std::runtime_error("bad peer address " + addr.host);
  return sa;
}

}  // namespace

Transport::Transport(ProcessId me, const std::vector<PeerAddr>& peers, Options opts)
    : me_(me), peers_(peers), opts_(opts), links_(peers.size()) {
  if (me >= peers.size()) throw std::runtime_error("transport: own index out of range");
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::runtime_error("transport: socket() failed");
  sockaddr_in sa = to_sockaddr(peers_[me_]);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    ::close(fd_);
    throw std::runtime_error("transport: bind failed on port " +
                             std::to_string(peers_[me_].port));
  }
  socklen_t len = sizeof sa;
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) == 0)
    local_port_ = ntohs(sa.sin_port);
}

Transport::~Transport() {
  if (fd_ >= 0) ::close(fd_);
}

void Transport::set_seq_epoch(uint64_t epoch) {
  seq_epoch_ = epoch;
  for (auto& link : links_) link.next_seq = std::max(link.next_seq, epoch + 1);
}

void Transport::set_peer(ProcessId peer, const PeerAddr& addr) {
  peers_.at(peer) = addr;
}

void Transport::raw_send(ProcessId to, const Bytes& datagram) {
  sockaddr_in sa = to_sockaddr(peers_.at(to));
  ::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<sockaddr*>(&sa),
           sizeof sa);
  ++datagrams_sent_;
}

void Transport::send(ProcessId to, uint8_t kind, Bytes body) {
  if (to == me_) throw std::runtime_error("transport: self-send not supported");
  Link& link = links_.at(to);
  Frame f;
  f.kind = kind;
  f.sender = me_;
  f.seq = link.next_seq++;
  f.body = std::move(body);
  Bytes datagram = encode_frame(f);
  raw_send(to, datagram);
  link.unacked.emplace(f.seq,
                       Pending{std::move(datagram), Clock::now() + Millis(opts_.retransmit_ms),
                               opts_.retransmit_ms});
}

void Transport::send_ack(ProcessId to, uint64_t seq) {
  Frame f;
  f.kind = kFrameAck;
  f.sender = me_;
  f.seq = seq;
  raw_send(to, encode_frame(f));
}

void Transport::handle_datagram(std::span<const uint8_t> data,
                                const std::function<void(const Frame&)>& deliver) {
  auto frame = decode_frame(data);
  if (!frame || frame->sender >= links_.size() || frame->sender == me_) return;
  ++datagrams_received_;
  Link& link = links_[frame->sender];
  if (frame->kind == kFrameAck) {
    link.unacked.erase(frame->seq);
    return;
  }
  send_ack(frame->sender, frame->seq);
  if (frame->seq <= link.delivered_floor || link.delivered_above.count(frame->seq)) return;
  if (frame->seq == link.delivered_floor + 1) {
    ++link.delivered_floor;
    auto it = link.delivered_above.begin();
    while (it != link.delivered_above.end() && *it == link.delivered_floor + 1) {
      ++link.delivered_floor;
      it = link.delivered_above.erase(it);
    }
  } else {
    link.delivered_above.insert(frame->seq);
  }
  deliver(*frame);
}

void Transport::retransmit_due() {
  const TimePoint now = Clock::now();
  for (ProcessId p = 0; p < links_.size(); ++p) {
    for (auto& [seq, pending] : links_[p].unacked) {
      if (pending.next_send > now) continue;
      raw_send(p, pending.datagram);
      ++retransmissions_;
      pending.interval_ms = std::min(pending.interval_ms * 2, opts_.retransmit_cap_ms);
      pending.next_send = now + Millis(pending.interval_ms);
    }
  }
}

std::optional<TimePoint> Transport::next_deadline() const {
  std::optional<TimePoint> earliest;
  for (const auto& link : links_)
    for (const auto& [seq, pending] : link.unacked)
      if (!earliest || pending.next_send < *earliest) earliest = pending.next_send;
  return earliest;
}

bool Transport::all_acked() const {
  for (const auto& link : links_)
    if (!link.unacked.empty()) return false;
  return true;
}

void Transport::poll(Millis wait, const std::function<void(const Frame&)>& deliver) {
  TimePoint deadline = Clock::now() + wait;
  if (auto retx = next_deadline(); retx && *retx < deadline) deadline = *retx;
  auto remaining = std::chrono::duration_cast<Millis>(deadline - Clock::now());
  if (remaining.count() < 0) remaining = Millis(0);

  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
  if (rc > 0 && (pfd.revents & POLLIN)) {
    uint8_t buf[65536];
    for (;;) {
      const ssize_t got = ::recv(fd_, buf, sizeof buf, MSG_DONTWAIT);
      if (got < 0) break;
      handle_datagram({buf, static_cast<size_t>(got)}, deliver);
    }
  }
  retransmit_due();
}

}  // namespace bbc::net
