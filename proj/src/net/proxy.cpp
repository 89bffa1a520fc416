// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "net/proxy.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <vector>

#include "net/channel.hpp"
#include "types.hpp"

namespace bbc::net {

namespace {

int bind_udp(const PeerAddr& addr) {
  int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) return -1;
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    return -1;
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

sockaddr_in to_sockaddr(const PeerAddr& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  ::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr);
  return sa;
}

}  // namespace

int proxy_main(const ProxyOptions& opts) {
  std::vector<PeerAddr> listens;
  std::vector<PeerAddr> targets;
  try {
    listens = load_peer_file(opts.listen_path);
    targets = load_peer_file(opts.targets_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "proxy: %s\n", e.what());
    return 66;
  }
  if (listens.empty() || listens.size() != targets.size()) {
    std::fprintf(stderr, "proxy: listen/target size mismatch\n");
    return 64;
  }

  std::vector<int> fds;
  std::vector<sockaddr_in> dests;
  for (size_t i = 0; i < listens.size(); ++i) {
    int fd = bind_udp(listens[i]);
    if (fd < 0) {
      std::fprintf(stderr, "proxy: cannot bind %s:%u\n", listens[i].host.c_str(),
                   listens[i].port);
      for (int f : fds) ::close(f);
      return 69;
    }
    fds.push_back(fd);
    dests.push_back(to_sockaddr(targets[i]));
  }

  SplitMix64 rng(opts.seed);
  const pid_t initial_parent = ::getppid();
  std::vector<pollfd> pfds(fds.size());
  for (size_t i = 0; i < fds.size(); ++i) pfds[i] = {fds[i], POLLIN, 0};
  uint8_t buf[65536];

  for (;;) {
    int ready = ::poll(pfds.data(), pfds.size(), 250);
    if (::getppid() != initial_parent) break;  // orphaned: parent is gone
    if (ready <= 0) continue;
    for (size_t i = 0; i < pfds.size(); ++i) {
      if (!(pfds[i].revents & POLLIN)) continue;
      for (;;) {
        ssize_t got = ::recvfrom(fds[i], buf, sizeof(buf), MSG_DONTWAIT, nullptr, nullptr);
        if (got <= 0) break;
        if (rng.unit() < opts.drop) continue;
        ::sendto(fds[i], buf, static_cast<size_t>(got), 0,
                 reinterpret_cast<const sockaddr*>(&dests[i]), sizeof(dests[i]));
      }
    }
  }
  for (int f : fds) ::close(f);
  return 0;
}

}  // namespace bbc::net
