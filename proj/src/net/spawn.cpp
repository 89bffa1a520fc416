// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "net/spawn.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>

#include "crypto.hpp"
#include "net/channel.hpp"

namespace bbc::net {

namespace {

namespace fs = std::filesystem;

std::vector<uint16_t> allocate_ports(size_t count) {
  // All sockets stay open until every port is known, so the kernel cannot
  // hand the same port out twice.
  std::vector<int> fds;
  std::vector<uint16_t> ports;
  for (size_t i = 0; i < count; ++i) {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw std::runtime_error("socket: " + std::string(strerror(errno)));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    sa.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      ::close(fd);
      for (int f : fds) ::close(f);
      throw std::runtime_error("bind: " + std::string(strerror(errno)));
    }
    socklen_t len = sizeof(sa);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
    fds.push_back(fd);
    ports.push_back(ntohs(sa.sin_port));
  }
  for (int f : fds) ::close(f);
  return ports;
}

struct Child {
  uint32_t node = 0;   // n means the proxy
  pid_t pid = -1;
  int fd = -1;         // stdout pipe read end, -1 once closed
  std::string buf;
  bool exited = false;
  int exit_code = -1;
  bool kill_expected = false;
};

pid_t spawn_child(const std::vector<std::string>& argv, int* out_fd) {
  int pipefd[2];
  if (::pipe(pipefd) != 0) throw std::runtime_error("pipe failed");
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    throw std::runtime_error("fork failed");
  }
  if (pid == 0) {
    ::dup2(pipefd[1], STDOUT_FILENO);
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    ::execv(cargv[0], cargv.data());
    ::_exit(127);
  }
  ::close(pipefd[1]);
  ::fcntl(pipefd[0], F_SETFL, O_NONBLOCK);
  *out_fd = pipefd[0];
  return pid;
}

std::optional<SpawnResult> parse_result_line(uint32_t node, const std::string& line) {
  SpawnResult r;
  r.node = node;
  unsigned decided = 0;
  unsigned recovered = 0;
  int got = std::sscanf(line.c_str(),
                        "result instance=%" SCNu64 " decided=%u round=%" SCNu32
                        " latency_ms=%lf msgs_sent=%" SCNu64 " msgs_recv=%" SCNu64
                        " recovered=%u",
                        &r.instance, &decided, &r.round, &r.latency_ms, &r.msgs_sent,
                        &r.msgs_recv, &recovered);
  if (got != 7) return std::nullopt;
  r.decided = static_cast<Value>(decided);
  r.recovered = recovered != 0;
  return r;
}

}  // namespace

SpawnReport spawn_local(const SpawnOptions& opts) {
  SpawnReport report;
  if (opts.n < 1) throw std::runtime_error("need at least one process");
  if (opts.exe.empty()) throw std::runtime_error("missing node executable path");
  if (!opts.proposals.empty() && opts.proposals.size() != opts.n)
    throw std::runtime_error("proposal list size mismatch");
  const SignatureScheme* scheme = scheme_by_name(opts.scheme);
  if (!scheme) throw std::runtime_error("unknown scheme " + opts.scheme);

  // Workspace.
  std::string work = opts.work_dir;
  if (work.empty()) {
    char tmpl[] = "/tmp/bbc-net-XXXXXX";
    if (!::mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
    work = tmpl;
  } else {
    fs::create_directories(work);
  }
  report.work_dir = work;

  // Keys.  A node under wrong_keys_id signs with a private key whose public
  // half the shared directory does not carry.
  Keyring ring = keygen(*scheme, opts.n, opts.seed);
  write_key_files(ring, work + "/keys");
  if (opts.wrong_keys_id >= 0) {
    Keyring bad = keygen(*scheme, opts.n, mix_seed({opts.seed, 0xbadbadULL}));
    write_key_files(bad, work + "/keys_bad");
    fs::copy_file(work + "/keys/directory.txt", work + "/keys_bad/directory.txt",
                  fs::copy_options::overwrite_existing);
  }

  // Addresses.  With a lossy proxy every link points at the proxy's socket
  // for the destination; the proxy forwards to the real port or drops.
  const bool lossy = opts.lossy_drop > 0.0;
  std::vector<uint16_t> ports = allocate_ports(lossy ? 2 * opts.n : opts.n);
  std::vector<PeerAddr> real(opts.n);
  std::vector<PeerAddr> front(opts.n);
  for (uint32_t i = 0; i < opts.n; ++i) {
    real[i] = {"127.0.0.1", ports[i]};
    front[i] = lossy ? PeerAddr{"127.0.0.1", ports[opts.n + i]} : real[i];
  }
  for (uint32_t i = 0; i < opts.n; ++i) {
    std::vector<PeerAddr> view = front;
    view[i] = real[i];  // each process binds its own real address
    write_peer_file(work + "/peers_" + std::to_string(i) + ".txt", view);
  }
  if (lossy) {
    write_peer_file(work + "/proxy_listen.txt", front);
    write_peer_file(work + "/proxy_targets.txt", real);
  }

  std::vector<Child> children;
  auto start_node = [&](uint32_t i) {
    std::vector<std::string> argv = {
        opts.exe, "node",
        "--id", std::to_string(i),
        "--peers", work + "/peers_" + std::to_string(i) + ".txt",
        "--keys",
        (static_cast<int>(i) == opts.wrong_keys_id) ? work + "/keys_bad" : work + "/keys",
        "--instances", std::to_string(opts.instances),
        "--proposal", opts.proposals.empty() ? "random:0.5" : opts.proposals[i],
        "--timer-base", std::to_string(opts.timers.base),
        "--timer-growth", std::to_string(opts.timers.growth),
        "--coord-free-rounds", std::to_string(opts.coord_free_rounds),
        "--wal", work + "/wal_" + std::to_string(i) + ".log",
        "--seed", std::to_string(opts.seed),
        "--retransmit-ms", std::to_string(opts.retransmit_ms),
        "--linger-ms", std::to_string(opts.linger_ms),
        "--deadline-ms", std::to_string(opts.deadline_ms),
    };
    if (opts.lazy_proofs) argv.push_back("--lazy-proofs");
    Child c;
    c.node = i;
    c.pid = spawn_child(argv, &c.fd);
    children.push_back(c);
  };

  if (lossy) {
    std::vector<std::string> argv = {
        opts.exe, "proxy",
        "--listen", work + "/proxy_listen.txt",
        "--targets", work + "/proxy_targets.txt",
        "--drop", std::to_string(opts.lossy_drop),
        "--seed", std::to_string(mix_seed({opts.seed, 0x70727879ULL})),
    };
    Child c;
    c.node = opts.n;
    c.kill_expected = true;
    c.pid = spawn_child(argv, &c.fd);
    children.push_back(c);
  }
  for (uint32_t i = 0; i < opts.n; ++i) start_node(i);

  // Collection loop: drain child stdout, reap exits, run the crash schedule.
  std::map<std::pair<uint32_t, uint64_t>, SpawnResult> results;
  std::vector<std::ofstream> logs;
  logs.reserve(opts.n + 1);
  for (uint32_t i = 0; i <= opts.n; ++i)
    logs.emplace_back(work + "/out_" + (i == opts.n ? "proxy" : std::to_string(i)) + ".txt");

  const auto boot = Clock::now();
  bool killed_done = opts.kill_id < 0;
  bool restart_done = opts.kill_id < 0 || opts.restart_after_ms == 0;
  const TimePoint deadline = boot + Millis(opts.deadline_ms);

  auto consume = [&](Child& c) {
    char buf[4096];
    for (;;) {
      ssize_t got = ::read(c.fd, buf, sizeof(buf));
      if (got <= 0) {
        if (got == 0) {
          ::close(c.fd);
          c.fd = -1;
        }
        return;
      }
      c.buf.append(buf, static_cast<size_t>(got));
      size_t nl;
      while ((nl = c.buf.find('\n')) != std::string::npos) {
        std::string line = c.buf.substr(0, nl);
        c.buf.erase(0, nl + 1);
        logs[c.node] << line << "\n";
        if (auto r = parse_result_line(c.node, line)) results[{c.node, r->instance}] = *r;
      }
    }
  };

  for (;;) {
    const TimePoint now = Clock::now();
    if (now > deadline) {
      report.failure = "deadline exceeded";
      break;
    }
    if (!killed_done && now >= boot + Millis(opts.kill_after_ms)) {
      for (auto& c : children)
        if (c.node == static_cast<uint32_t>(opts.kill_id) && !c.exited) {
          ::kill(c.pid, SIGKILL);
          c.kill_expected = true;
        }
      killed_done = true;
    }
    if (!restart_done && killed_done && now >= boot + Millis(opts.restart_after_ms)) {
      start_node(static_cast<uint32_t>(opts.kill_id));
      restart_done = true;
    }

    std::vector<pollfd> pfds;
    std::vector<size_t> owner;
    for (size_t i = 0; i < children.size(); ++i)
      if (children[i].fd >= 0) {
        pfds.push_back({children[i].fd, POLLIN, 0});
        owner.push_back(i);
      }
    if (!pfds.empty()) {
      int ready = ::poll(pfds.data(), pfds.size(), 50);
      if (ready > 0)
        for (size_t k = 0; k < pfds.size(); ++k)
          if (pfds[k].revents & (POLLIN | POLLHUP)) consume(children[owner[k]]);
    }

    bool nodes_running = false;
    for (auto& c : children) {
      if (c.exited || c.pid < 0) continue;
      int status = 0;
      pid_t got = ::waitpid(c.pid, &status, WNOHANG);
      if (got == c.pid) {
        c.exited = true;
        c.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
        if (c.fd >= 0) consume(c);
      } else if (c.node < opts.n) {
        nodes_running = true;
      }
    }
    if (!restart_done || !killed_done) nodes_running = true;
    if (!nodes_running) break;
  }

  // Teardown: nothing survives this function.
  for (auto& c : children) {
    if (!c.exited && c.pid > 0) {
      ::kill(c.pid, SIGKILL);
      int status = 0;
      ::waitpid(c.pid, &status, 0);
      c.exited = true;
      c.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
      if (!c.kill_expected && report.failure.empty())
        report.failure = "node " + std::to_string(c.node) + " had to be killed";
    }
    if (c.fd >= 0) {
      consume(c);
      if (c.fd >= 0) {
        ::close(c.fd);
        c.fd = -1;
      }
    }
  }

  report.exit_codes.assign(opts.n, -1);
  for (const auto& c : children)
    if (c.node < opts.n) report.exit_codes[c.node] = c.exit_code;  // last entry wins

  for (const auto& [key, r] : results) report.results.push_back(r);

  // Verdict.  Values must agree per instance across every reporting node;
  // every node whose final incarnation was expected to survive must have
  // exited cleanly and reported every instance.
  report.consistent = true;
  for (uint64_t inst = 0; inst < opts.instances; ++inst) {
    std::optional<Value> value;
    for (const auto& r : report.results) {
      if (r.instance != inst) continue;
      if (!value) value = r.decided;
      if (r.decided != *value) {
        report.consistent = false;
        if (report.failure.empty())
          report.failure = "instance " + std::to_string(inst) + " decided both ways";
      }
    }
  }
  report.complete = true;
  const bool killed_for_good = opts.kill_id >= 0 && opts.restart_after_ms == 0;
  for (uint32_t i = 0; i < opts.n; ++i) {
    if (killed_for_good && static_cast<int>(i) == opts.kill_id) continue;
    if (static_cast<int>(i) == opts.wrong_keys_id) continue;
    bool ok = report.exit_codes[i] == 0;
    for (uint64_t inst = 0; inst < opts.instances; ++inst)
      ok = ok && results.count({i, inst}) > 0;
    if (!ok) {
      report.complete = false;
      if (report.failure.empty())
        report.failure = "node " + std::to_string(i) + " incomplete (exit " +
                         std::to_string(report.exit_codes[i]) + ")";
    }
  }
  if (!report.consistent) report.complete = false;

  if (!opts.keep_work_dir && report.consistent && report.complete) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return report;
}

}  // namespace bbc::net
