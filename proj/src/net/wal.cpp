// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "net/wal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>

namespace bbc::net {

Wal::Wal(std::string path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open wal " + path_);
}

Wal::~Wal() {
  if (fd_ >= 0) ::close(fd_);
}

void Wal::append(uint8_t type, const Bytes& payload) {
  Bytes record;
  put_u32(record, static_cast<uint32_t>(payload.size()));
  record.push_back(type);
  record.insert(record.end(), payload.begin(), payload.end());
  Bytes crc_input;
  crc_input.push_back(type);
  crc_input.insert(crc_input.end(), payload.begin(), payload.end());
  put_u32(record, crc32(crc_input));
  ssize_t written = ::write(fd_, record.data(), record.size());
  if (written != static_cast<ssize_t>(record.size()))
    throw std::runtime_error("wal append failed on " + path_);
  ::fdatasync(fd_);
}

WalReadResult wal_read(const std::string& path) {
  WalReadResult result;
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) return result;  // absent log = empty log
  Bytes data;
  uint8_t buf[65536];
  for (;;) {
    ssize_t got = ::read(fd, buf, sizeof buf);
    if (got <= 0) break;
    data.insert(data.end(), buf, buf + got);
  }
  ::close(fd);

  size_t pos = 0;
  while (pos < data.size()) {
    // A record shorter than its header or trailer can only be a torn tail.
    if (data.size() - pos < 9) {
      result.truncated_tail = true;
      break;
    }
    Reader r{{data.data() + pos, data.size() - pos}};
    const uint32_t len = r.u32();
    if (data.size() - pos < 4u + 1 + len + 4) {
      result.truncated_tail = true;
      break;
    }
    const uint8_t type = data[pos + 4];
    const uint8_t* payload = data.data() + pos + 5;
    Bytes crc_input;
    crc_input.push_back(type);
    crc_input.insert(crc_input.end(), payload, payload + len);
    Reader cr{{payload + len, 4}};
    const uint32_t stored = cr.u32();
    if (crc32(crc_input) != stored) {
      const size_t end = pos + 4 + 1 + len + 4;
      if (end >= data.size()) {
        result.truncated_tail = true;
        break;
      }
      throw std::runtime_error("wal: corrupt record at offset " + std::to_string(pos) +
                               " in " + path);
    }
    result.records.push_back({type, Bytes(payload, payload + len)});
    pos += 4 + 1 + len + 4;
  }
  return result;
}

ReplayResult wal_replay(const std::string& path, const InstanceConfig& base_config,
                        const SignatureScheme& scheme, const KeyDirectory& directory,
                        const Bytes& private_key, ProcessId me) {
  WalReadResult raw = wal_read(path);
  ReplayResult result;
  result.truncated_tail = raw.truncated_tail;

  auto instance_of = [&](uint64_t id) -> ReplayedInstance& {
    auto it = result.instances.find(id);
    if (it == result.instances.end()) {
      ReplayedInstance inst;
      inst.instance_id = id;
      InstanceConfig cfg = base_config;
      cfg.instance_id = id;
      inst.engine = std::make_unique<Engine>(cfg, me, scheme, directory, private_key);
      it = result.instances.emplace(id, std::move(inst)).first;
    }
    return it->second;
  };

  for (const auto& rec : raw.records) {
    Reader r{{rec.payload.data(), rec.payload.size()}};
    switch (rec.type) {
      case kWalEpoch: {
        result.epoch = std::max(result.epoch, r.u64());
        break;
      }
      case kWalStart: {
        const uint64_t id = r.u64();
        const Value v = r.u8();
        if (!r.done() || !value_ok(v)) throw std::runtime_error("wal: bad start record");
        auto& inst = instance_of(id);
        inst.proposal = v;
        inst.engine->handle_start(v);
        break;
      }
      case kWalVoteIn: {
        auto msg = decode_vote_body(rec.payload);
        if (!msg) throw std::runtime_error("wal: bad vote record");
        instance_of(msg->vote.payload.instance_id).engine->handle_receive(*msg);
        break;
      }
      case kWalLocalVote: {
        auto msg = decode_vote_body(rec.payload);
        if (!msg) throw std::runtime_error("wal: bad local vote record");
        instance_of(msg->vote.payload.instance_id).engine->try_accept_local(msg->vote);
        break;
      }
      case kWalCertIn: {
        auto cert = decode_cert_body(rec.payload);
        if (!cert) throw std::runtime_error("wal: bad cert record");
        instance_of(cert->instance_id).engine->handle_cert(*cert);
        break;
      }
      case kWalTimer: {
        const uint64_t id = r.u64();
        const uint32_t index = r.u32();
        if (!r.done()) throw std::runtime_error("wal: bad timer record");
        instance_of(id).engine->handle_timer(index);
        break;
      }
      case kWalOwnVote: {
        auto msg = decode_vote_body(rec.payload);
        if (!msg) throw std::runtime_error("wal: bad own vote record");
        instance_of(msg->vote.payload.instance_id).own_votes_logged.push_back(*msg);
        break;
      }
      default:
        throw std::runtime_error("wal: unknown record type " + std::to_string(rec.type));
    }
  }
  return result;
}

}  // namespace bbc::net
