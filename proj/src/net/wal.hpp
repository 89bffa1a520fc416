// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include "engine.hpp"
#include "wire.hpp"

namespace bbc::net {

// Append-only input log.  Record layout: 4-byte big-endian payload length,
// 1-byte type, payload, 4-byte crc32 over type+payload.  A torn final
// record is truncated on read; a corrupt earlier record is a hard error.

enum : uint8_t {
  kWalStart = 0x10,      // instance_id u64, proposal u8
  kWalVoteIn = 0x11,     // vote message body (full proofs)
  kWalCertIn = 0x12,     // certificate body
  kWalTimer = 0x13,      // instance_id u64, timer index u32
  kWalOwnVote = 0x14,    // vote message body this process broadcast
  kWalEpoch = 0x15,      // boot counter u64, for frame seq resumption
  kWalLocalVote = 0x16,  // bare vote accepted from local evidence (lazy mode)
};

struct WalRecord {
  uint8_t type = 0;
  Bytes payload;
};

class Wal {
 public:
  explicit Wal(std::string path);
  ~Wal();
  Wal(const Wal&) = delete;
  Wal& operator=(const Wal&) = delete;

  void append(uint8_t type, const Bytes& payload);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  int fd_ = -1;
};

struct WalReadResult {
  std::vector<WalRecord> records;
  bool truncated_tail = false;
};

// Throws on a corrupt non-final record.
WalReadResult wal_read(const std::string& path);

struct ReplayedInstance {
  uint64_t instance_id = 0;
  std::optional<Value> proposal;
  std::unique_ptr<Engine> engine;
  std::vector<AuxProofMsg> own_votes_logged;
};

struct ReplayResult {
  std::map<uint64_t, ReplayedInstance> instances;
  uint64_t epoch = 0;
  bool truncated_tail = false;
};

// Re-feeds all logged inputs through fresh engines in logged order.
ReplayResult wal_replay(const std::string& path, const InstanceConfig& base_config,
                        const SignatureScheme& scheme, const KeyDirectory& directory,
                        const Bytes& private_key, ProcessId me);

}  // namespace bbc::net
