// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "types.hpp"

namespace bbc {

struct KeyPair {
  ProcessId index = 0;
  Bytes public_key;
  Bytes private_key;
};

// Verification keys for all n processes, indexed by process id.
class KeyDirectory {
 public:
  KeyDirectory() = default;
  KeyDirectory(std::string scheme, std::vector<Bytes> keys)
      : scheme_(std::move(scheme)), keys_(std::move(keys)) {}

  const std::string& scheme() const { return scheme_; }
  uint32_t size() const { return static_cast<uint32_t>(keys_.size()); }
  bool has(ProcessId p) const { return p < keys_.size(); }
  const Bytes& key(ProcessId p) const { return keys_.at(p); }

 private:
  std::string scheme_;
  std::vector<Bytes> keys_;
};

class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual std::string_view name() const = 0;
  virtual size_t signature_size() const = 0;
  virtual KeyPair generate(ProcessId index, uint64_t seed) const = 0;
  virtual Bytes sign(const Bytes& private_key, std::span<const uint8_t> message) const = 0;
  // Must be total: malformed keys or signatures verify false, never throw.
  virtual bool verify(const Bytes& public_key, std::span<const uint8_t> message,
                      std::span<const uint8_t> signature) const noexcept = 0;
};

// Fast deterministic scheme for simulation: no security, stable bytes
// across platforms and runs.
const SignatureScheme& mock_scheme();
// Ed25519 via libsodium, for processes that talk over real sockets.
const SignatureScheme& ed25519_scheme();
const SignatureScheme* scheme_by_name(std::string_view name);

struct Keyring {
  KeyDirectory directory;
  std::vector<KeyPair> pairs;
};

Keyring keygen(const SignatureScheme& scheme, uint32_t n, uint64_t seed);

// On-disk layout: <dir>/directory.txt lists "index base64(pubkey)" lines
// after a "scheme <name>" header; <dir>/sk_<index>.key holds one private key.
void write_key_files(const Keyring& ring, const std::string& dir);
KeyDirectory load_key_directory(const std::string& dir);
Bytes load_private_key(const std::string& dir, ProcessId index);

std::string base64_encode(std::span<const uint8_t> bytes);
std::optional<Bytes> base64_decode(const std::string& s);

}  // namespace bbc
