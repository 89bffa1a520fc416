// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "crypto.hpp"

#include <sodium.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bbc {

namespace {

void put_u32_vec(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u64_vec(Bytes& out, uint64_t v) {
  put_u32_vec(out, static_cast<uint32_t>(v >> 32));
  put_u32_vec(out, static_cast<uint32_t>(v));
}

uint32_t get_u32_at(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

uint64_t get_u64_at(const uint8_t* p) {
  return (static_cast<uint64_t>(get_u32_at(p)) << 32) | get_u32_at(p + 4);
}

// Key: 4-byte index || 8-byte secret.  Signature: 4-byte index || 8-byte
// fnv1a64(secret || message).  Keyed hash, not a real MAC; simulation only.
class MockScheme final : public SignatureScheme {
 public:
  std::string_view name() const override { return "mock"; }
  size_t signature_size() const override { return 12; }

  KeyPair generate(ProcessId index, uint64_t seed) const override {
    uint64_t secret = splitmix64_once(mix_seed({seed, 0x6d6f636bULL, index}));
    Bytes key;
    put_u32_vec(key, index);
    put_u64_vec(key, secret);
    return {index, key, key};
  }

  Bytes sign(const Bytes& private_key, std::span<const uint8_t> message) const override {
    if (private_key.size() != 12) throw std::invalid_argument("mock: bad private key size");
    Bytes buf(private_key.begin() + 4, private_key.end());
    buf.insert(buf.end(), message.begin(), message.end());
    Bytes sig(private_key.begin(), private_key.begin() + 4);
    put_u64_vec(sig, fnv1a64(buf));
    return sig;
  }

  bool verify(const Bytes& public_key, std::span<const uint8_t> message,
              std::span<const uint8_t> signature) const noexcept override {
    if (public_key.size() != 12 || signature.size() != 12) return false;
    if (std::memcmp(public_key.data(), signature.data(), 4) != 0) return false;
    Bytes buf(public_key.begin() + 4, public_key.end());
    buf.insert(buf.end(), message.begin(), message.end());
    return get_u64_at(signature.data() + 4) == fnv1a64(buf);
  }
};

class Ed25519Scheme final : public SignatureScheme {
 public:
  Ed25519Scheme() {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  }

  std::string_view name() const override { return "ed25519"; }
  size_t signature_size() const override { return crypto_sign_BYTES; }

  KeyPair generate(ProcessId index, uint64_t seed) const override {
    std::array<uint8_t, crypto_sign_SEEDBYTES> kseed{};
    SplitMix64 rng(mix_seed({seed, 0x65643235ULL, index}));
    for (size_t i = 0; i < kseed.size(); i += 8) {
      uint64_t w = rng.next();
      for (size_t j = 0; j < 8 && i + j < kseed.size(); ++j)
        kseed[i + j] = static_cast<uint8_t>(w >> (8 * j));
    }
    Bytes pk(crypto_sign_PUBLICKEYBYTES), sk(crypto_sign_SECRETKEYBYTES);
    if (crypto_sign_seed_keypair(pk.data(), sk.data(), kseed.data()) != 0)
      throw std::runtime_error("ed25519 keygen failed");
    return {index, pk, sk};
  }

  Bytes sign(const Bytes& private_key, std::span<const uint8_t> message) const override {
    if (private_key.size() != crypto_sign_SECRETKEYBYTES)
      throw std::invalid_argument("ed25519: bad private key size");
    Bytes sig(crypto_sign_BYTES);
    unsigned long long len = 0;
    if (crypto_sign_detached(sig.data(), &len, message.data(), message.size(),
                             private_key.data()) != 0)
      throw std::runtime_error("ed25519 sign failed");
    sig.resize(len);
    return sig;
  }

  bool verify(const Bytes& public_key, std::span<const uint8_t> message,
              std::span<const uint8_t> signature) const noexcept override {
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES) return false;
    if (signature.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       public_key.data()) == 0;
  }
};

}  // namespace

const SignatureScheme& mock_scheme() {
  static MockScheme s;
  return s;
}

const SignatureScheme& ed25519_scheme() {
  static Ed25519Scheme s;
  return s;
}

const SignatureScheme* scheme_by_name(std::string_view name) {
  if (name == "mock") return &mock_scheme();
  if (name == "ed25519") return &ed25519_scheme();
  return nullptr;
}

Keyring keygen(const SignatureScheme& scheme, uint32_t n, uint64_t seed) {
  Keyring ring;
  std::vector<Bytes> pubs;
  for (ProcessId i = 0; i < n; ++i) {
    KeyPair kp = scheme.generate(i, seed);
    pubs.push_back(kp.public_key);
    ring.pairs.push_back(std::move(kp));
  }
  ring.directory = KeyDirectory(std::string(scheme.name()), std::move(pubs));
  return ring;
}

namespace {
const char* kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8 | bytes[i + 2];
    out.push_back(kB64[v >> 18 & 63]);
    out.push_back(kB64[v >> 12 & 63]);
    out.push_back(kB64[v >> 6 & 63]);
    out.push_back(kB64[v & 63]);
  }
  if (i + 1 == bytes.size()) {
    uint32_t v = bytes[i] << 16;
    out.push_back(kB64[v >> 18 & 63]);
    out.push_back(kB64[v >> 12 & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8;
    out.push_back(kB64[v >> 18 & 63]);
    out.push_back(kB64[v >> 12 & 63]);
    out.push_back(kB64[v >> 6 & 63]);
    out.push_back('=');
  }
  return out;
}

std::optional<Bytes> base64_decode(const std::string& s) {
  if (s.size() % 4 != 0) return std::nullopt;
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  Bytes out;
  for (size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    uint32_t v = 0;
    for (size_t j = 0; j < 4; ++j) {
      char c = s[i + j];
      if (c == '=') {
        if (i + 4 != s.size() || j < 2) return std::nullopt;
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) return std::nullopt;
      int x = val(c);
      if (x < 0) return std::nullopt;
      v = v << 6 | static_cast<uint32_t>(x);
    }
    out.push_back(static_cast<uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<uint8_t>(v));
  }
  return out;
}

void write_key_files(const Keyring& ring, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream df(fs::path(dir) / "directory.txt", std::ios::trunc);
  if (!df) throw std::runtime_error("cannot write key directory in " + dir);
  df << "scheme " << ring.directory.scheme() << "\n";
  for (ProcessId i = 0; i < ring.directory.size(); ++i)
    df << i << " " << base64_encode(ring.directory.key(i)) << "\n";
  df.close();
  for (const auto& kp : ring.pairs) {
    std::ofstream kf(fs::path(dir) / ("sk_" + std::to_string(kp.index) + ".key"),
                     std::ios::trunc);
    if (!kf) throw std::runtime_error("cannot write private key in " + dir);
    kf << ring.directory.scheme() << " " << kp.index << " "
       << base64_encode(kp.private_key) << "\n";
  }
}

KeyDirectory load_key_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream df(fs::path(dir) / "directory.txt");
  if (!df) throw std::runtime_error("cannot read key directory in " + dir);
  std::string word, scheme;
  if (!(df >> word >> scheme) || word != "scheme")
    throw std::runtime_error("malformed key directory header in " + dir);
  std::vector<Bytes> keys;
  uint32_t index;
  std::string b64;
  while (df >> index >> b64) {
    if (index != keys.size()) throw std::runtime_error("key directory indices out of order");
    auto key = base64_decode(b64);
    if (!key) throw std::runtime_error("malformed key in directory");
    keys.push_back(std::move(*key));
  }
  return KeyDirectory(scheme, std::move(keys));
}

Bytes load_private_key(const std::string& dir, ProcessId index) {
  namespace fs = std::filesystem;
  std::ifstream kf(fs::path(dir) / ("sk_" + std::to_string(index) + ".key"));
  if (!kf) throw std::runtime_error("cannot read private key " + std::to_string(index));
  std::string scheme, b64;
  uint32_t idx;
  if (!(kf >> scheme >> idx >> b64) || idx != index)
    throw std::runtime_error("malformed private key file");
  auto key = base64_decode(b64);
  if (!key) throw std::runtime_error("malformed private key encoding");
  return *key;
}

}  // namespace bbc
