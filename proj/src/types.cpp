// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "types.hpp"

namespace bbc {

const char* stop_policy_name(StopPolicy p) {
  switch (p) {
    case StopPolicy::Delayed: return "delayed";
    case StopPolicy::Eager: return "eager";
    case StopPolicy::RunForever: return "run_forever";
  }
  return "?";
}

std::optional<StopPolicy> stop_policy_from_name(const std::string& s) {
  if (s == "delayed") return StopPolicy::Delayed;
  if (s == "eager") return StopPolicy::Eager;
  if (s == "run_forever") return StopPolicy::RunForever;
  return std::nullopt;
}

uint64_t timer_duration(const TimerPolicy& p, uint32_t timer_index) {
  if (timer_round(timer_index) <= p.free_rounds) return 0;
  return p.base + p.growth * (timer_index - 2 * p.free_rounds);
}

namespace {

void put_u32(uint8_t* out, uint32_t v) {
  out[0] = static_cast<uint8_t>(v >> 24);
  out[1] = static_cast<uint8_t>(v >> 16);
  out[2] = static_cast<uint8_t>(v >> 8);
  out[3] = static_cast<uint8_t>(v);
}

void put_u64(uint8_t* out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v >> 32));
  put_u32(out + 4, static_cast<uint32_t>(v));
}

uint32_t get_u32(const uint8_t* in) {
  return (static_cast<uint32_t>(in[0]) << 24) | (static_cast<uint32_t>(in[1]) << 16) |
         (static_cast<uint32_t>(in[2]) << 8) | static_cast<uint32_t>(in[3]);
}

uint64_t get_u64(const uint8_t* in) {
  return (static_cast<uint64_t>(get_u32(in)) << 32) | get_u32(in + 4);
}

}  // namespace

std::array<uint8_t, kPayloadEncodedSize> canonical_encode(const AuxPayload& p) {
  std::array<uint8_t, kPayloadEncodedSize> out{};
  out[0] = kPayloadTag;
  put_u64(out.data() + 1, p.instance_id);
  put_u32(out.data() + 9, p.round);
  out[13] = p.value;
  return out;
}

std::optional<AuxPayload> canonical_decode(std::span<const uint8_t> bytes) {
  if (bytes.size() != kPayloadEncodedSize || bytes[0] != kPayloadTag) return std::nullopt;
  if (!value_ok(bytes[13])) return std::nullopt;
  AuxPayload p;
  p.instance_id = get_u64(bytes.data() + 1);
  p.round = get_u32(bytes.data() + 9);
  p.value = bytes[13];
  return p;
}

size_t count_distinct_senders(std::span<const SignedAux> votes, Round r, Value v) {
  std::set<ProcessId> senders;
  for (const auto& sa : votes) {
    if (sa.payload.round == r && sa.payload.value == v) senders.insert(sa.sender);
  }
  return senders.size();
}

void ProofCounts::add(Round r, Value v, ProcessId sender) {
  senders_[{r, v}].insert(sender);
}

size_t ProofCounts::count(Round r, Value v) const {
  auto it = senders_.find({r, v});
  return it == senders_.end() ? 0 : it->second.size();
}

std::string hex(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::optional<Bytes> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    int hi = nibble(s[i]), lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

uint64_t SplitMix64::next() {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t SplitMix64::range(uint64_t lo, uint64_t hi) {
  uint64_t span = hi - lo + 1;
  if (span == 0) return next();  // full 64-bit range
  return lo + next() % span;
}

double SplitMix64::unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

uint64_t splitmix64_once(uint64_t x) {
  SplitMix64 rng(x);
  return rng.next();
}

uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t acc = 0x243f6a8885a308d3ULL;
  for (uint64_t p : parts) acc = splitmix64_once(acc ^ splitmix64_once(p));
  return acc;
}

uint64_t fnv1a64(std::span<const uint8_t> bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint32_t crc32(std::span<const uint8_t> bytes) {
  static uint32_t table[256];
  static bool init = [] {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    return true;
  }();
  (void)init;
  uint32_t c = 0xffffffffu;
  for (uint8_t b : bytes) c = table[(c ^ b) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

}  // namespace bbc
