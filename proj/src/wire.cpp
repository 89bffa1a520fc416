// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "wire.hpp"

namespace bbc {

void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u32(Bytes& out, uint32_t v) {
  put_u16(out, static_cast<uint16_t>(v >> 16));
  put_u16(out, static_cast<uint16_t>(v));
}

void put_u64(Bytes& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v >> 32));
  put_u32(out, static_cast<uint32_t>(v));
}

bool Reader::take(size_t k, const uint8_t** out) {
  if (!ok || data.size() - pos < k) {
    ok = false;
    return false;
  }
  *out = data.data() + pos;
  pos += k;
  return true;
}

uint8_t Reader::u8() {
  const uint8_t* p;
  return take(1, &p) ? p[0] : 0;
}

uint16_t Reader::u16() {
  const uint8_t* p;
  if (!take(2, &p)) return 0;
  return static_cast<uint16_t>(p[0] << 8 | p[1]);
}

uint32_t Reader::u32() {
  const uint8_t* p;
  if (!take(4, &p)) return 0;
  return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
         static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

uint64_t Reader::u64() {
  uint64_t hi = u32();
  return hi << 32 | u32();
}

void encode_signed_aux(Bytes& out, const SignedAux& sa) {
  auto payload = canonical_encode(sa.payload);
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, sa.sender);
  put_u16(out, static_cast<uint16_t>(sa.signature.size()));
  out.insert(out.end(), sa.signature.begin(), sa.signature.end());
}

bool decode_signed_aux(Reader& r, SignedAux& out) {
  const uint8_t* p;
  if (!r.take(kPayloadEncodedSize, &p)) return false;
  auto payload = canonical_decode({p, kPayloadEncodedSize});
  if (!payload) {
    r.ok = false;
    return false;
  }
  out.payload = *payload;
  out.sender = r.u32();
  uint16_t siglen = r.u16();
  const uint8_t* sig;
  if (!r.take(siglen, &sig)) return false;
  out.signature.assign(sig, sig + siglen);
  return r.ok;
}

Bytes encode_vote_body(const AuxProofMsg& msg) {
  Bytes out;
  encode_signed_aux(out, msg.vote);
  put_u16(out, static_cast<uint16_t>(msg.proofs.size()));
  for (const auto& sa : msg.proofs) encode_signed_aux(out, sa);
  return out;
}

std::optional<AuxProofMsg> decode_vote_body(std::span<const uint8_t> body) {
  Reader r{body};
  AuxProofMsg msg;
  if (!decode_signed_aux(r, msg.vote)) return std::nullopt;
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) {
    SignedAux sa;
    if (!decode_signed_aux(r, sa)) return std::nullopt;
    msg.proofs.push_back(std::move(sa));
  }
  if (!r.done()) return std::nullopt;
  return msg;
}

Bytes encode_cert_body(const DecisionCert& cert) {
  Bytes out;
  put_u64(out, cert.instance_id);
  put_u32(out, cert.round);
  out.push_back(cert.value);
  put_u16(out, static_cast<uint16_t>(cert.quorum.size()));
  for (const auto& sa : cert.quorum) encode_signed_aux(out, sa);
  return out;
}

std::optional<DecisionCert> decode_cert_body(std::span<const uint8_t> body) {
  Reader r{body};
  DecisionCert cert;
  cert.instance_id = r.u64();
  cert.round = r.u32();
  cert.value = r.u8();
  if (!r.ok || !value_ok(cert.value)) return std::nullopt;
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) {
    SignedAux sa;
    if (!decode_signed_aux(r, sa)) return std::nullopt;
    cert.quorum.push_back(std::move(sa));
  }
  if (!r.done()) return std::nullopt;
  return cert;
}

Bytes encode_proof_req_body(const ProofRequest& req) {
  Bytes out;
  put_u64(out, req.instance_id);
  put_u32(out, req.round);
  out.push_back(req.value);
  put_u32(out, req.vote_sender);
  return out;
}

std::optional<ProofRequest> decode_proof_req_body(std::span<const uint8_t> body) {
  Reader r{body};
  ProofRequest req;
  req.instance_id = r.u64();
  req.round = r.u32();
  req.value = r.u8();
  req.vote_sender = r.u32();
  if (!r.done() || !value_ok(req.value)) return std::nullopt;
  return req;
}

Bytes encode_proof_resp_body(const ProofResponse& resp) {
  Bytes out = encode_proof_req_body(resp.about);
  put_u16(out, static_cast<uint16_t>(resp.proofs.size()));
  for (const auto& sa : resp.proofs) encode_signed_aux(out, sa);
  return out;
}

std::optional<ProofResponse> decode_proof_resp_body(std::span<const uint8_t> body) {
  Reader r{body};
  ProofResponse resp;
  resp.about.instance_id = r.u64();
  resp.about.round = r.u32();
  resp.about.value = r.u8();
  resp.about.vote_sender = r.u32();
  if (!r.ok || !value_ok(resp.about.value)) return std::nullopt;
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) {
    SignedAux sa;
    if (!decode_signed_aux(r, sa)) return std::nullopt;
    resp.proofs.push_back(std::move(sa));
  }
  if (!r.done()) return std::nullopt;
  return resp;
}

Bytes encode_frame(const Frame& f) {
  Bytes out;
  const uint32_t len = static_cast<uint32_t>(1 + 4 + 8 + f.body.size());
  put_u32(out, len);
  out.push_back(f.kind);
  put_u32(out, f.sender);
  put_u64(out, f.seq);
  out.insert(out.end(), f.body.begin(), f.body.end());
  return out;
}

std::optional<Frame> decode_frame(std::span<const uint8_t> datagram) {
  Reader r{datagram};
  const uint32_t len = r.u32();
  if (!r.ok || datagram.size() - r.pos != len || len < 1 + 4 + 8) return std::nullopt;
  Frame f;
  f.kind = r.u8();
  f.sender = r.u32();
  f.seq = r.u64();
  if (!r.ok) return std::nullopt;
  if (f.kind < kFrameVote || f.kind > kFrameProofResp) return std::nullopt;
  f.body.assign(datagram.begin() + r.pos, datagram.end());
  return f;
}

}  // namespace bbc
