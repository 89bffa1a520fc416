// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include "types.hpp"

namespace bbc {

// All integers big-endian.  One UDP datagram carries exactly one frame.

enum : uint8_t {
  kFrameVote = 0x01,
  kFrameCert = 0x02,
  kFrameAck = 0x03,
  kFrameProofReq = 0x04,
  kFrameProofResp = 0x05,
};

struct Frame {
  uint8_t kind = 0;
  ProcessId sender = 0;
  uint64_t seq = 0;  // per-link sequence for ack/dedup; 0 on acks
  Bytes body;

  bool operator==(const Frame&) const = default;
};

struct ProofRequest {
  uint64_t instance_id = 0;
  Round round = 0;
  Value value = 0;
  ProcessId vote_sender = 0;

  bool operator==(const ProofRequest&) const = default;
};

struct ProofResponse {
  ProofRequest about;
  std::vector<SignedAux> proofs;

  bool operator==(const ProofResponse&) const = default;
};

void put_u16(Bytes& out, uint16_t v);
void put_u32(Bytes& out, uint32_t v);
void put_u64(Bytes& out, uint64_t v);

struct Reader {
  std::span<const uint8_t> data;
  size_t pos = 0;
  bool ok = true;

  bool take(size_t k, const uint8_t** out);
  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  bool done() const { return ok && pos == data.size(); }
};

void encode_signed_aux(Bytes& out, const SignedAux& sa);
bool decode_signed_aux(Reader& r, SignedAux& out);

Bytes encode_vote_body(const AuxProofMsg& msg);
std::optional<AuxProofMsg> decode_vote_body(std::span<const uint8_t> body);

Bytes encode_cert_body(const DecisionCert& cert);
std::optional<DecisionCert> decode_cert_body(std::span<const uint8_t> body);

Bytes encode_proof_req_body(const ProofRequest& req);
std::optional<ProofRequest> decode_proof_req_body(std::span<const uint8_t> body);

Bytes encode_proof_resp_body(const ProofResponse& resp);
std::optional<ProofResponse> decode_proof_resp_body(std::span<const uint8_t> body);

Bytes encode_frame(const Frame& f);
std::optional<Frame> decode_frame(std::span<const uint8_t> datagram);

}  // namespace bbc
