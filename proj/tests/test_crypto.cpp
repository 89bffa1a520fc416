// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include <filesystem>

#include "crypto.hpp"
#include "doctest.h"

using namespace bbc;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("bbc_crypto_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("sign and verify round-trip for both schemes") {
  for (const auto* scheme : {&mock_scheme(), &ed25519_scheme()}) {
    Keyring ring = keygen(*scheme, 4, 7);
    auto msg = canonical_encode({3, 1, 1});
    for (ProcessId p = 0; p < 4; ++p) {
      Bytes sig = scheme->sign(ring.pairs[p].private_key, msg);
      CHECK(sig.size() == scheme->signature_size());
      CHECK(scheme->verify(ring.directory.key(p), msg, sig));
    }
  }
}

TEST_CASE("verification fails under the wrong public key") {
  for (const auto* scheme : {&mock_scheme(), &ed25519_scheme()}) {
    Keyring ring = keygen(*scheme, 4, 7);
    auto msg = canonical_encode({3, 1, 1});
    Bytes sig = scheme->sign(ring.pairs[0].private_key, msg);
    CHECK(!scheme->verify(ring.directory.key(1), msg, sig));
  }
}

TEST_CASE("verification fails when any signed field changes") {
  const AuxPayload original{5, 2, 1};
  for (const auto* scheme : {&mock_scheme(), &ed25519_scheme()}) {
    Keyring ring = keygen(*scheme, 4, 7);
    Bytes sig = scheme->sign(ring.pairs[2].private_key, canonical_encode(original));
    const AuxPayload mutations[] = {
        {6, 2, 1},  // instance
        {5, 3, 1},  // round
        {5, 2, 0},  // value
    };
    for (const auto& m : mutations)
      CHECK(!scheme->verify(ring.directory.key(2), canonical_encode(m), sig));
    // Bit-flip in the signature itself.
    Bytes bad = sig;
    bad[0] ^= 1;
    CHECK(!scheme->verify(ring.directory.key(2), canonical_encode(original), bad));
  }
}

TEST_CASE("verify is total on garbage keys and signatures") {
  for (const auto* scheme : {&mock_scheme(), &ed25519_scheme()}) {
    auto msg = canonical_encode({0, 0, 0});
    const Bytes junk_key = {1, 2, 3};
    const Bytes junk_sig = {4, 5, 6};
    CHECK(!scheme->verify({}, msg, {}));
    CHECK(!scheme->verify(junk_key, msg, junk_sig));
  }
}

TEST_CASE("keygen is deterministic per seed and distinct per index") {
  for (const auto* scheme : {&mock_scheme(), &ed25519_scheme()}) {
    Keyring a = keygen(*scheme, 4, 42);
    Keyring b = keygen(*scheme, 4, 42);
    Keyring c = keygen(*scheme, 4, 43);
    for (ProcessId p = 0; p < 4; ++p) {
      CHECK(a.pairs[p].public_key == b.pairs[p].public_key);
      CHECK(a.pairs[p].private_key == b.pairs[p].private_key);
      CHECK(a.pairs[p].public_key != c.pairs[p].public_key);
    }
    CHECK(a.pairs[0].public_key != a.pairs[1].public_key);
  }
}

TEST_CASE("mock signatures are byte-identical across processes of equal seed") {
  Keyring a = keygen(mock_scheme(), 3, 9);
  Keyring b = keygen(mock_scheme(), 3, 9);
  auto msg = canonical_encode({1, 4, 0});
  CHECK(mock_scheme().sign(a.pairs[1].private_key, msg) ==
        mock_scheme().sign(b.pairs[1].private_key, msg));
}

TEST_CASE("key files round-trip through the on-disk layout") {
  TempDir dir;
  Keyring ring = keygen(ed25519_scheme(), 4, 11);
  write_key_files(ring, dir.path.string());
  KeyDirectory loaded = load_key_directory(dir.path.string());
  REQUIRE(loaded.size() == 4);
  CHECK(loaded.scheme() == "ed25519");
  for (ProcessId p = 0; p < 4; ++p) {
    CHECK(loaded.key(p) == ring.directory.key(p));
    CHECK(load_private_key(dir.path.string(), p) == ring.pairs[p].private_key);
  }
}

TEST_CASE("loading a missing key directory fails loudly") {
  CHECK_THROWS(load_key_directory("/nonexistent/bbc/keys"));
  TempDir dir;
  Keyring ring = keygen(mock_scheme(), 2, 1);
  write_key_files(ring, dir.path.string());
  CHECK_THROWS(load_private_key(dir.path.string(), 9));
}

TEST_CASE("base64 round-trips arbitrary bytes") {
  SplitMix64 rng(5);
  for (size_t len : {size_t{0}, size_t{1}, size_t{2}, size_t{3}, size_t{31}, size_t{32},
                     size_t{33}, size_t{100}}) {
    Bytes b(len);
    for (auto& x : b) x = static_cast<uint8_t>(rng.next());
    auto enc = base64_encode(b);
    auto dec = base64_decode(enc);
    REQUIRE(dec.has_value());
    CHECK(*dec == b);
  }
  const Bytes foo = {'f', 'o', 'o'};
  CHECK(base64_encode(foo) == "Zm9v");
  CHECK(base64_decode("!!!!") == std::nullopt);
}

TEST_CASE("scheme lookup by name") {
  CHECK(scheme_by_name("mock") == &mock_scheme());
  CHECK(scheme_by_name("ed25519") == &ed25519_scheme());
  CHECK(scheme_by_name("rsa") == nullptr);
}
