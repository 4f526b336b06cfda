#pragma once

#include <optional>
#include <span>

#include "esia/bytes.hpp"
#include "esia/ec.hpp"
#include "esia/rng.hpp"

namespace esia {

struct KeyPair {
  mpz_class sk;
  EcPoint pk;
};

// r_x is the x-coordinate of R = r*G kept as a raw field element; s is a
// scalar mod q. Wire form is fixed 64 bytes: 32-byte BE r_x || 32-byte BE s.
struct Signature {
  mpz_class r_x;
  mpz_class s;
  bool operator==(const Signature& o) const { return r_x == o.r_x && s == o.s; }
};

inline constexpr size_t kSignatureBytes = 64;

// IDCard: the trusted authority's signature over the holder's identity tuple.
using IDCard = Signature;

KeyPair generate_keypair(const CurveParams& c, DetRng& rng);

// message digest folded into the scalar field: SHA-256, big-endian, mod q.
mpz_class hash_to_scalar(const CurveParams& c, std::span<const uint8_t> message);

// s = (h + sk * r_x) / r  (mod q), R = r*G.  Degenerate draws (R at infinity,
// r_x ≡ 0 mod q, s = 0) are resampled; throws std::runtime_error if the rng
// cannot produce a usable nonce within a bounded number of attempts.
Signature sign(const CurveParams& c, std::span<const uint8_t> message, const mpz_class& sk,
               DetRng& rng);

// Structural sanity only: s in [1, q-1], r_x a field element not divisible
// by q. Says nothing about who signed what.
bool signature_well_formed(const CurveParams& c, const Signature& sig);

// R' = (h*G + r_x*pk) / s; accept iff x(R') equals the signature's r_x.
// Malformed values (s = 0, s >= q, r_x out of field, pk off curve) verify
// false instead of throwing.
bool verify(const CurveParams& c, std::span<const uint8_t> message, const Signature& sig,
            const EcPoint& pk);

Bytes encode_signature(const CurveParams& c, const Signature& sig);
std::optional<Signature> decode_signature(const CurveParams& c, std::span<const uint8_t> wire);

Bytes encode_point(const CurveParams& c, const EcPoint& pt);

// Registration payloads: FVs bind (RSUID || FogID), OVs (RSUID || FogID || OID).
IDCard issue_fv_idcard(const CurveParams& c, const mpz_class& ta_sk, const Identity32& rsu,
                       const Identity32& fog, DetRng& rng);
IDCard issue_ov_idcard(const CurveParams& c, const mpz_class& ta_sk, const Identity32& rsu,
                       const Identity32& fog, const Identity32& oid, DetRng& rng);
bool verify_fv_idcard(const CurveParams& c, const IDCard& card, const Identity32& rsu,
                      const Identity32& fog, const EcPoint& ta_pk);
bool verify_ov_idcard(const CurveParams& c, const IDCard& card, const Identity32& rsu,
                      const Identity32& fog, const Identity32& oid, const EcPoint& ta_pk);

}  // namespace esia
