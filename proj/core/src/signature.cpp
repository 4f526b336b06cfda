#include "esia/signature.hpp"

#include <stdexcept>

#include "esia/sha256.hpp"

namespace esia {

namespace {

mpz_class mod_q(const mpz_class& v, const CurveParams& c) {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), v.get_mpz_t(), c.q.get_mpz_t());
  return r;
}

mpz_class from_bytes_be(std::span<const uint8_t> bytes) {
  mpz_class v;
  mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return v;
}

void append_scalar_be(Bytes& out, const mpz_class& v, size_t width) {
  std::vector<uint8_t> buf(width, 0);
  size_t count = 0;
  mpz_export(buf.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  // mpz_export writes the minimal byte run; right-align it.
  if (count < width) {
    std::vector<uint8_t> shifted(width, 0);
    std::copy(buf.begin(), buf.begin() + count, shifted.begin() + (width - count));
    buf = std::move(shifted);
  } else if (count > width) {
    throw std::invalid_argument("scalar too wide for field encoding");
  }
  out.insert(out.end(), buf.begin(), buf.end());
}

// scalar uniform in [1, q-1]
mpz_class random_scalar(const CurveParams& c, DetRng& rng) {
  Bytes raw(32);
  for (size_t i = 0; i < 4; ++i) {
    uint64_t w = rng.next_u64();
    for (int s = 56, j = 0; s >= 0; s -= 8, ++j) raw[i * 8 + j] = static_cast<uint8_t>(w >> s);
  }
  mpz_class v = from_bytes_be(raw);
  mpz_class span = c.q - 1;
  mpz_class r;
  mpz_mod(r.get_mpz_t(), v.get_mpz_t(), span.get_mpz_t());
  return r + 1;
}

}  // namespace

KeyPair generate_keypair(const CurveParams& c, DetRng& rng) {
  KeyPair kp;
  kp.sk = random_scalar(c, rng);
  kp.pk = ec_mul(c, kp.sk, base_point(c));
  return kp;
}

mpz_class hash_to_scalar(const CurveParams& c, std::span<const uint8_t> message) {
  Digest32 d = sha256(message);
  return mod_q(from_bytes_be(d), c);
}

Signature sign(const CurveParams& c, std::span<const uint8_t> message, const mpz_class& sk,
               DetRng& rng) {
  const mpz_class h = hash_to_scalar(c, message);
  const EcPoint g = base_point(c);
  for (int attempt = 0; attempt < 64; ++attempt) {
    mpz_class r = random_scalar(c, rng);
    EcPoint R = ec_mul(c, r, g);
    if (R.infinity) continue;
    if (mod_q(R.x, c) == 0) continue;
    mpz_class s = mod_q((h + sk * mod_q(R.x, c)) * mod_inverse(r, c.q), c);
    if (s == 0) continue;
    return Signature{R.x, s};
  }
  throw std::runtime_error("sign: nonce resampling exhausted");
}

bool signature_well_formed(const CurveParams& c, const Signature& sig) {
  if (sig.s <= 0 || sig.s >= c.q) return false;
  if (sig.r_x < 0 || sig.r_x >= c.p) return false;
  mpz_class rq;
  mpz_mod(rq.get_mpz_t(), sig.r_x.get_mpz_t(), c.q.get_mpz_t());
  return rq != 0;
}

bool verify(const CurveParams& c, std::span<const uint8_t> message, const Signature& sig,
            const EcPoint& pk) {
  if (!signature_well_formed(c, sig)) return false;
  if (pk.infinity || !on_curve(c, pk)) return false;
  const mpz_class h = hash_to_scalar(c, message);
  const mpz_class s_inv = mod_inverse(sig.s, c.q);
  const mpz_class u = mod_q(h * s_inv, c);
  const mpz_class v = mod_q(mod_q(sig.r_x, c) * s_inv, c);
  const EcPoint R = ec_add(c, ec_mul(c, u, base_point(c)), ec_mul(c, v, pk));
  if (R.infinity) return false;
  return R.x == sig.r_x;
}

Bytes encode_signature(const CurveParams& c, const Signature& sig) {
  Bytes out;
  out.reserve(2 * c.coord_bytes);
  append_scalar_be(out, sig.r_x, c.coord_bytes);
  append_scalar_be(out, sig.s, c.coord_bytes);
  return out;
}

std::optional<Signature> decode_signature(const CurveParams& c, std::span<const uint8_t> wire) {
  if (wire.size() != 2 * c.coord_bytes) return std::nullopt;
  Signature sig;
  sig.r_x = from_bytes_be(wire.subspan(0, c.coord_bytes));
  sig.s = from_bytes_be(wire.subspan(c.coord_bytes, c.coord_bytes));
  return sig;
}

Bytes encode_point(const CurveParams& c, const EcPoint& pt) {
  Bytes out;
  if (pt.infinity) {
    out.assign(2 * c.coord_bytes, 0);
    return out;
  }
  append_scalar_be(out, pt.x, c.coord_bytes);
  append_scalar_be(out, pt.y, c.coord_bytes);
  return out;
}

static Bytes concat_ids(std::initializer_list<const Identity32*> parts) {
  Bytes payload;
  payload.reserve(parts.size() * 32);
  for (const Identity32* p : parts) payload.insert(payload.end(), p->begin(), p->end());
  return payload;
}

IDCard issue_fv_idcard(const CurveParams& c, const mpz_class& ta_sk, const Identity32& rsu,
                       const Identity32& fog, DetRng& rng) {
  return sign(c, concat_ids({&rsu, &fog}), ta_sk, rng);
}

IDCard issue_ov_idcard(const CurveParams& c, const mpz_class& ta_sk, const Identity32& rsu,
                       const Identity32& fog, const Identity32& oid, DetRng& rng) {
  return sign(c, concat_ids({&rsu, &fog, &oid}), ta_sk, rng);
}

bool verify_fv_idcard(const CurveParams& c, const IDCard& card, const Identity32& rsu,
                      const Identity32& fog, const EcPoint& ta_pk) {
  return verify(c, concat_ids({&rsu, &fog}), card, ta_pk);
}

bool verify_ov_idcard(const CurveParams& c, const IDCard& card, const Identity32& rsu,
                      const Identity32& fog, const Identity32& oid, const EcPoint& ta_pk) {
  return verify(c, concat_ids({&rsu, &fog, &oid}), card, ta_pk);
}

}  // namespace esia
