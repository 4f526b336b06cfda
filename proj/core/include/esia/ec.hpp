#pragma once

#include <gmpxx.h>

#include <string>

namespace esia {

// Short-Weierstrass curve y^2 = x^3 + a*x + b over GF(p), with a base point
// G of prime order q. q is the scalar modulus for the signature layer.
struct CurveParams {
  std::string name;
  mpz_class p;
  mpz_class a;
  mpz_class b;
  mpz_class gx;
  mpz_class gy;
  mpz_class q;
  size_t coord_bytes;  // fixed big-endian width of one coordinate on the wire
};

struct EcPoint {
  mpz_class x;
  mpz_class y;
  bool infinity = false;

  static EcPoint at_infinity() { return EcPoint{0, 0, true}; }
  bool operator==(const EcPoint& o) const {
    if (infinity || o.infinity) return infinity == o.infinity;
    return x == o.x && y == o.y;
  }
};

// NIST P-256 class parameters (256-bit field, prime group order).
const CurveParams& secp256r1();
// Tiny curve y^2 = x^3 + 2x + 3 over GF(97); full group has order 100 and
// the signature subgroup generated by (3, 6) has prime order 5. Small enough
// that tests can enumerate everything.
const CurveParams& toy_gf97();

bool on_curve(const CurveParams& c, const EcPoint& pt);
EcPoint ec_add(const CurveParams& c, const EcPoint& lhs, const EcPoint& rhs);
EcPoint ec_double(const CurveParams& c, const EcPoint& pt);
// Double-and-add in Jacobian coordinates; k may be any non-negative integer.
EcPoint ec_mul(const CurveParams& c, const mpz_class& k, const EcPoint& pt);
EcPoint base_point(const CurveParams& c);

mpz_class mod_inverse(const mpz_class& v, const mpz_class& m);

}  // namespace esia
