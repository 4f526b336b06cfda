#include "esia/ec.hpp"

#include <stdexcept>

namespace esia {

namespace {

mpz_class modp(const mpz_class& v, const mpz_class& p) {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), v.get_mpz_t(), p.get_mpz_t());
  return r;
}

// Jacobian coordinates: x = X/Z^2, y = Y/Z^3, infinity encoded as Z = 0.
struct Jac {
  mpz_class X, Y, Z;
  bool inf() const { return Z == 0; }
};

Jac to_jac(const EcPoint& pt) {
  if (pt.infinity) return Jac{1, 1, 0};
  return Jac{pt.x, pt.y, 1};
}

Jac jac_double(const CurveParams& c, const Jac& p) {
  if (p.inf() || p.Y == 0) return Jac{1, 1, 0};
  const mpz_class& P = c.p;
  mpz_class y2 = modp(p.Y * p.Y, P);
  mpz_class s = modp(4 * p.X * y2, P);
  mpz_class z2 = modp(p.Z * p.Z, P);
  mpz_class m = modp(3 * p.X * p.X + c.a * z2 * z2, P);
  mpz_class x3 = modp(m * m - 2 * s, P);
  mpz_class y3 = modp(m * (s - x3) - 8 * y2 * y2, P);
  mpz_class z3 = modp(2 * p.Y * p.Z, P);
  return Jac{x3, y3, z3};
}

Jac jac_add(const CurveParams& c, const Jac& p, const Jac& q) {
  if (p.inf()) return q;
  if (q.inf()) return p;
  const mpz_class& P = c.p;
  mpz_class z1z1 = modp(p.Z * p.Z, P);
  mpz_class z2z2 = modp(q.Z * q.Z, P);
  mpz_class u1 = modp(p.X * z2z2, P);
  mpz_class u2 = modp(q.X * z1z1, P);
  mpz_class s1 = modp(p.Y * z2z2 * q.Z, P);
  mpz_class s2 = modp(q.Y * z1z1 * p.Z, P);
  if (u1 == u2) {
    if (s1 != s2) return Jac{1, 1, 0};
    return jac_double(c, p);
  }
  mpz_class h = modp(u2 - u1, P);
  mpz_class r = modp(s2 - s1, P);
  mpz_class h2 = modp(h * h, P);
  mpz_class h3 = modp(h2 * h, P);
  mpz_class u1h2 = modp(u1 * h2, P);
  mpz_class x3 = modp(r * r - h3 - 2 * u1h2, P);
  mpz_class y3 = modp(r * (u1h2 - x3) - s1 * h3, P);
  mpz_class z3 = modp(h * p.Z * q.Z, P);
  return Jac{x3, y3, z3};
}

EcPoint from_jac(const CurveParams& c, const Jac& p) {
  if (p.inf()) return EcPoint::at_infinity();
  mpz_class zi = mod_inverse(p.Z, c.p);
  mpz_class zi2 = modp(zi * zi, c.p);
  return EcPoint{modp(p.X * zi2, c.p), modp(p.Y * zi2 * zi, c.p), false};
}

}  // namespace

mpz_class mod_inverse(const mpz_class& v, const mpz_class& m) {
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t()) == 0)
    throw std::domain_error("mod_inverse: value not invertible");
  return r;
}

const CurveParams& secp256r1() {
  static const CurveParams c = [] {
    CurveParams k;
    k.name = "secp256r1";
    k.p = mpz_class("0xffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
    k.a = k.p - 3;
    k.b = mpz_class("0x5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b");
    k.gx = mpz_class("0x6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296");
    k.gy = mpz_class("0x4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5");
    k.q = mpz_class("0xffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551");
    k.coord_bytes = 32;
    return k;
  }();
  return c;
}

const CurveParams& toy_gf97() {
  static const CurveParams c = [] {
    CurveParams k;
    k.name = "toy-gf97";
    k.p = 97;
    k.a = 2;
    k.b = 3;
    k.gx = 3;
    k.gy = 6;
    k.q = 5;
    k.coord_bytes = 32;
    return k;
  }();
  return c;
}

bool on_curve(const CurveParams& c, const EcPoint& pt) {
  if (pt.infinity) return true;
  if (pt.x < 0 || pt.x >= c.p || pt.y < 0 || pt.y >= c.p) return false;
  mpz_class lhs = modp(pt.y * pt.y, c.p);
  mpz_class rhs = modp(pt.x * pt.x * pt.x + c.a * pt.x + c.b, c.p);
  return lhs == rhs;
}

EcPoint ec_double(const CurveParams& c, const EcPoint& pt) {
  if (pt.infinity) return pt;
  if (pt.y == 0) return EcPoint::at_infinity();
  mpz_class lam = modp((3 * pt.x * pt.x + c.a) * mod_inverse(2 * pt.y, c.p), c.p);
  mpz_class x3 = modp(lam * lam - 2 * pt.x, c.p);
  mpz_class y3 = modp(lam * (pt.x - x3) - pt.y, c.p);
  return EcPoint{x3, y3, false};
}

EcPoint ec_add(const CurveParams& c, const EcPoint& lhs, const EcPoint& rhs) {
  if (lhs.infinity) return rhs;
  if (rhs.infinity) return lhs;
  if (lhs.x == rhs.x) {
    if (modp(lhs.y + rhs.y, c.p) == 0) return EcPoint::at_infinity();
    return ec_double(c, lhs);
  }
  mpz_class lam = modp((rhs.y - lhs.y) * mod_inverse(modp(rhs.x - lhs.x, c.p), c.p), c.p);
  mpz_class x3 = modp(lam * lam - lhs.x - rhs.x, c.p);
  mpz_class y3 = modp(lam * (lhs.x - x3) - lhs.y, c.p);
  return EcPoint{x3, y3, false};
}

EcPoint ec_mul(const CurveParams& c, const mpz_class& k, const EcPoint& pt) {
  if (k < 0) throw std::invalid_argument("ec_mul: negative scalar");
  if (k == 0 || pt.infinity) return EcPoint::at_infinity();
  const Jac base = to_jac(pt);
  Jac acc{1, 1, 0};
  const size_t bits = mpz_sizeinbase(k.get_mpz_t(), 2);
  for (size_t i = bits; i-- > 0;) {
    acc = jac_double(c, acc);
    if (mpz_tstbit(k.get_mpz_t(), i)) acc = jac_add(c, acc, base);
  }
  return from_jac(c, acc);
}

EcPoint base_point(const CurveParams& c) { return EcPoint{c.gx, c.gy, false}; }

}  // namespace esia
