#include "esia/protocol.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "esia/sha256.hpp"

#include <json.hpp>

namespace esia::protocol {

namespace {

void append_id(Bytes& out, const Identity32& id) { out.insert(out.end(), id.begin(), id.end()); }

Identity32 take_id(std::span<const uint8_t> wire, size_t& off) {
  Identity32 id;
  std::copy_n(wire.begin() + off, id.size(), id.begin());
  off += id.size();
  return id;
}

IDCard take_card(const CurveParams& c, std::span<const uint8_t> wire, size_t& off) {
  auto sig = decode_signature(c, wire.subspan(off, kSignatureBytes));
  if (!sig) throw std::invalid_argument("decode: bad card field");
  off += kSignatureBytes;
  return *sig;
}

Bytes record_payload(const LedgerRecord& r) {
  Bytes out;
  out.push_back(static_cast<uint8_t>(r.kind));
  append_id(out, r.subject);
  append_id(out, r.fog);
  append_id(out, r.peer);
  put_u32be(out, r.time);
  return out;
}

const char* kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::kRegister: return "register";
    case RecordKind::kAuth: return "auth";
    case RecordKind::kLogout: return "logout";
  }
  return "unknown";
}

RecordKind kind_from_name(const std::string& s, size_t line) {
  if (s == "register") return RecordKind::kRegister;
  if (s == "auth") return RecordKind::kAuth;
  if (s == "logout") return RecordKind::kLogout;
  throw std::runtime_error("ledger line " + std::to_string(line) + ": unknown record kind '" + s +
                           "'");
}

Identity32 id_from_hex(const std::string& s, size_t line) {
  auto v = array_from_hex<32>(s);
  if (!v)
    throw std::runtime_error("ledger line " + std::to_string(line) + ": bad hex field '" + s +
                             "'");
  return *v;
}

}  // namespace

Bytes encode_reqreg(const CurveParams& c, const ReqReg& m) {
  Bytes out;
  out.reserve(m.oid ? kOvReqRegBytes : kFvReqRegBytes);
  if (m.oid) append_id(out, *m.oid);
  append_id(out, m.fog);
  append_id(out, m.rsu);
  const Bytes card = encode_signature(c, m.card);
  out.insert(out.end(), card.begin(), card.end());
  put_u32be(out, m.time);
  return out;
}

ReqReg decode_reqreg(const CurveParams& c, std::span<const uint8_t> wire) {
  if (wire.size() != kOvReqRegBytes && wire.size() != kFvReqRegBytes)
    throw std::invalid_argument("decode_reqreg: expected 164 or 132 bytes, got " +
                                std::to_string(wire.size()));
  ReqReg m;
  size_t off = 0;
  if (wire.size() == kOvReqRegBytes) m.oid = take_id(wire, off);
  m.fog = take_id(wire, off);
  m.rsu = take_id(wire, off);
  m.card = take_card(c, wire, off);
  m.time = read_u32be(wire, off);
  return m;
}

Bytes encode_reqcon(const CurveParams& c, const ReqCon& m) {
  Bytes out;
  out.reserve(kReqConBytes);
  append_id(out, m.a1_oid);
  append_id(out, m.a1_fog);
  append_id(out, m.a1_rsu);
  append_id(out, m.a2_oid);
  const Bytes card = encode_signature(c, m.card);
  out.insert(out.end(), card.begin(), card.end());
  return out;
}

ReqCon decode_reqcon(const CurveParams& c, std::span<const uint8_t> wire) {
  if (wire.size() != kReqConBytes)
    throw std::invalid_argument("decode_reqcon: expected 192 bytes, got " +
                                std::to_string(wire.size()));
  ReqCon m;
  size_t off = 0;
  m.a1_oid = take_id(wire, off);
  m.a1_fog = take_id(wire, off);
  m.a1_rsu = take_id(wire, off);
  m.a2_oid = take_id(wire, off);
  m.card = take_card(c, wire, off);
  return m;
}

Bytes encode_reqlogout(const ReqLogout& m) {
  Bytes out;
  out.reserve(kReqLogoutBytes);
  append_id(out, m.oid);
  append_id(out, m.fog);
  append_id(out, m.rsu);
  return out;
}

ReqLogout decode_reqlogout(std::span<const uint8_t> wire) {
  if (wire.size() != kReqLogoutBytes)
    throw std::invalid_argument("decode_reqlogout: expected 96 bytes, got " +
                                std::to_string(wire.size()));
  ReqLogout m;
  size_t off = 0;
  m.oid = take_id(wire, off);
  m.fog = take_id(wire, off);
  m.rsu = take_id(wire, off);
  return m;
}

Digest32 block_digest(const LedgerBlock& b) {
  Bytes canon;
  put_u64be(canon, b.height);
  canon.insert(canon.end(), b.prev.begin(), b.prev.end());
  put_u32be(canon, b.time);
  put_u32be(canon, static_cast<uint32_t>(b.records.size()));
  for (const auto& r : b.records) {
    const Bytes payload = record_payload(r);
    canon.insert(canon.end(), payload.begin(), payload.end());
  }
  return sha256(canon);
}

const LedgerBlock& Ledger::append(std::vector<LedgerRecord> records, uint32_t time) {
  LedgerBlock b;
  b.height = blocks_.size();
  if (!blocks_.empty()) b.prev = blocks_.back().digest;
  b.time = time;
  b.records = std::move(records);
  b.digest = block_digest(b);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

Ledger::VerifyResult Ledger::verify() const {
  Digest32 prev{};
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    if (b.height != i || b.prev != prev || b.digest != block_digest(b))
      return {false, static_cast<uint64_t>(i)};
    prev = b.digest;
  }
  return {true, 0};
}

void Ledger::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ledger save: cannot open " + path);
  for (const auto& b : blocks_) {
    nlohmann::ordered_json jb;
    jb["height"] = b.height;
    jb["prev"] = to_hex(std::span<const uint8_t>(b.prev));
    jb["time"] = b.time;
    auto& recs = jb["records"] = nlohmann::ordered_json::array();
    for (const auto& r : b.records) {
      nlohmann::ordered_json jr;
      jr["kind"] = kind_name(r.kind);
      jr["subject"] = to_hex(std::span<const uint8_t>(r.subject));
      jr["fog"] = to_hex(std::span<const uint8_t>(r.fog));
      jr["peer"] = to_hex(std::span<const uint8_t>(r.peer));
      jr["time"] = r.time;
      recs.push_back(std::move(jr));
    }
    jb["digest"] = to_hex(std::span<const uint8_t>(b.digest));
    out << jb.dump() << '\n';
  }
  if (!out) throw std::runtime_error("ledger save: write failed for " + path);
}

Ledger Ledger::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ledger load: cannot open " + path);
  Ledger ledger;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json jb;
    try {
      jb = nlohmann::json::parse(line);
      LedgerBlock b;
      b.height = jb.at("height").get<uint64_t>();
      b.prev = id_from_hex(jb.at("prev").get<std::string>(), lineno);
      b.time = jb.at("time").get<uint32_t>();
      for (const auto& jr : jb.at("records")) {
        LedgerRecord r;
        r.kind = kind_from_name(jr.at("kind").get<std::string>(), lineno);
        r.subject = id_from_hex(jr.at("subject").get<std::string>(), lineno);
        r.fog = id_from_hex(jr.at("fog").get<std::string>(), lineno);
        r.peer = id_from_hex(jr.at("peer").get<std::string>(), lineno);
        r.time = jr.at("time").get<uint32_t>();
        b.records.push_back(std::move(r));
      }
      b.digest = id_from_hex(jb.at("digest").get<std::string>(), lineno);
      ledger.blocks_.push_back(std::move(b));
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ledger;
}

const char* to_string(RegisterError e) {
  switch (e) {
    case RegisterError::kNone: return "none";
    case RegisterError::kTimeout: return "Timeout";
    case RegisterError::kUnknownRsu: return "UnknownRSU";
    case RegisterError::kUnknownFog: return "UnknownFog";
    case RegisterError::kBadIdCard: return "BadIDCard";
  }
  return "unknown";
}

const char* to_string(AuthError e) {
  switch (e) {
    case AuthError::kNone: return "none";
    case AuthError::kBadCardFormat: return "BadCardFormat";
    case AuthError::kUnknownVehicle: return "UnknownVehicle";
    case AuthError::kInvalidStatus: return "InvalidStatus";
    case AuthError::kFvLayerFailure: return "FVLayerFailure";
  }
  return "unknown";
}

const char* to_string(LogoutError e) {
  switch (e) {
    case LogoutError::kNone: return "none";
    case LogoutError::kUnknownRsu: return "UnknownRSU";
    case LogoutError::kUnknownFog: return "UnknownFog";
    case LogoutError::kUnknownVehicle: return "UnknownVehicle";
  }
  return "unknown";
}

Engine::Engine(const EngineConfig& cfg)
    : cfg_(cfg), curve_(secp256r1()), rng_(DetRng::derive(cfg.seed, 0xE51A)), clock_(cfg.epoch_s) {
  ta_ = generate_keypair(curve_, rng_);
}

void Engine::add_rsu(const Identity32& rsu) { rsus_[rsu] = true; }

bool Engine::known_rsu(const Identity32& rsu) const { return rsus_.count(rsu) > 0; }

std::vector<VehicleCredential> Engine::initialize(std::span<const FogSpec> fogs) {
  std::set<Bytes> seen;
  std::vector<VehicleCredential> out;
  for (const auto& fog : fogs) {
    if (!seen.insert(fog.fv_ea).second)
      throw std::invalid_argument("initialize: duplicate ethernet address");
    VehicleCredential fv;
    fv.id = hash_identity(fog.fv_ea);
    fv.role = Role::kFv;
    fv.fog = fv.id;  // the head's identity names the fog
    fv.rsu = fog.rsu;
    fv.keys = generate_keypair(curve_, rng_);
    fv.card = issue_fv_idcard(curve_, ta_.sk, fv.rsu, fv.fog, rng_);
    counters_.signatures += 1;
    counters_.hashes += 1;
    keys_[fv.id] = fv.keys;
    out.push_back(fv);
    for (const auto& ea : fog.ov_eas) {
      if (!seen.insert(ea).second)
        throw std::invalid_argument("initialize: duplicate ethernet address");
      VehicleCredential ov;
      ov.id = hash_identity(ea);
      ov.role = Role::kOv;
      ov.fog = fv.id;
      ov.rsu = fog.rsu;
      ov.keys = generate_keypair(curve_, rng_);
      ov.card = issue_ov_idcard(curve_, ta_.sk, ov.rsu, ov.fog, ov.id, rng_);
      counters_.signatures += 1;
      counters_.hashes += 1;
      keys_[ov.id] = ov.keys;
      out.push_back(ov);
    }
  }
  return out;
}

bool Engine::verify_card(const Identity32& id, const VehicleRecord& rec, const IDCard& card) {
  counters_.hashes += 1;  // rebuild the bound payload
  counters_.verifications += 1;
  if (rec.role == Role::kFv) return verify_fv_idcard(curve_, card, rec.rsu, rec.fog, ta_.pk);
  return verify_ov_idcard(curve_, card, rec.rsu, rec.fog, id, ta_.pk);
}

Signature Engine::grant_channel(const Identity32& fv_id, const Identity32& a1,
                                const Identity32& a2) {
  Bytes payload;
  append_id(payload, a1);
  append_id(payload, a2);
  put_u32be(payload, clock_);
  counters_.signatures += 1;
  return sign(curve_, payload, keys_.at(fv_id).sk, rng_);
}

RegisterOutcome Engine::register_vehicle(const ReqReg& req, uint32_t receive_time) {
  const int64_t age = static_cast<int64_t>(receive_time) - static_cast<int64_t>(req.time);
  if (age > static_cast<int64_t>(cfg_.delta_ts_s))
    return {false, RegisterError::kTimeout};
  if (!known_rsu(req.rsu)) return {false, RegisterError::kUnknownRsu};
  const bool is_ov = req.oid.has_value();
  if (is_ov) {
    auto it = vehicles_.find(req.fog);
    if (it == vehicles_.end() || it->second.role != Role::kFv)
      return {false, RegisterError::kUnknownFog};
  }
  counters_.hashes += 1;
  counters_.verifications += 1;
  const bool card_ok =
      is_ov ? verify_ov_idcard(curve_, req.card, req.rsu, req.fog, *req.oid, ta_.pk)
            : verify_fv_idcard(curve_, req.card, req.rsu, req.fog, ta_.pk);
  if (!card_ok) return {false, RegisterError::kBadIdCard};

  const Identity32 id = is_ov ? *req.oid : req.fog;
  VehicleRecord rec;
  rec.role = is_ov ? Role::kOv : Role::kFv;
  rec.fog = req.fog;
  rec.rsu = req.rsu;
  rec.card = req.card;
  rec.status = VehicleStatus::kRegistered;
  vehicles_[id] = rec;
  staged_[req.fog].push_back({RecordKind::kRegister, id, req.fog, Identity32{}, receive_time});
  return {true, RegisterError::kNone};
}

AuthOutcome Engine::authenticate(const ReqCon& fwd, const ReqCon& rev) {
  if (rev.a1_oid != fwd.a2_oid || rev.a2_oid != fwd.a1_oid)
    throw std::invalid_argument("authenticate: reverse request is not the mirror of the forward");

  AuthOutcome out;
  if (!signature_well_formed(curve_, fwd.card) || !signature_well_formed(curve_, rev.card)) {
    out.error = AuthError::kBadCardFormat;
    return out;
  }
  auto a1_it = vehicles_.find(fwd.a1_oid);
  auto a2_it = vehicles_.find(fwd.a2_oid);
  if (a1_it == vehicles_.end() || a2_it == vehicles_.end()) {
    out.error = AuthError::kUnknownVehicle;
    return out;
  }
  if (a1_it->second.status != VehicleStatus::kRegistered ||
      a2_it->second.status != VehicleStatus::kRegistered) {
    out.error = AuthError::kInvalidStatus;
    return out;
  }
  if (!verify_card(fwd.a1_oid, a1_it->second, fwd.card) ||
      !verify_card(fwd.a2_oid, a2_it->second, rev.card)) {
    out.error = AuthError::kBadCardFormat;
    return out;
  }

  const Identity32 fog_a = a1_it->second.fog;
  const Identity32 fog_b = a2_it->second.fog;
  if (fog_a == fog_b) {
    out.channel_sig = grant_channel(fog_a, fwd.a1_oid, fwd.a2_oid);
    staged_[fog_a].push_back({RecordKind::kAuth, fwd.a1_oid, fog_a, fwd.a2_oid, clock_});
    out.established = true;
    out.bytes_transferred = kAuthExchangeBytes;
    return out;
  }

  out.cross_fog = true;
  auto fv1_it = vehicles_.find(fog_a);
  auto fv2_it = vehicles_.find(fog_b);
  if (!fvl_healthy_ || fv1_it == vehicles_.end() || fv2_it == vehicles_.end() ||
      fv1_it->second.status != VehicleStatus::kRegistered ||
      fv2_it->second.status != VehicleStatus::kRegistered) {
    out.error = AuthError::kFvLayerFailure;
    return out;
  }
  // the two heads vouch for their vehicles by swapping and checking cards
  if (!verify_card(fog_a, fv1_it->second, fv1_it->second.card) ||
      !verify_card(fog_b, fv2_it->second, fv2_it->second.card)) {
    out.error = AuthError::kFvLayerFailure;
    return out;
  }
  out.channel_sig = grant_channel(fog_a, fwd.a1_oid, fwd.a2_oid);
  staged_fvl_.push_back({RecordKind::kAuth, fwd.a1_oid, fog_a, fwd.a2_oid, clock_});
  out.established = true;
  out.bytes_transferred = kCrossFogAuthBytes;
  return out;
}

LogoutOutcome Engine::logout(const ReqLogout& req) {
  if (!known_rsu(req.rsu)) return {false, LogoutError::kUnknownRsu};
  auto fog_it = vehicles_.find(req.fog);
  if (fog_it == vehicles_.end() || fog_it->second.role != Role::kFv)
    return {false, LogoutError::kUnknownFog};
  auto it = vehicles_.find(req.oid);
  if (it == vehicles_.end() || it->second.status != VehicleStatus::kRegistered)
    return {false, LogoutError::kUnknownVehicle};
  it->second.status = VehicleStatus::kRevoked;
  staged_[req.fog].push_back({RecordKind::kLogout, req.oid, req.fog, Identity32{}, clock_});
  return {true, LogoutError::kNone};
}

VehicleStatus Engine::status(const Identity32& id) const {
  auto it = vehicles_.find(id);
  return it == vehicles_.end() ? VehicleStatus::kUnknown : it->second.status;
}

size_t Engine::staged_fog_records(const Identity32& fog) const {
  auto it = staged_.find(fog);
  return it == staged_.end() ? 0 : it->second.size();
}

size_t Engine::staged_fvl_records() const { return staged_fvl_.size(); }

bool Engine::commit_fog(const Identity32& fog) {
  auto it = staged_.find(fog);
  if (it == staged_.end() || it->second.empty()) return false;
  fog_ledgers_[fog].append(std::move(it->second), clock_);
  it->second.clear();
  return true;
}

bool Engine::commit_fvl() {
  if (staged_fvl_.empty()) return false;
  fvl_ledger_.append(std::move(staged_fvl_), clock_);
  staged_fvl_.clear();
  return true;
}

size_t Engine::commit_all() {
  size_t sealed = 0;
  for (auto& [fog, records] : staged_) {
    if (records.empty()) continue;
    fog_ledgers_[fog].append(std::move(records), clock_);
    records.clear();
    ++sealed;
  }
  if (commit_fvl()) ++sealed;
  return sealed;
}

const Ledger* Engine::fog_ledger(const Identity32& fog) const {
  auto it = fog_ledgers_.find(fog);
  return it == fog_ledgers_.end() ? nullptr : &it->second;
}

std::vector<Identity32> Engine::fog_ids() const {
  std::vector<Identity32> out;
  for (const auto& [id, rec] : vehicles_)
    if (rec.role == Role::kFv) out.push_back(id);
  return out;
}

ReqReg Engine::make_reqreg(const VehicleCredential& v, uint32_t time) {
  ReqReg req;
  if (v.role == Role::kOv) req.oid = v.id;
  req.fog = v.fog;
  req.rsu = v.rsu;
  req.card = v.card;
  req.time = time;
  return req;
}

ReqCon Engine::make_reqcon(const VehicleCredential& a1, const Identity32& a2_oid) {
  return {a1.id, a1.fog, a1.rsu, a2_oid, a1.card};
}

}  // namespace esia::protocol
