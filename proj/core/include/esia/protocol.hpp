#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esia/bytes.hpp"
#include "esia/ec.hpp"
#include "esia/rng.hpp"
#include "esia/signature.hpp"

namespace esia::protocol {

// Wire sizes (bytes). All encodings are fixed-layout big-endian.
inline constexpr size_t kOvReqRegBytes = 164;   // OID, FogID, RSUID, IDCard, Time
inline constexpr size_t kFvReqRegBytes = 132;   // FogID, RSUID, IDCard, Time
inline constexpr size_t kReqConBytes = 192;     // A1 OID, A1 FogID, A1 RSUID, A2 OID, IDCard
inline constexpr size_t kReqLogoutBytes = 96;   // OID, FogID, RSUID
inline constexpr size_t kAuthExchangeBytes = 320;     // ReqCon + both cards, same fog
inline constexpr size_t kCrossFogAuthBytes = 448;     // + the two FV cards
inline constexpr size_t kMutualAuthTotalBytes = 484;  // one registration + one authentication

// Registration request. The OV form carries the requesting vehicle's OID;
// the FV form identifies the vehicle by its FogID alone.
struct ReqReg {
  std::optional<Identity32> oid;
  Identity32 fog{};
  Identity32 rsu{};
  IDCard card;
  uint32_t time = 0;
  bool operator==(const ReqReg& o) const {
    return oid == o.oid && fog == o.fog && rsu == o.rsu && card == o.card && time == o.time;
  }
};

// Channel request from A1 towards A2. Bidirectional authentication verifies
// this and the mirrored request from A2 before the channel opens.
struct ReqCon {
  Identity32 a1_oid{};
  Identity32 a1_fog{};
  Identity32 a1_rsu{};
  Identity32 a2_oid{};
  IDCard card;
  bool operator==(const ReqCon& o) const {
    return a1_oid == o.a1_oid && a1_fog == o.a1_fog && a1_rsu == o.a1_rsu &&
           a2_oid == o.a2_oid && card == o.card;
  }
};

struct ReqLogout {
  Identity32 oid{};
  Identity32 fog{};
  Identity32 rsu{};
  bool operator==(const ReqLogout& o) const {
    return oid == o.oid && fog == o.fog && rsu == o.rsu;
  }
};

// Encoders produce exactly the sizes above; decoders reject any other length
// with std::invalid_argument. decode_reqreg tells the two forms apart by
// length alone.
Bytes encode_reqreg(const CurveParams& c, const ReqReg& m);
ReqReg decode_reqreg(const CurveParams& c, std::span<const uint8_t> wire);
Bytes encode_reqcon(const CurveParams& c, const ReqCon& m);
ReqCon decode_reqcon(const CurveParams& c, std::span<const uint8_t> wire);
Bytes encode_reqlogout(const ReqLogout& m);
ReqLogout decode_reqlogout(std::span<const uint8_t> wire);

enum class RecordKind : uint8_t { kRegister = 1, kAuth = 2, kLogout = 3 };

struct LedgerRecord {
  RecordKind kind = RecordKind::kRegister;
  Identity32 subject{};  // the vehicle the record is about
  Identity32 fog{};
  Identity32 peer{};     // authentication peer; zero otherwise
  uint32_t time = 0;
  bool operator==(const LedgerRecord& o) const {
    return kind == o.kind && subject == o.subject && fog == o.fog && peer == o.peer &&
           time == o.time;
  }
};

struct LedgerBlock {
  uint64_t height = 0;
  Digest32 prev{};
  uint32_t time = 0;
  std::vector<LedgerRecord> records;
  Digest32 digest{};
};

Digest32 block_digest(const LedgerBlock& b);

// Hash-linked chain of record blocks. Blocks are appended whole; verify
// recomputes every digest and link.
class Ledger {
 public:
  const std::vector<LedgerBlock>& blocks() const { return blocks_; }

  const LedgerBlock& append(std::vector<LedgerRecord> records, uint32_t time);

  struct VerifyResult {
    bool ok = true;
    uint64_t bad_height = 0;  // meaningful when !ok
  };
  VerifyResult verify() const;

  // JSON Lines, one block per line, digests hex-encoded.
  void save_jsonl(const std::string& path) const;
  static Ledger load_jsonl(const std::string& path);

 private:
  std::vector<LedgerBlock> blocks_;
};

enum class Role { kFv, kOv };
enum class VehicleStatus { kUnknown, kRegistered, kRevoked };

struct OpCounters {
  uint64_t signatures = 0;
  uint64_t verifications = 0;
  uint64_t hashes = 0;
  uint64_t encryptions = 0;
  OpCounters operator-(const OpCounters& o) const {
    return {signatures - o.signatures, verifications - o.verifications, hashes - o.hashes,
            encryptions - o.encryptions};
  }
  bool operator==(const OpCounters& o) const {
    return signatures == o.signatures && verifications == o.verifications &&
           hashes == o.hashes && encryptions == o.encryptions;
  }
};

struct VehicleCredential {
  Identity32 id{};   // hash of the ethernet address; FVs double as their FogID
  Role role = Role::kOv;
  Identity32 fog{};
  Identity32 rsu{};
  KeyPair keys;
  IDCard card;
};

// Provisioning input: one fog head plus its member vehicles, all hanging off
// one RSU.
struct FogSpec {
  Bytes fv_ea;
  std::vector<Bytes> ov_eas;
  Identity32 rsu{};
};

enum class RegisterError { kNone, kTimeout, kUnknownRsu, kUnknownFog, kBadIdCard };
enum class AuthError { kNone, kBadCardFormat, kUnknownVehicle, kInvalidStatus, kFvLayerFailure };
enum class LogoutError { kNone, kUnknownRsu, kUnknownFog, kUnknownVehicle };

const char* to_string(RegisterError e);
const char* to_string(AuthError e);
const char* to_string(LogoutError e);

struct RegisterOutcome {
  bool accepted = false;
  RegisterError error = RegisterError::kNone;
};

struct AuthOutcome {
  bool established = false;
  AuthError error = AuthError::kNone;
  bool cross_fog = false;
  uint64_t bytes_transferred = 0;
  // fog head's grant over (A1 || A2 || time); meaningful when established
  Signature channel_sig;
};

struct LogoutOutcome {
  bool revoked = false;
  LogoutError error = LogoutError::kNone;
};

struct EngineConfig {
  uint32_t delta_ts_s = 5;      // registration freshness window
  uint64_t seed = 1;
  uint32_t epoch_s = 1'000'000;  // logical clock start
};

// Chain-side protocol engine: owns the trusted-authority keys, the RSU
// registry, vehicle status, per-fog ledgers and the FV-layer ledger.
// Successful operations stage records; commit_fog / commit_fvl seal staged
// records into blocks (the harness calls them after consensus rounds).
class Engine {
 public:
  explicit Engine(const EngineConfig& cfg = {});

  const CurveParams& curve() const { return curve_; }
  const KeyPair& ta_keys() const { return ta_; }
  uint32_t delta_ts() const { return cfg_.delta_ts_s; }

  void add_rsu(const Identity32& rsu);
  bool known_rsu(const Identity32& rsu) const;

  // Logical clock, seconds.
  uint32_t now() const { return clock_; }
  void advance_clock(uint32_t seconds) { clock_ += seconds; }

  // Derives identities from ethernet addresses, generates keypairs, and has
  // the trusted authority issue the matching card per vehicle. Credentials
  // come back fog by fog, head first. Registers nothing by itself. Throws
  // std::invalid_argument on a duplicate ethernet address.
  std::vector<VehicleCredential> initialize(std::span<const FogSpec> fogs);

  // Check order: timeliness, RSU, fog (OV form only), card. FV registration
  // creates the fog; OVs need theirs to exist already.
  RegisterOutcome register_vehicle(const ReqReg& req, uint32_t receive_time);

  // Bidirectional: `fwd` is A1's request, `rev` the mirrored one from A2
  // (throws std::invalid_argument when not mirrored). Card rejections report
  // kBadCardFormat whether structural or cryptographic. Cross-fog requests
  // route through both fog heads, whose mutual verification failure (or an
  // unhealthy FV layer) reports kFvLayerFailure.
  AuthOutcome authenticate(const ReqCon& fwd, const ReqCon& rev);

  // Check order: RSU, fog, vehicle. Revoking twice reports kUnknownVehicle.
  LogoutOutcome logout(const ReqLogout& req);

  VehicleStatus status(const Identity32& id) const;
  const OpCounters& counters() const { return counters_; }

  // Marks the FV layer (un)available for cross-fog authentication, as driven
  // by hierarchical consensus outcomes.
  void set_fvl_healthy(bool healthy) { fvl_healthy_ = healthy; }
  bool fvl_healthy() const { return fvl_healthy_; }

  // Staged-record plumbing. Commits return false when nothing was staged.
  size_t staged_fog_records(const Identity32& fog) const;
  size_t staged_fvl_records() const;
  bool commit_fog(const Identity32& fog);
  bool commit_fvl();
  size_t commit_all();  // blocks sealed

  const Ledger* fog_ledger(const Identity32& fog) const;
  const Ledger& fvl_ledger() const { return fvl_ledger_; }
  std::vector<Identity32> fog_ids() const;

  // Convenience builders used by the harness and tests.
  static ReqReg make_reqreg(const VehicleCredential& v, uint32_t time);
  static ReqCon make_reqcon(const VehicleCredential& a1, const Identity32& a2_oid);

 private:
  struct VehicleRecord {
    Role role = Role::kOv;
    Identity32 fog{};
    Identity32 rsu{};
    IDCard card;
    VehicleStatus status = VehicleStatus::kUnknown;
  };

  bool verify_card(const Identity32& id, const VehicleRecord& rec, const IDCard& card);
  Signature grant_channel(const Identity32& fv_id, const Identity32& a1, const Identity32& a2);

  EngineConfig cfg_;
  const CurveParams& curve_;
  DetRng rng_;
  KeyPair ta_;
  uint32_t clock_;
  bool fvl_healthy_ = true;
  OpCounters counters_;
  std::map<Identity32, bool> rsus_;
  std::map<Identity32, VehicleRecord> vehicles_;
  std::map<Identity32, KeyPair> keys_;  // chain-side copies, FVs sign grants
  std::map<Identity32, std::vector<LedgerRecord>> staged_;
  std::map<Identity32, Ledger> fog_ledgers_;
  std::vector<LedgerRecord> staged_fvl_;
  Ledger fvl_ledger_;
};

}  // namespace esia::protocol
