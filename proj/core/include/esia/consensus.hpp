#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esia/bytes.hpp"
#include "esia/grouping.hpp"

namespace esia::consensus {

enum class Layer { kOvlFog, kFvl };

struct Committee {
  Layer layer = Layer::kOvlFog;
  uint32_t fog = 0;  // fog index, meaningful for OVL committees
  std::vector<uint32_t> members;
  size_t primary_index = 0;
};

// Crash faults at round granularity: a member drawn faulty sends nothing for
// the whole round. Same seed, same plan: identical draws.
struct FaultModel {
  double p_f = 0.0;
  uint64_t seed = 1;
};

struct ConsensusEvent {
  uint64_t round = 0;
  Layer layer = Layer::kOvlFog;
  uint32_t fog = 0;
  std::string phase;  // "pre-prepare" | "prepare" | "commit"
  uint32_t from = 0;
  uint32_t to = 0;
  std::string digest_hex;
};

using EventLog = std::vector<ConsensusEvent>;

// One JSON object per event, newline separated.
std::string event_log_jsonl(const EventLog& log);

struct PbftResult {
  bool success = false;
  uint64_t messages = 0;
  size_t rotations = 0;                  // primary hops before a live one led
  std::optional<uint32_t> primary;       // member id that led the round
  std::vector<std::pair<uint32_t, Digest32>> committed;  // live members only
};

// Synchronous-round PBFT: pre-prepare from the primary, prepare broadcast by
// live non-primaries, commit broadcast iff the prepare quorum n - floor(n/3)
// of live members holds. A faulty primary is skipped round-robin (at most n
// hops, message free). Success iff faulty count <= floor(n/3). `faulty` is
// aligned with committee.members and fixed before the round. With a log the
// per-message loop runs and its count matches the closed form.
// Throws std::invalid_argument for an OVL committee smaller than four or a
// faulty vector of the wrong length.
PbftResult run_pbft(const Committee& committee, const Digest32& proposal,
                    const std::vector<bool>& faulty, EventLog* log = nullptr, uint64_t round = 0);

struct RoundProposals {
  std::vector<Digest32> fog;  // one per fog, by fog index
  Digest32 fvl{};
};

struct ConsensusReport {
  std::vector<bool> fog_success;
  uint64_t failed_fogs = 0;  // j
  uint64_t fvl_faulty = 0;   // k, fresh draws among FVs of surviving fogs
  bool event_a = false;      // j <= floor(x/3), gatekeeps the FVL round
  bool fvl_ran = false;
  bool fvl_success = false;
  bool overall_success = false;
  uint64_t simulated_messages = 0;
  uint64_t analytic_model_messages = 0;
};

// Bottom-up round over a grouping plan: every fog committee (its member OVs)
// runs PBFT first, then, iff failed fogs j <= floor(x/3), the FV committee
// runs with failed-fog FVs forced faulty plus fresh independent p_f draws for
// the rest. Overall success requires both gates. Fog faults come from
// per-fog RNG streams so the parallel path merges deterministically; set
// `parallel` to fan fogs out across threads (identical output either way).
ConsensusReport run_b2uh_round(const grouping::GroupingPlan& plan,
                               const RoundProposals& proposals, const FaultModel& fault_model,
                               EventLog* log = nullptr, uint64_t round = 0, bool parallel = false);

// Message count of the reference model: fogs_run * y^2, plus x^2 when the
// FVL round ran.
uint64_t analytic_message_count(uint64_t x, uint64_t y, uint64_t fogs_run, bool fvl_ran);

}  // namespace esia::consensus
