#include "esia/consensus.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "esia/rng.hpp"

#include <json.hpp>

namespace esia::consensus {

namespace {

const char* layer_name(Layer l) { return l == Layer::kOvlFog ? "ovl" : "fvl"; }

void emit_broadcast(EventLog& log, const Committee& c, uint64_t round, const char* phase,
                    uint32_t from, const std::string& digest_hex) {
  for (uint32_t member : c.members) {
    if (member == from) continue;
    log.push_back({round, c.layer, c.fog, phase, from, member, digest_hex});
  }
}

}  // namespace

std::string event_log_jsonl(const EventLog& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    nlohmann::json j{{"round", e.round},
                     {"layer", layer_name(e.layer)},
                     {"fog", e.fog},
                     {"phase", e.phase},
                     {"from", e.from},
                     {"to", e.to},
                     {"digest", e.digest_hex}};
    out << j.dump() << '\n';
  }
  return out.str();
}

PbftResult run_pbft(const Committee& committee, const Digest32& proposal,
                    const std::vector<bool>& faulty, EventLog* log, uint64_t round) {
  const size_t n = committee.members.size();
  if (committee.layer == Layer::kOvlFog && n < 4)
    throw std::invalid_argument("run_pbft: fog committee needs at least four members");
  if (n == 0) throw std::invalid_argument("run_pbft: empty committee");
  if (faulty.size() != n) throw std::invalid_argument("run_pbft: fault vector size mismatch");
  if (committee.primary_index >= n)
    throw std::invalid_argument("run_pbft: primary index out of range");

  PbftResult res;
  const size_t fault_count = static_cast<size_t>(std::count(faulty.begin(), faulty.end(), true));
  const size_t alive = n - fault_count;
  const size_t tolerated = n / 3;
  res.success = fault_count <= tolerated;

  size_t primary = committee.primary_index;
  while (res.rotations < n && faulty[primary]) {
    primary = (primary + 1) % n;
    ++res.rotations;
  }
  if (alive == 0) {  // nobody can lead, the round dies silently
    res.success = false;
    return res;
  }
  res.primary = committee.members[primary];

  const uint64_t fanout = static_cast<uint64_t>(n - 1);
  res.messages = fanout;                                 // pre-prepare
  res.messages += static_cast<uint64_t>(alive - 1) * fanout;  // prepare
  const bool quorum = alive >= n - tolerated;            // == success for crash faults
  if (quorum) res.messages += static_cast<uint64_t>(alive) * fanout;  // commit

  if (log) {
    const std::string digest_hex = to_hex(std::span<const uint8_t>(proposal));
    const size_t before = log->size();
    emit_broadcast(*log, committee, round, "pre-prepare", committee.members[primary], digest_hex);
    for (size_t i = 0; i < n; ++i) {
      if (faulty[i] || i == primary) continue;
      emit_broadcast(*log, committee, round, "prepare", committee.members[i], digest_hex);
    }
    if (quorum) {
      for (size_t i = 0; i < n; ++i) {
        if (faulty[i]) continue;
        emit_broadcast(*log, committee, round, "commit", committee.members[i], digest_hex);
      }
    }
    if (log->size() - before != res.messages)
      throw std::logic_error("run_pbft: event count diverged from the closed form");
  }

  if (res.success) {
    for (size_t i = 0; i < n; ++i)
      if (!faulty[i]) res.committed.emplace_back(committee.members[i], proposal);
  }
  return res;
}

ConsensusReport run_b2uh_round(const grouping::GroupingPlan& plan,
                               const RoundProposals& proposals, const FaultModel& fault_model,
                               EventLog* log, uint64_t round, bool parallel) {
  const size_t x = plan.fogs.size();
  if (x == 0) throw std::invalid_argument("run_b2uh_round: plan has no fogs");
  if (proposals.fog.size() != x)
    throw std::invalid_argument("run_b2uh_round: one proposal per fog required");
  if (fault_model.p_f < 0.0 || fault_model.p_f > 1.0)
    throw std::invalid_argument("run_b2uh_round: p_f outside [0, 1]");

  ConsensusReport report;
  report.fog_success.assign(x, false);

  std::vector<PbftResult> fog_results(x);
  std::vector<EventLog> fog_logs(log ? x : 0);
  auto run_fog = [&](size_t f) {
    const auto& fog = plan.fogs[f];
    Committee c{Layer::kOvlFog, static_cast<uint32_t>(f), fog.members, 0};
    DetRng rng = DetRng::derive(fault_model.seed, static_cast<uint64_t>(f));
    std::vector<bool> faulty(fog.members.size());
    for (size_t i = 0; i < faulty.size(); ++i) faulty[i] = rng.bernoulli(fault_model.p_f);
    fog_results[f] = run_pbft(c, proposals.fog[f], faulty, log ? &fog_logs[f] : nullptr, round);
  };

  if (parallel && x > 1) {
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    const size_t workers = std::min<size_t>(std::thread::hardware_concurrency() ?
                                                std::thread::hardware_concurrency() : 2,
                                            x);
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t f = next.fetch_add(1); f < x; f = next.fetch_add(1)) {
          try {
            run_fog(f);
          } catch (...) {
            std::lock_guard<std::mutex> hold(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  } else {
    for (size_t f = 0; f < x; ++f) run_fog(f);
  }

  uint64_t member_model = 0;
  for (size_t f = 0; f < x; ++f) {
    report.fog_success[f] = fog_results[f].success;
    if (!fog_results[f].success) ++report.failed_fogs;
    report.simulated_messages += fog_results[f].messages;
    const uint64_t y = plan.fogs[f].members.size();
    member_model += y * y;
    if (log)
      log->insert(log->end(), fog_logs[f].begin(), fog_logs[f].end());
  }

  const uint64_t budget = x / 3;
  report.event_a = report.failed_fogs <= budget;
  if (report.event_a) {
    Committee fvl{Layer::kFvl, 0, {}, 0};
    fvl.members.reserve(x);
    for (const auto& fog : plan.fogs) fvl.members.push_back(fog.head);
    DetRng rng = DetRng::derive(fault_model.seed, static_cast<uint64_t>(x));
    std::vector<bool> faulty(x);
    for (size_t f = 0; f < x; ++f) {
      if (!report.fog_success[f]) {
        faulty[f] = true;  // its fog never delivered, so it has nothing to propose
      } else {
        faulty[f] = rng.bernoulli(fault_model.p_f);
        if (faulty[f]) ++report.fvl_faulty;
      }
    }
    PbftResult fvl_res = run_pbft(fvl, proposals.fvl, faulty, log, round);
    report.fvl_ran = true;
    report.fvl_success = fvl_res.success;
    report.simulated_messages += fvl_res.messages;
  }
  report.overall_success = report.event_a && report.fvl_success;
  report.analytic_model_messages =
      member_model + (report.fvl_ran ? static_cast<uint64_t>(x) * x : 0);
  return report;
}

uint64_t analytic_message_count(uint64_t x, uint64_t y, uint64_t fogs_run, bool fvl_ran) {
  if (fogs_run > x) throw std::invalid_argument("analytic_message_count: fogs_run > x");
  return fogs_run * y * y + (fvl_ran ? x * x : 0);
}

}  // namespace esia::consensus
