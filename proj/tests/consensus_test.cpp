#include "esia/consensus.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

#include "esia/rng.hpp"
#include "esia/sha256.hpp"

namespace esia::consensus {
namespace {

Committee make_committee(size_t n, Layer layer = Layer::kOvlFog) {
  Committee c;
  c.layer = layer;
  c.fog = 0;
  for (size_t i = 0; i < n; ++i) c.members.push_back(static_cast<uint32_t>(100 + i));
  c.primary_index = 0;
  return c;
}

Digest32 digest_of(const char* s) {
  return sha256(Bytes(s, s + strlen(s)));
}

grouping::GroupingPlan uniform_plan(uint64_t x, uint64_t y) {
  grouping::GroupingPlan plan;
  plan.x = x;
  plan.y = y;
  uint32_t id = 0;
  for (uint64_t f = 0; f < x; ++f) {
    grouping::FogAssignment fog;
    fog.head = id++;
    for (uint64_t m = 0; m < y; ++m) fog.members.push_back(id++);
    plan.fogs.push_back(fog);
  }
  return plan;
}

TEST(PbftTest, SuccessIffFaultyWithinTolerance) {
  const Digest32 d = digest_of("block");
  for (size_t n = 4; n <= 10; ++n) {
    Committee c = make_committee(n);
    for (size_t faulty_count = 0; faulty_count <= n; ++faulty_count) {
      std::vector<bool> faulty(n, false);
      for (size_t i = 0; i < faulty_count; ++i) faulty[i] = true;
      const auto res = run_pbft(c, d, faulty);
      EXPECT_EQ(res.success, faulty_count <= n / 3) << "n=" << n << " f=" << faulty_count;
    }
  }
}

TEST(PbftTest, MessageCountClosedForm) {
  const Digest32 d = digest_of("block");
  const size_t n = 7;
  Committee c = make_committee(n);

  // no faults: pre-prepare + prepares + commits
  {
    const auto res = run_pbft(c, d, std::vector<bool>(n, false));
    EXPECT_EQ(res.messages, (n - 1) + (n - 1) * (n - 1) + n * (n - 1));
  }
  // two faults (tolerated 2): alive 5, quorum 5 met
  {
    std::vector<bool> faulty(n, false);
    faulty[2] = faulty[5] = true;
    const auto res = run_pbft(c, d, faulty);
    EXPECT_TRUE(res.success);
    const uint64_t alive = n - 2;
    EXPECT_EQ(res.messages, (n - 1) + (alive - 1) * (n - 1) + alive * (n - 1));
  }
  // three faults: quorum missed, commits never go out
  {
    std::vector<bool> faulty(n, false);
    faulty[1] = faulty[3] = faulty[6] = true;
    const auto res = run_pbft(c, d, faulty);
    EXPECT_FALSE(res.success);
    const uint64_t alive = n - 3;
    EXPECT_EQ(res.messages, (n - 1) + (alive - 1) * (n - 1));
  }
  // all faulty: silence
  {
    const auto res = run_pbft(c, d, std::vector<bool>(n, true));
    EXPECT_FALSE(res.success);
    EXPECT_EQ(res.messages, 0u);
    EXPECT_FALSE(res.primary.has_value());
  }
}

TEST(PbftTest, FaultyPrimaryRotates) {
  const Digest32 d = digest_of("x");
  const size_t n = 5;
  Committee c = make_committee(n);
  std::vector<bool> faulty(n, false);
  faulty[0] = true;  // member 100 is the scheduled primary
  const auto res = run_pbft(c, d, faulty);
  EXPECT_TRUE(res.success);
  EXPECT_EQ(res.rotations, 1u);
  ASSERT_TRUE(res.primary.has_value());
  EXPECT_EQ(*res.primary, 101u);

  c.primary_index = 3;
  std::vector<bool> faulty2(n, false);
  faulty2[3] = faulty2[4] = true;  // wraps around to index 0
  const auto res2 = run_pbft(c, d, faulty2);
  EXPECT_EQ(res2.rotations, 2u);
  ASSERT_TRUE(res2.primary.has_value());
  EXPECT_EQ(*res2.primary, 100u);
}

TEST(PbftTest, CommittedEntriesAgree) {
  const Digest32 d = digest_of("agreement");
  DetRng rng(81);
  for (int round = 0; round < 200; ++round) {
    const size_t n = 4 + rng.next_below(8);
    Committee c = make_committee(n);
    std::vector<bool> faulty(n);
    for (size_t i = 0; i < n; ++i) faulty[i] = rng.bernoulli(0.25);
    const auto res = run_pbft(c, d, faulty);
    if (!res.success) {
      EXPECT_TRUE(res.committed.empty());
      continue;
    }
    size_t live = 0;
    for (bool f : faulty) live += !f;
    EXPECT_EQ(res.committed.size(), live);
    for (const auto& [id, digest] : res.committed) EXPECT_EQ(digest, d);
  }
}

TEST(PbftTest, RejectsMalformedInput) {
  const Digest32 d{};
  EXPECT_THROW(run_pbft(make_committee(3), d, std::vector<bool>(3, false)),
               std::invalid_argument);
  EXPECT_THROW(run_pbft(make_committee(0), d, {}), std::invalid_argument);
  EXPECT_THROW(run_pbft(make_committee(5), d, std::vector<bool>(4, false)),
               std::invalid_argument);
  Committee c = make_committee(5);
  c.primary_index = 5;
  EXPECT_THROW(run_pbft(c, d, std::vector<bool>(5, false)), std::invalid_argument);
}

TEST(PbftTest, EventLogMatchesMessageCount) {
  const Digest32 d = digest_of("logged");
  DetRng rng(82);
  for (int round = 0; round < 50; ++round) {
    const size_t n = 4 + rng.next_below(6);
    Committee c = make_committee(n);
    std::vector<bool> faulty(n);
    for (size_t i = 0; i < n; ++i) faulty[i] = rng.bernoulli(0.3);
    EventLog log;
    const auto res = run_pbft(c, d, faulty, &log, round);
    EXPECT_EQ(log.size(), res.messages);
    for (const auto& ev : log) {
      EXPECT_EQ(ev.round, static_cast<uint64_t>(round));
      EXPECT_TRUE(ev.phase == "pre-prepare" || ev.phase == "prepare" || ev.phase == "commit");
      EXPECT_NE(ev.from, ev.to);
    }
  }
}

TEST(PbftTest, EventLogSerializesAsJsonLines) {
  const Digest32 d = digest_of("json");
  Committee c = make_committee(4);
  EventLog log;
  run_pbft(c, d, std::vector<bool>(4, false), &log, 3);
  const std::string text = event_log_jsonl(log);
  std::istringstream in(text);
  std::string line;
  size_t count = 0;
  while (std::getline(in, line)) {
    const auto parsed = nlohmann::json::parse(line);
    EXPECT_EQ(parsed.at("round").get<uint64_t>(), 3u);
    EXPECT_TRUE(parsed.contains("phase"));
    EXPECT_TRUE(parsed.contains("digest"));
    ++count;
  }
  EXPECT_EQ(count, log.size());
}

TEST(B2uhRoundTest, AllHealthyCommitsEverything) {
  const auto plan = uniform_plan(12, 4);
  RoundProposals proposals;
  for (uint64_t f = 0; f < 12; ++f) proposals.fog.push_back(digest_of("fog"));
  proposals.fvl = digest_of("fvl");
  const auto rep = run_b2uh_round(plan, proposals, FaultModel{0.0, 1});
  EXPECT_TRUE(rep.overall_success);
  EXPECT_TRUE(rep.event_a);
  EXPECT_TRUE(rep.fvl_ran);
  EXPECT_TRUE(rep.fvl_success);
  EXPECT_EQ(rep.failed_fogs, 0u);
  EXPECT_EQ(rep.fvl_faulty, 0u);
  EXPECT_EQ(rep.analytic_model_messages, analytic_message_count(12, 4, 12, true));
  EXPECT_EQ(rep.analytic_model_messages, 12 * 16 + 144u);
}

TEST(B2uhRoundTest, TotalFailureStaysSilent) {
  const auto plan = uniform_plan(6, 4);
  RoundProposals proposals;
  proposals.fog.assign(6, digest_of("f"));
  const auto rep = run_b2uh_round(plan, proposals, FaultModel{1.0, 1});
  EXPECT_FALSE(rep.overall_success);
  EXPECT_FALSE(rep.event_a);
  EXPECT_FALSE(rep.fvl_ran);
  EXPECT_EQ(rep.failed_fogs, 6u);
  EXPECT_EQ(rep.simulated_messages, 0u);
  // the reference model prices every fog round that ran, successful or not;
  // only the skipped head round drops out
  EXPECT_EQ(rep.analytic_model_messages, analytic_message_count(6, 4, 6, false));
}

TEST(B2uhRoundTest, DeterministicAndParallelSafe) {
  const auto plan = uniform_plan(10, 5);
  RoundProposals proposals;
  proposals.fog.assign(10, digest_of("p"));
  proposals.fvl = digest_of("q");
  const FaultModel fault{0.25, 77};

  const auto serial = run_b2uh_round(plan, proposals, fault, nullptr, 4, false);
  const auto parallel = run_b2uh_round(plan, proposals, fault, nullptr, 4, true);
  EXPECT_EQ(serial.fog_success, parallel.fog_success);
  EXPECT_EQ(serial.failed_fogs, parallel.failed_fogs);
  EXPECT_EQ(serial.fvl_faulty, parallel.fvl_faulty);
  EXPECT_EQ(serial.overall_success, parallel.overall_success);
  EXPECT_EQ(serial.simulated_messages, parallel.simulated_messages);

  EventLog log_s, log_p;
  const auto s2 = run_b2uh_round(plan, proposals, fault, &log_s, 4, false);
  const auto p2 = run_b2uh_round(plan, proposals, fault, &log_p, 4, true);
  EXPECT_EQ(s2.simulated_messages, serial.simulated_messages);
  ASSERT_EQ(log_s.size(), log_p.size());
  for (size_t i = 0; i < log_s.size(); ++i) {
    EXPECT_EQ(log_s[i].fog, log_p[i].fog);
    EXPECT_EQ(log_s[i].phase, log_p[i].phase);
    EXPECT_EQ(log_s[i].from, log_p[i].from);
    EXPECT_EQ(log_s[i].to, log_p[i].to);
  }
}

TEST(B2uhRoundTest, OverallIffBothGates) {
  DetRng rng(83);
  const auto plan = uniform_plan(9, 4);
  RoundProposals proposals;
  proposals.fog.assign(9, digest_of("g"));
  for (uint64_t seed = 0; seed < 300; ++seed) {
    const auto rep = run_b2uh_round(plan, proposals, FaultModel{0.3, seed});
    EXPECT_EQ(rep.event_a, rep.failed_fogs <= 9 / 3) << seed;
    EXPECT_EQ(rep.fvl_ran, rep.event_a) << seed;
    EXPECT_EQ(rep.overall_success, rep.event_a && rep.fvl_success) << seed;
    if (rep.fvl_ran) {
      // FVL verdict follows the combined faulty count against the full bench
      EXPECT_EQ(rep.fvl_success, rep.failed_fogs + rep.fvl_faulty <= 9 / 3) << seed;
    }
  }
}

TEST(B2uhRoundTest, RejectsMalformedInput) {
  const auto plan = uniform_plan(4, 4);
  RoundProposals proposals;
  proposals.fog.assign(3, Digest32{});  // wrong count
  EXPECT_THROW(run_b2uh_round(plan, proposals, FaultModel{0.0, 1}), std::invalid_argument);
  proposals.fog.assign(4, Digest32{});
  EXPECT_THROW(run_b2uh_round(plan, proposals, FaultModel{-0.5, 1}), std::invalid_argument);
  EXPECT_THROW(run_b2uh_round(grouping::GroupingPlan{}, RoundProposals{}, FaultModel{0.0, 1}),
               std::invalid_argument);
}

TEST(AnalyticCountTest, Formula) {
  EXPECT_EQ(analytic_message_count(12, 4, 12, true), 12 * 16 + 144u);
  EXPECT_EQ(analytic_message_count(12, 4, 7, false), 7 * 16u);
  EXPECT_EQ(analytic_message_count(5, 9, 0, false), 0u);
  EXPECT_THROW(analytic_message_count(4, 4, 5, true), std::invalid_argument);
}

}  // namespace
}  // namespace esia::consensus
