#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "msj/policy.hpp"

using namespace msj;

namespace {

// State with jobs queued in the given need order and `running` needs in service.
SimState make_state(const WorkloadSpec& spec, const std::vector<int>& queued_needs,
                    const std::vector<int>& running_needs = {}, PhaseState phase = {}) {
  SimState s(spec);
  std::uint64_t id = 0;
  for (int need : running_needs) {
    const auto c = *spec.index_of_need(need);
    ++s.in_service[c];
    s.busy += need;
    s.running.push({1.0, id++, c, 0.0, 0.0});
  }
  for (int need : queued_needs) {
    const auto c = *spec.index_of_need(need);
    s.queue[c].push_back({id++, c, need, 1.0, 0.0});
  }
  s.phase = phase;
  return s;
}

std::vector<int> admitted_needs(const SimState& s, const Decision& d) {
  std::vector<int> out;
  for (auto c : d.admit) out.push_back(s.needs[c]);
  return out;
}

WorkloadSpec spec_of(int k, std::vector<int> needs) {
  std::vector<ClassSpec> cs;
  for (int n : needs) cs.push_back({n, 1.0, 1.0});
  return WorkloadSpec(k, cs);
}

PolicyConfig msfq(int ell) {
  PolicyConfig p{PolicyKind::msfq};
  p.threshold = ell;
  return p;
}

}  // namespace

TEST(Policy, FcfsHeadOfLineBlocking) {
  const auto spec = spec_of(8, {1, 4});
  const auto s = make_state(spec, {4, 1, 1}, {1, 1, 1, 1, 1});  // free = 3
  const Scheduler fcfs({PolicyKind::fcfs}, spec);
  EXPECT_TRUE(fcfs.decide(s).admit.empty());
}

TEST(Policy, FirstFitSkipsBlockedHead) {
  const auto spec = spec_of(8, {1, 4});
  const auto s = make_state(spec, {4, 1, 1}, {1, 1, 1, 1, 1});
  const Scheduler ff({PolicyKind::first_fit}, spec);
  EXPECT_EQ(admitted_needs(s, ff.decide(s)), (std::vector<int>{1, 1}));
}

TEST(Policy, FirstFitKeepsArrivalOrderAcrossClasses) {
  const auto spec = spec_of(8, {1, 2, 4});
  const auto s = make_state(spec, {2, 4, 1, 2});  // free = 8
  const Scheduler ff({PolicyKind::first_fit}, spec);
  EXPECT_EQ(admitted_needs(s, ff.decide(s)), (std::vector<int>{2, 4, 1}));
}

TEST(Policy, MsfDescendingNeed) {
  const auto spec = spec_of(8, {1, 3});
  const auto s = make_state(spec, {1, 1, 1, 1, 3, 3}, {1, 1, 1});  // free = 5
  const Scheduler msf({PolicyKind::msf}, spec);
  EXPECT_EQ(admitted_needs(s, msf.decide(s)), (std::vector<int>{3, 1, 1}));
}

TEST(Policy, EmptyQueueAdmitsNothing) {
  const auto spec = spec_of(4, {1, 4});
  for (auto kind : {PolicyKind::fcfs, PolicyKind::first_fit, PolicyKind::msf, PolicyKind::adaptive_quickswap,
                    PolicyKind::static_quickswap, PolicyKind::nmsr_simplified, PolicyKind::msfq}) {
    const Scheduler sched({kind}, spec);
    const auto s = make_state(spec, {}, {}, sched.initial_phase());
    const auto d = sched.decide(s);
    EXPECT_TRUE(d.admit.empty()) << to_string(kind);
  }
}

TEST(Policy, MsfqRejectsGeneralWorkloads) {
  EXPECT_THROW(Scheduler(msfq(1), spec_of(4, {1, 2, 4})), ConfigError);
  EXPECT_THROW(Scheduler(msfq(4), spec_of(4, {1, 4})), ConfigError);
  EXPECT_THROW(Scheduler(msfq(-1), spec_of(4, {1, 4})), ConfigError);
  EXPECT_NO_THROW(Scheduler(msfq(3), spec_of(4, {1, 4})));
  PolicyConfig bad{PolicyKind::msf};
  bad.threshold = 1;
  EXPECT_THROW(Scheduler(bad, spec_of(4, {1, 4})), ConfigError);
}

TEST(Policy, MsfqPhaseOneServesOneLargeJob) {
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(3), spec);
  const auto s = make_state(spec, {4, 4, 1}, {}, MsfqPhase::p1);
  const auto d = sched.decide(s);
  EXPECT_EQ(admitted_needs(s, d), (std::vector<int>{4}));
  EXPECT_EQ(std::get<MsfqPhase>(d.phase), MsfqPhase::p1);
}

TEST(Policy, MsfqEmptySystemRestsInPhaseOne) {
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(3), spec);
  const auto d = sched.decide(make_state(spec, {}, {}, MsfqPhase::p1));
  EXPECT_EQ(std::get<MsfqPhase>(d.phase), MsfqPhase::p1);
  EXPECT_TRUE(d.entered.empty());
}

TEST(Policy, MsfqSwitchesToSmallJobsWhenLargeQueueEmpty) {
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(3), spec);
  // Five small jobs: P2 fills all four servers and stays (n_1 = 5 >= k).
  const auto s = make_state(spec, {1, 1, 1, 1, 1}, {}, MsfqPhase::p1);
  const auto d = sched.decide(s);
  EXPECT_EQ(d.admit.size(), 4u);
  EXPECT_EQ(std::get<MsfqPhase>(d.phase), MsfqPhase::p2);
}

TEST(Policy, MsfqThresholdTopPassesThroughPhaseThree) {
  // With ell = k-1, P3 is left the moment it is entered.
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(3), spec);
  const auto s = make_state(spec, {}, {1, 1, 1}, MsfqPhase::p2);
  const auto d = sched.decide(s);
  ASSERT_EQ(d.entered.size(), 2u);
  EXPECT_EQ(std::get<MsfqPhase>(d.entered[0]), MsfqPhase::p3);
  EXPECT_EQ(std::get<MsfqPhase>(d.entered[1]), MsfqPhase::p4);
}

TEST(Policy, MsfqPhaseFourBlocksSmallArrivals) {
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(2), spec);
  const auto s = make_state(spec, {1, 1}, {1}, MsfqPhase::p4);
  const auto d = sched.decide(s);
  EXPECT_TRUE(d.admit.empty());
  EXPECT_EQ(std::get<MsfqPhase>(d.phase), MsfqPhase::p4);
}

TEST(Policy, MsfqPhaseFourEndsWhenSmallServiceEmpties) {
  const auto spec = spec_of(4, {1, 4});
  const Scheduler sched(msfq(2), spec);
  const auto s = make_state(spec, {4, 1}, {}, MsfqPhase::p4);
  const auto d = sched.decide(s);
  ASSERT_FALSE(d.entered.empty());
  EXPECT_EQ(std::get<MsfqPhase>(d.entered[0]), MsfqPhase::p1);
  EXPECT_EQ(admitted_needs(s, d), (std::vector<int>{4}));
}

TEST(Policy, StaticQuickswapCapsClassSchedule) {
  const auto spec = spec_of(15, {1, 3, 5, 15});
  const Scheduler sched({PolicyKind::static_quickswap}, spec);
  const std::size_t pos3 = 2;  // descending order: 15, 5, 3, 1
  ASSERT_EQ(spec.needs()[sched.phase_order()[pos3]], 3);
  const auto s = make_state(spec, std::vector<int>(7, 3), {}, StaticQuickswapPhase{pos3, SwapMode::working, false});
  const auto d = sched.decide(s);
  EXPECT_EQ(d.admit.size(), 5u);
  EXPECT_EQ(std::get<StaticQuickswapPhase>(d.phase).mode, SwapMode::working);
}

TEST(Policy, StaticQuickswapDrainsThenSkipsEmptyClasses) {
  const auto spec = spec_of(15, {1, 3, 5, 15});
  const Scheduler sched({PolicyKind::static_quickswap}, spec);
  // Class 3 working with only 2 jobs: idle servers 9 > 1, so drain.
  const auto s = make_state(spec, {3, 3, 1}, {}, StaticQuickswapPhase{2, SwapMode::working, false});
  const auto d = sched.decide(s);
  EXPECT_EQ(admitted_needs(s, d), (std::vector<int>{3, 3}));
  EXPECT_EQ(std::get<StaticQuickswapPhase>(d.phase).mode, SwapMode::draining);
  // Once class 3 finishes, class 1 is next in the cycle and has work.
  const auto s2 = make_state(spec, {1}, {}, StaticQuickswapPhase{2, SwapMode::draining, false});
  const auto d2 = sched.decide(s2);
  ASSERT_FALSE(d2.entered.empty());
  EXPECT_EQ(sched.label(d2.entered[0]), "W1");
  EXPECT_EQ(admitted_needs(s2, d2), (std::vector<int>{1}));
  // One job leaves 14 of 15 servers idle, so class 1 drains right away.
  EXPECT_EQ(sched.label(d2.phase), "D1");
  // Only class 15 has work: classes 1 skipped, cycle wraps to 15.
  const auto s3 = make_state(spec, {15}, {}, StaticQuickswapPhase{2, SwapMode::draining, false});
  EXPECT_EQ(sched.label(sched.decide(s3).phase), "W15");
}

TEST(Policy, StaticQuickswapIdlesWhenEverythingEmpty) {
  const auto spec = spec_of(15, {1, 3, 5, 15});
  const Scheduler sched({PolicyKind::static_quickswap}, spec);
  const auto s = make_state(spec, {}, {}, StaticQuickswapPhase{2, SwapMode::draining, false});
  const auto d = sched.decide(s);
  EXPECT_TRUE(std::get<StaticQuickswapPhase>(d.phase).idle);
  EXPECT_EQ(sched.label(d.phase), "idle");
}

TEST(Policy, StaticQuickswapValidatesCycleOrder) {
  const auto spec = spec_of(15, {1, 3, 5, 15});
  PolicyConfig p{PolicyKind::static_quickswap};
  p.cycle_order = {1, 3, 5};
  EXPECT_THROW(Scheduler(p, spec), ConfigError);
  p.cycle_order = {1, 3, 5, 5};
  EXPECT_THROW(Scheduler(p, spec), ConfigError);
  p.cycle_order = {1, 5, 3, 15};
  const Scheduler ok(p, spec);
  EXPECT_EQ(spec.needs()[ok.phase_order()[1]], 5);
}

TEST(Policy, StaticQuickswapSingleServerIsWorkConserving) {
  // One class, one slot: a job is admitted whenever the server is free.
  const auto spec = spec_of(1, {1});
  const Scheduler sched({PolicyKind::static_quickswap}, spec);
  auto phase = sched.initial_phase();
  auto s = make_state(spec, {1, 1}, {}, phase);
  auto d = sched.decide(s);
  EXPECT_EQ(d.admit.size(), 1u);
  s = make_state(spec, {1}, {}, d.phase);
  EXPECT_EQ(sched.decide(s).admit.size(), 1u);
}

TEST(Policy, AdaptiveQuickswapKeepsAdmittingWithoutTrigger) {
  const auto spec = spec_of(8, {1, 2, 4});
  const Scheduler sched({PolicyKind::adaptive_quickswap}, spec);
  // Class 2 in service with more class-2 waiting: no trigger.
  const auto s = make_state(spec, {2, 2, 2, 2}, {2, 2}, AdaptiveQuickswapPhase{});
  const auto d = sched.decide(s);
  EXPECT_EQ(d.admit.size(), 2u);
  EXPECT_EQ(std::get<AdaptiveQuickswapPhase>(d.phase).mode, SwapMode::working);
}

TEST(Policy, AdaptiveQuickswapDrainsForLargestJob) {
  const auto spec = spec_of(8, {1, 2, 4});
  const Scheduler sched({PolicyKind::adaptive_quickswap}, spec);
  // Six need-1 jobs running, a need-4 waiting and no need-1 waiting: trigger.
  const auto s = make_state(spec, {4}, {1, 1, 1, 1, 1, 1}, AdaptiveQuickswapPhase{});
  const auto d = sched.decide(s);
  EXPECT_TRUE(d.admit.empty());
  EXPECT_EQ(std::get<AdaptiveQuickswapPhase>(d.phase).mode, SwapMode::draining);
  // Draining: a need-1 arrival is not admitted even though it fits.
  const auto s2 = make_state(spec, {4, 1}, {1, 1, 1, 1, 1, 1}, d.phase);
  EXPECT_TRUE(sched.decide(s2).admit.empty());
  // When four servers free up the need-4 job enters and work resumes.
  const auto s3 = make_state(spec, {4, 1}, {1, 1, 1, 1}, d.phase);
  const auto d3 = sched.decide(s3);
  EXPECT_EQ(admitted_needs(s3, d3), (std::vector<int>{4}));
  EXPECT_EQ(std::get<AdaptiveQuickswapPhase>(d3.phase).mode, SwapMode::working);
  ASSERT_EQ(d3.entered.size(), 1u);
}

TEST(Policy, AdaptiveQuickswapEmptyDrainingStays) {
  const auto spec = spec_of(8, {1, 2, 4});
  const Scheduler sched({PolicyKind::adaptive_quickswap}, spec);
  const auto s = make_state(spec, {}, {1}, AdaptiveQuickswapPhase{SwapMode::draining});
  const auto d = sched.decide(s);
  EXPECT_EQ(std::get<AdaptiveQuickswapPhase>(d.phase).mode, SwapMode::draining);
}

TEST(Policy, NmsrWastesCapacityOnWrongSchedule) {
  const auto spec = WorkloadSpec(4, {{1, 3.0, 1.0}, {4, 0.1, 1.0}});
  const Scheduler sched({PolicyKind::nmsr_simplified}, spec);
  // Schedules in descending need: S4 then S1.
  EXPECT_EQ(sched.label(NmsrPhase{0}), "S4");
  const auto s = make_state(spec, {4}, {}, NmsrPhase{1});
  EXPECT_TRUE(sched.decide(s).admit.empty());
  const auto s2 = make_state(spec, {1, 1, 1, 1, 1}, {}, NmsrPhase{1});
  EXPECT_EQ(sched.decide(s2).admit.size(), 4u);
  EXPECT_EQ(std::get<NmsrPhase>(sched.on_timer(NmsrPhase{1})).schedule, 0u);
}

TEST(Policy, NmsrDefaultHoldingMeansFollowLoad) {
  const auto spec = WorkloadSpec(4, {{1, 2.0, 1.0}, {4, 0.5, 1.0}});  // loads 2 and 2
  const Scheduler sched({PolicyKind::nmsr_simplified}, spec);
  EXPECT_DOUBLE_EQ(sched.holding_mean(NmsrPhase{0}), sched.holding_mean(NmsrPhase{1}));
  EXPECT_DOUBLE_EQ(sched.holding_mean(NmsrPhase{0}) + sched.holding_mean(NmsrPhase{1}), 10.0);
  PolicyConfig p{PolicyKind::nmsr_simplified};
  p.holding_means = {1.0};
  EXPECT_THROW(Scheduler(p, spec), ConfigError);
}

TEST(Policy, KindNamesRoundTrip) {
  for (auto kind : {PolicyKind::fcfs, PolicyKind::first_fit, PolicyKind::msf, PolicyKind::msfq,
                    PolicyKind::static_quickswap, PolicyKind::adaptive_quickswap, PolicyKind::nmsr_simplified}) {
    EXPECT_EQ(policy_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_EQ(policy_kind_from_string("nmsr"), PolicyKind::nmsr_simplified);
  EXPECT_THROW(policy_kind_from_string("lifo"), ConfigError);
}

TEST(Policy, ConfigJsonRoundTrip) {
  PolicyConfig p{PolicyKind::static_quickswap};
  p.threshold = 7;
  p.cycle_order = {15, 1, 5, 3};
  p.threshold_overrides = {{3, 2}};
  EXPECT_EQ(policy_from_json(policy_to_json(p)), p);
  PolicyConfig n{PolicyKind::nmsr_simplified};
  n.holding_means = {1.5, 2.5};
  n.cycle_length = 4;
  EXPECT_EQ(policy_from_json(policy_to_json(n)), n);
  EXPECT_EQ(policy_from_json(nlohmann::json("msf")).kind, PolicyKind::msf);
}

// Property: on random states every policy admits only jobs that fit, in
// per-class FIFO order, and never more than the queue holds.
TEST(PolicyProperty, AdmissionsAreFeasible) {
  const auto spec = spec_of(12, {1, 2, 3, 12});
  const auto one_all = spec_of(12, {1, 12});
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    for (auto kind : {PolicyKind::fcfs, PolicyKind::first_fit, PolicyKind::msf, PolicyKind::static_quickswap,
                      PolicyKind::adaptive_quickswap, PolicyKind::nmsr_simplified, PolicyKind::msfq}) {
      const auto& w = kind == PolicyKind::msfq ? one_all : spec;
      const Scheduler sched({kind}, w);
      std::vector<int> queued, running;
      std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
      const int nq = static_cast<int>(rng() % 10);
      for (int i = 0; i < nq; ++i) queued.push_back(w.needs()[pick(rng)]);
      int busy = 0;
      for (int i = 0; i < 6; ++i) {
        const int need = w.needs()[pick(rng)];
        if (busy + need <= w.k()) {
          running.push_back(need);
          busy += need;
        }
      }
      // MSFQ only reaches states where one class is in service.
      PhaseState phase = sched.initial_phase();
      if (kind == PolicyKind::msfq) {
        running.erase(std::remove(running.begin(), running.end(), 12), running.end());
        phase = static_cast<MsfqPhase>(1 + rng() % 4);
        if (std::get<MsfqPhase>(phase) == MsfqPhase::p1) running.clear();
      }
      const auto s = make_state(w, queued, running, phase);
      const auto d = sched.decide(s);
      int used = s.busy;
      std::vector<std::size_t> taken(w.size(), 0);
      for (auto c : d.admit) {
        used += s.needs[c];
        ++taken[c];
        ASSERT_LE(taken[c], s.queue[c].size());
      }
      EXPECT_LE(used, w.k()) << to_string(kind);
    }
  }
}
