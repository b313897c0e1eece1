#pragma once

// Random prompt/outcome sequences for the ICT state machine, checked against
// an independent tally of which prompts are follow-ups.

#include <cstdint>
#include <set>
#include <string>

#include "frm/engagement.hpp"
#include "frm/rng.hpp"

namespace frm::testing {

struct IctFuzzStats {
  long sequences = 0;
  long prompts = 0;
  long followup_misses = 0;
  long interventions = 0;
  long voided = 0;
  long failures = 0;
  std::string first_failure;
};

inline void ict_fuzz_one(std::uint64_t seed, IctFuzzStats& st) {
  using namespace frm::engagement;
  Rng rng(seed);
  IctConfig cfg;
  cfg.jitter = rng.uniform(0.0, 0.5);
  cfg.interventions_for_pull_over = 1 + int(rng.below(3));
  IctScheduler ict(cfg);

  auto fail = [&](const std::string& why) {
    if (st.failures++ == 0) st.first_failure = "seed " + std::to_string(seed) + ": " + why;
  };

  std::set<std::uint64_t> followups;  // prompt ids we saw issued as follow-ups
  std::set<std::uint64_t> voided;
  std::set<std::uint64_t> intervened;
  int shift_tally = 0;
  Timestamp now = 0;
  double odo = 0.0;
  const int steps = 20 + int(rng.below(60));

  auto check = [&](std::uint64_t id, bool was_followup, const IctResolution& res,
                   OutcomeSignal::Kind kind) {
    const bool expect = was_followup && kind == OutcomeSignal::Kind::deadline_passed;
    if (res.intervention.has_value() != expect) fail("intervention presence mismatch");
    if (res.intervention) {
      ++st.interventions;
      ++shift_tally;
      if (!intervened.insert(id).second) fail("second intervention for one prompt");
      if (voided.count(id)) fail("intervention for a voided prompt");
      if (res.intervention->pull_over != (shift_tally >= cfg.interventions_for_pull_over))
        fail("pull-over flag mismatch");
    }
    if (expect) ++st.followup_misses;
    const bool expect_followup = !was_followup && kind == OutcomeSignal::Kind::deadline_passed;
    if (res.followup.has_value() != expect_followup) fail("follow-up presence mismatch");
    if (res.followup) {
      if (res.followup->follows != id) fail("follow-up names the wrong prompt");
      followups.insert(res.followup->prompt_id);
      ++st.prompts;
    }
  };

  for (int i = 0; i < steps; ++i) {
    now += 1 + Timestamp(rng.below(200));
    odo += rng.uniform(0.0, 2000.0);
    const auto& pending = ict.state().pending;
    if (!pending) {
      if (rng.bernoulli(0.05)) {
        ict.begin_shift(now, odo);
        shift_tally = 0;
        continue;
      }
      if (rng.bernoulli(0.2)) {
        ict.record_interactivity(now, odo, rng.bernoulli(0.5));
        continue;
      }
      if (auto p = ict.tick(now, odo, rng.bernoulli(0.1), rng)) {
        ++st.prompts;
        if (p->is_followup) fail("gap prompt marked as follow-up");
      }
      continue;
    }
    const std::uint64_t id = pending->prompt_id;
    const bool was_followup = pending->is_followup;
    if (was_followup != (followups.count(id) > 0)) fail("follow-up flag disagrees with tally");
    const double u = rng.uniform();
    if (u < 0.35) {
      now = pending->deadline + 1 + Timestamp(rng.below(5));
      auto res = ict.resolve(now, odo, OutcomeSignal::deadline_passed());
      check(id, was_followup, res, OutcomeSignal::Kind::deadline_passed);
    } else if (u < 0.6) {
      const double lat = rng.uniform(0.0, cfg.deadline_s);
      auto res = ict.resolve(now, odo, OutcomeSignal::responded(lat));
      check(id, was_followup, res, OutcomeSignal::Kind::responded);
    } else if (u < 0.8) {
      voided.insert(id);
      ++st.voided;
      auto res = ict.resolve(now, odo, OutcomeSignal::demand_rose());
      check(id, was_followup, res, OutcomeSignal::Kind::demand_rose);
    } else {
      // Interactivity under high demand voids the pending prompt.
      auto rec = ict.record_interactivity(now, odo, true);
      voided.insert(id);
      ++st.voided;
      if (!rec || rec->outcome != IctOutcome::voided_by_demand) fail("demand did not void");
      if (ict.state().pending) fail("prompt still pending after void");
    }
    if (rng.bernoulli(0.3)) ict.adapt();
    const double m = ict.state().frequency_multiplier;
    if (m < cfg.min_multiplier || m > 1.0) fail("multiplier out of range");
  }
  ++st.sequences;
}

}  // namespace frm::testing
