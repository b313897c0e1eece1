#include <doctest.h>

#include "frm/engagement.hpp"
#include "frm/error.hpp"
#include "ict_fuzz.hpp"

using namespace frm::engagement;
using frm::Rng;

namespace {

IctConfig no_jitter() {
  IctConfig c;
  c.jitter = 0.0;
  return c;
}

}  // namespace

TEST_CASE("time gap triggers a prompt, distance gap likewise") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  CHECK_FALSE(ict.tick(299, 0.0, false, rng));
  auto p = ict.tick(300, 0.0, false, rng);
  REQUIRE(p);
  CHECK(p->trigger == IctTrigger::gap_time);
  CHECK(p->deadline == 330);
  CHECK_FALSE(ict.tick(301, 0.0, false, rng));  // one pending at a time

  IctScheduler d(no_jitter());
  auto q = d.tick(10, 3000.0, false, rng);
  REQUIRE(q);
  CHECK(q->trigger == IctTrigger::gap_distance);
}

TEST_CASE("high demand holds prompts back") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  CHECK_FALSE(ict.tick(1000, 0.0, true, rng));
  CHECK(ict.tick(1000, 0.0, false, rng));
}

TEST_CASE("jitter scales the threshold within bounds, drawn once per decision") {
  IctConfig cfg;
  cfg.jitter = 0.2;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    IctScheduler ict(cfg);
    Rng rng(seed);
    Timestamp t = 0;
    std::optional<IctPrompt> p;
    while (!(p = ict.tick(t, 0.0, false, rng))) ++t;
    CHECK(t >= 240);
    CHECK(t <= 360);
    CHECK(*ict.state().jitter_factor == doctest::Approx(1.0).epsilon(0.2));
  }
}

TEST_CASE("miss, follow-up miss, intervention; second intervention pulls over") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  auto p = ict.tick(300, 0.0, false, rng);
  auto r1 = ict.resolve(331, 0.0, OutcomeSignal::deadline_passed());
  CHECK(r1.record.outcome == IctOutcome::missed);
  REQUIRE(r1.followup);
  CHECK(r1.followup->follows == p->prompt_id);
  CHECK_FALSE(r1.intervention);
  auto r2 = ict.resolve(362, 0.0, OutcomeSignal::deadline_passed());
  REQUIRE(r2.intervention);
  CHECK_FALSE(r2.intervention->pull_over);
  CHECK_FALSE(r2.followup);

  ict.tick(2000, 0.0, false, rng);
  ict.resolve(2031, 0.0, OutcomeSignal::deadline_passed());
  auto r4 = ict.resolve(2062, 0.0, OutcomeSignal::deadline_passed());
  REQUIRE(r4.intervention);
  CHECK(r4.intervention->pull_over);

  ict.begin_shift(5000, 0.0);
  CHECK(ict.state().interventions_this_shift == 0);
}

TEST_CASE("a completed follow-up or a voided prompt never intervenes") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  ict.tick(300, 0.0, false, rng);
  ict.resolve(331, 0.0, OutcomeSignal::deadline_passed());
  auto ok = ict.resolve(340, 0.0, OutcomeSignal::responded(5.0));
  CHECK_FALSE(ok.intervention);
  CHECK(ok.record.response_latency_s == 5.0);

  ict.tick(700, 0.0, false, rng);
  ict.resolve(731, 0.0, OutcomeSignal::deadline_passed());
  auto v = ict.record_interactivity(735, 0.0, true);
  REQUIRE(v);
  CHECK(v->outcome == IctOutcome::voided_by_demand);
  CHECK_FALSE(ict.state().pending);
}

TEST_CASE("resolution preconditions") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  CHECK_THROWS_AS(ict.resolve(0, 0.0, OutcomeSignal::responded(1.0)), frm::ValidationError);
  ict.tick(300, 0.0, false, rng);
  CHECK_THROWS_AS(ict.resolve(320, 0.0, OutcomeSignal::deadline_passed()), frm::ValidationError);
  CHECK_THROWS_AS(ict.resolve(320, 0.0, OutcomeSignal::responded(31.0)), frm::ValidationError);
  CHECK_THROWS_AS(ict.begin_shift(400, 0.0), frm::ValidationError);
  CHECK_FALSE(ict.record_interactivity(400, 10.0));  // no demand: prompt survives
  CHECK(ict.state().pending);
  CHECK_THROWS_AS(ict.record_interactivity(399, 10.0), frm::ValidationError);
  CHECK_THROWS_AS(ict.record_interactivity(401, 9.0), frm::ValidationError);
}

TEST_CASE("adaptation shortens the interval on misses and recovers") {
  IctScheduler ict(no_jitter());
  Rng rng(1);
  Timestamp t = 0;
  for (int i = 0; i < 3; ++i) {
    t += 400;
    ict.tick(t, 0.0, false, rng);
    t += 40;
    auto r = ict.resolve(t, 0.0, OutcomeSignal::deadline_passed());
    if (r.followup) ict.resolve(t, 0.0, OutcomeSignal::responded(2.0));
  }
  ict.adapt();
  CHECK(ict.state().frequency_multiplier == 0.5);
  ict.adapt();
  ict.adapt();
  CHECK(ict.state().frequency_multiplier == 0.25);  // floor
  for (int i = 0; i < 10; ++i) {
    t += 400;
    ict.tick(t, 0.0, false, rng);
    ict.resolve(t + 1, 0.0, OutcomeSignal::responded(1.0));
  }
  ict.adapt();
  CHECK(ict.state().frequency_multiplier == doctest::Approx(0.625));
}

TEST_CASE("randomized sequences: intervention iff a follow-up deadline passes") {
  frm::testing::IctFuzzStats st;
  for (std::uint64_t s = 1; s <= 2000; ++s) frm::testing::ict_fuzz_one(s, st);
  INFO(st.first_failure);
  CHECK(st.failures == 0);
  CHECK(st.interventions == st.followup_misses);
  CHECK(st.interventions > 0);
  CHECK(st.voided > 0);
}

TEST_CASE("SA scoring table") {
  SaConfig cfg;
  struct Case {
    TransitionCause cause;
    double speed;
    bool before, after, emergency;
  };
  const Case cases[] = {
      {TransitionCause::pedal, 20, false, false, false},
      {TransitionCause::pedal, 10, true, false, false},
      {TransitionCause::pedal, 10, false, true, false},
      {TransitionCause::steering, 20, false, false, false},
      {TransitionCause::brake, 10, false, false, false},
      {TransitionCause::button, 20, false, false, false},
      {TransitionCause::button, 10, true, true, false},
      {TransitionCause::pedal, 20, false, false, true},
  };
  for (const auto& c : cases) {
    SaDecisionInput in{c.cause, c.speed, c.before, c.after, c.emergency};
    const auto d = sa_evaluate(in, cfg);
    const double want_score = c.cause == TransitionCause::pedal ? 0.5
                              : c.cause == TransitionCause::button ? 0.1
                                                                   : 0.35;
    const double s = want_score + (c.before ? 0 : 0.2) + (c.after ? 0 : 0.2) + (c.speed > 15 ? 0.1 : 0);
    CHECK(d.rationale_score == doctest::Approx(std::min(s, 1.0)));
    const SaAction expect = c.emergency ? SaAction::suppress_emergency
                            : s >= cfg.threshold ? SaAction::issue
                                                 : SaAction::none;
    CHECK(d.action == expect);
  }
}

TEST_CASE("SA tracker resolves each alert once") {
  SaTracker sa;
  SaDecision d{SaAction::issue, 5.0, 0.9};
  auto a = sa.issue(d, 100);
  CHECK(a.issued_at == 105);
  CHECK(sa.open_count() == 1);
  CHECK(sa.resolve(a.sa_id, 3.0) == SaResolution::cleared);
  CHECK_THROWS_AS(sa.resolve(a.sa_id, 3.0), frm::ValidationError);
  auto b = sa.issue(d, 200);
  CHECK(sa.resolve(b.sa_id, std::nullopt) == SaResolution::support_alerted);
  CHECK_THROWS_AS(sa.issue({SaAction::none, 0, 0}, 300), frm::ValidationError);
  CHECK(transition_cause_from_string("brake") == TransitionCause::brake);
  CHECK_THROWS_AS(transition_cause_from_string("horn"), frm::ValidationError);
}
