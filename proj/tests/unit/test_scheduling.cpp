#include <doctest.h>

#include "frm/error.hpp"
#include "frm/rng.hpp"
#include "frm/scheduling.hpp"

using namespace frm::scheduling;

TEST_CASE("clock parsing") {
  CHECK(parse_clock("08:00") == 480);
  CHECK(parse_clock("23:59") == 1439);
  CHECK(parse_clock("0:05") == 5);
  for (const char* bad : {"24:00", "12:60", "1200", "12:0", ":30", "ab:cd", "12:30x", ""})
    CHECK_THROWS_AS(parse_clock(bad), frm::ParseError);
  CHECK(format_clock(1440 + 75) == "01:15");
  CHECK(format_clock(-60) == "23:00");
}

TEST_CASE("shift duration wraps midnight and is bounded") {
  ShiftSpec s{0, 16 * 60, 0, {}};
  CHECK(s.duration_min() == 480);
  CHECK_NOTHROW(s.validate());
  s.breaks = {{470, 20}};
  CHECK_THROWS_AS(s.validate(), frm::ValidationError);
  ShiftSpec longest{0, 0, 14 * 60 + 1, {}};
  CHECK_THROWS_AS(longest.validate(), frm::ValidationError);
  ShiftSpec empty{0, 60, 60, {}};
  CHECK_THROWS_AS(empty.validate(), frm::ValidationError);
}

TEST_CASE("forward rotation steps at most the daily maximum") {
  RotationConstraints c;
  const auto plan = plan_rotation(parse_clock("08:00"), parse_clock("12:00"), c);
  REQUIRE(plan.shifts.size() == 3);
  REQUIRE(plan.transitions.size() == 2);
  for (const auto& t : plan.transitions) {
    CHECK(t.direction == Direction::forward);
    CHECK(t.step_min == 120);
  }
  CHECK(plan.shifts[1].day_index == 1);
  CHECK(plan.shifts[2].day_index == 2);
  CHECK(plan.shifts[2].start_min == 720);
  CHECK(validate_rotation(plan, c).empty());

  const auto odd = plan_rotation(parse_clock("08:00"), parse_clock("13:30"), c);
  CHECK(odd.transitions.size() == 3);
  CHECK(odd.transitions.back().step_min == 90);
  CHECK(validate_rotation(odd, c).empty());
}

TEST_CASE("forward plans are valid across many targets and step sizes") {
  frm::Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    RotationConstraints c;
    c.max_forward_step_per_day = 30 + int(rng.below(240));
    const int from = int(rng.below(1440));
    const int to = int(rng.below(1440));
    const auto plan = plan_rotation(from, to, c);
    CHECK(validate_rotation(plan, c).empty());
    CHECK(plan.shifts.back().start_min == to);
  }
}

TEST_CASE("backward rotation needs the extended rest") {
  RotationConstraints c;
  const auto plan = plan_rotation(parse_clock("08:00"), parse_clock("05:00"), c);
  REQUIRE(plan.transitions.size() == 1);
  CHECK(plan.transitions[0].direction == Direction::backward);
  CHECK(plan.transitions[0].extended_rest_min == c.min_extended_rest);
  CHECK(validate_rotation(plan, c).empty());
  // shift ends 16:00 day 0; 48 h later is 16:00 day 2, so 05:00 lands on day 3
  CHECK(plan.shifts[1].day_index == 3);

  const auto direct = direct_transition(parse_clock("08:00"), parse_clock("05:00"));
  const auto v = validate_rotation(direct, c);
  REQUIRE_FALSE(v.empty());
  CHECK(v[0].kind == "backward_rest");
}

TEST_CASE("validator flags oversize forward steps and short rests") {
  RotationConstraints c;
  auto jump = direct_transition(parse_clock("08:00"), parse_clock("14:00"));
  auto v = validate_rotation(jump, c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == "forward_step");

  RotationPlan tight;
  tight.shifts = {{0, 14 * 60, 22 * 60, {}}, {1, 16 * 60, 0, {}}};
  tight.transitions = {{Direction::forward, 120, 0}};
  CHECK(validate_rotation(tight, c).empty());
  tight.shifts[1] = {1, 6 * 60, 14 * 60, {}};
  tight.transitions = {{Direction::backward, -480, 2880}};
  bool short_rest = false;
  for (const auto& x : validate_rotation(tight, c)) short_rest |= x.kind == "inter_shift_rest";
  CHECK(short_rest);

  RotationPlan mislabelled = plan_rotation(480, 720, c);
  mislabelled.transitions[0].step_min = 60;
  CHECK(validate_rotation(mislabelled, c)[0].kind == "annotation");
}

TEST_CASE("rotation CSV round trip and parse errors carry line numbers") {
  RotationConstraints c;
  const auto plan = plan_rotation(parse_clock("08:00"), parse_clock("12:00"), c);
  const auto text = export_plan_csv(plan);
  CHECK(text ==
        "day,start,end,direction,step_min,extended_rest_min\n"
        "0,08:00,16:00,none,0,0\n"
        "1,10:00,18:00,forward,120,0\n"
        "2,12:00,20:00,forward,120,0\n");
  const auto back = import_plan_csv(text);
  CHECK(export_plan_csv(back) == text);
  CHECK(validate_rotation(back, c).empty());

  try {
    import_plan_csv("day,start,end,direction,step_min,extended_rest_min\n0,08:00,16:00,none,0,0\n1,25:00,x,up,1,0\n");
    FAIL("expected a parse error");
  } catch (const frm::ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(import_plan_csv("bad header\n"), frm::ParseError);
  CHECK_THROWS_AS(import_plan_csv(""), frm::ParseError);
}

TEST_CASE("invited break triggers and cool-down") {
  InvitedBreakPolicy p;
  BreakSignalBundle none;
  CHECK(break_triggers(none, p).empty());
  BreakSignalBundle all{7, true, 4, 0.5};
  CHECK(break_triggers(all, p) == std::vector<BreakReason>{BreakReason::self_report,
                                                           BreakReason::rater_validated,
                                                           BreakReason::dms_confirmed,
                                                           BreakReason::ict_performance});
  BreakSignalBundle low{5, false, 3, 0.29};
  CHECK(break_triggers(low, p).empty());

  InvitedBreakGate gate;
  CHECK(gate.evaluate(all, p, 0));
  CHECK_FALSE(gate.evaluate(all, p, p.cooldown_s - 1));
  CHECK(gate.evaluate(all, p, p.cooldown_s));
  CHECK_FALSE(gate.evaluate(none, p, 10 * p.cooldown_s));
}

TEST_CASE("impromptu breaks are always granted on shift") {
  BreakLedger ledger;
  DutyStatus duty{"S1", true, Assignment::driving};
  auto a = ledger.request_impromptu(duty, 10, 600);
  auto b = ledger.request_impromptu(duty, 11, 600);
  CHECK(a.initiator == BreakInitiator::self);
  CHECK(b.break_id == a.break_id + 1);
  duty.on_shift = false;
  CHECK_THROWS_AS(ledger.request_impromptu(duty, 12, 600), frm::ValidationError);
}

TEST_CASE("auxiliary reassignment") {
  DutyStatus duty{"S1", true, Assignment::driving};
  const auto ch = reassign_auxiliary(duty, "invited_break_declined");
  CHECK(ch.to == Assignment::auxiliary);
  CHECK(ch.vehicle_restaffed);
  CHECK(duty.assignment == Assignment::auxiliary);
  CHECK_THROWS_AS(reassign_auxiliary(duty, "again"), frm::ValidationError);
}

TEST_CASE("lifecycle progression and retraining") {
  LifecyclePolicy p;
  SpecialistLifecycle lc;
  CHECK_THROWS_AS(lifecycle_step(lc, {LifecycleEventKind::gateway_passed, 0}, p),
                  frm::ValidationError);
  lc = lifecycle_step(lc, {LifecycleEventKind::training_complete, 0}, p);
  CHECK(lc.stage == Stage::dual_qualified);
  lc = lifecycle_step(lc, {LifecycleEventKind::gateway_passed, 1}, p);
  CHECK(lc.stage == Stage::single_qualified);

  auto severe = lc;
  for (int i = 0; i < 2; ++i) severe = lifecycle_step(severe, {LifecycleEventKind::fatigue_event, i, true}, p);
  CHECK(severe.stage == Stage::single_qualified);
  severe = lifecycle_step(severe, {LifecycleEventKind::fatigue_event, 2, true}, p);
  CHECK(severe.stage == Stage::retraining);
  CHECK_FALSE(severe.may_drive());
  severe = lifecycle_step(severe, {LifecycleEventKind::retraining_complete, 3}, p);
  CHECK(severe.stage == Stage::single_qualified);

  // Old events fall out of the window.
  auto spaced = lc;
  for (int i = 0; i < 10; ++i)
    spaced = lifecycle_step(spaced, {LifecycleEventKind::fatigue_event, i * p.window_s / 4, false}, p);
  CHECK(spaced.stage == Stage::single_qualified);
  auto dense = lc;
  for (int i = 0; i < 6; ++i) dense = lifecycle_step(dense, {LifecycleEventKind::fatigue_event, i, false}, p);
  CHECK(dense.stage == Stage::retraining);

  auto out = lifecycle_step(lc, {LifecycleEventKind::supportive_actions_exhausted, 9}, p);
  CHECK(out.stage == Stage::suspended);
  CHECK_THROWS_AS(lifecycle_step(out, {LifecycleEventKind::fatigue_event, 10}, p), frm::ValidationError);
  CHECK(stage_from_string(to_string(Stage::retraining)) == Stage::retraining);
}
