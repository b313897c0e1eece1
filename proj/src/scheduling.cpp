#include "frm/scheduling.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "frm/error.hpp"

namespace frm::scheduling {

namespace {

Timestamp abs_start(const ShiftSpec& s) {
  return static_cast<Timestamp>(s.day_index) * kMinutesPerDay + s.start_min;
}

Timestamp abs_end(const ShiftSpec& s) { return abs_start(s) + s.duration_min(); }

ShiftSpec make_shift(int day, int start, int length) {
  return ShiftSpec{day, start, (start + length) % kMinutesPerDay, {}};
}

int parse_int(std::string_view s, long line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("expected integer, got '" + std::string(s) + "'", line);
  return v;
}

Direction direction_from_string(std::string_view s, long line) {
  if (s == "forward") return Direction::forward;
  if (s == "backward") return Direction::backward;
  if (s == "none") return Direction::none;
  throw ParseError("unknown direction '" + std::string(s) + "'", line);
}

}  // namespace

int parse_clock(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || text.size() - colon != 3)
    throw ParseError("time must be HH:MM, got '" + std::string(text) + "'");
  int h = 0, m = 0;
  const auto hs = text.substr(0, colon), ms = text.substr(colon + 1);
  const auto r1 = std::from_chars(hs.data(), hs.data() + hs.size(), h);
  const auto r2 = std::from_chars(ms.data(), ms.data() + ms.size(), m);
  if (r1.ec != std::errc() || r1.ptr != hs.data() + hs.size() || r2.ec != std::errc() ||
      r2.ptr != ms.data() + ms.size() || h < 0 || h > 23 || m < 0 || m > 59)
    throw ParseError("time must be HH:MM, got '" + std::string(text) + "'");
  return h * 60 + m;
}

std::string format_clock(int minutes) {
  minutes = ((minutes % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay;
  char buf[6];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
  return buf;
}

int ShiftSpec::duration_min() const {
  return ((end_min - start_min) % kMinutesPerDay + kMinutesPerDay) % kMinutesPerDay;
}

void ShiftSpec::validate() const {
  if (start_min < 0 || start_min >= kMinutesPerDay || end_min < 0 || end_min >= kMinutesPerDay)
    throw ValidationError("shift clock times must lie in [00:00, 24:00)");
  const int d = duration_min();
  if (d <= 0 || d > kMaxShiftMinutes) throw ValidationError("shift duration must lie in (0, 14 h]");
  for (const auto& b : breaks) {
    if (b.offset_min < 0 || b.duration_min <= 0 || b.offset_min + b.duration_min > d)
      throw ValidationError("scheduled breaks must lie within the shift");
  }
}

void RotationConstraints::validate() const {
  if (max_forward_step_per_day <= 0 || min_extended_rest <= 0 || min_inter_shift_rest <= 0)
    throw ValidationError("rotation constraints must be positive");
}

RotationPlan plan_rotation(int current, int target, const RotationConstraints& c, int length) {
  c.validate();
  const ShiftSpec first = make_shift(0, current, length);
  first.validate();
  make_shift(0, target, length).validate();

  RotationPlan plan;
  plan.shifts.push_back(first);
  if (target > current) {
    int start = current, day = 0;
    while (start < target) {
      const int step = std::min(c.max_forward_step_per_day, target - start);
      start += step;
      plan.shifts.push_back(make_shift(++day, start, length));
      plan.transitions.push_back({Direction::forward, step, 0});
    }
  } else if (target < current) {
    // First day whose target start leaves the required time off.
    const Timestamp needed = abs_end(first) + c.min_extended_rest - target;
    const int day = static_cast<int>((needed + kMinutesPerDay - 1) / kMinutesPerDay);
    plan.shifts.push_back(make_shift(std::max(day, 1), target, length));
    plan.transitions.push_back({Direction::backward, target - current, c.min_extended_rest});
  }
  return plan;
}

RotationPlan direct_transition(int current, int target, int length) {
  RotationPlan plan;
  plan.shifts.push_back(make_shift(0, current, length));
  if (target != current) {
    plan.shifts.push_back(make_shift(1, target, length));
    plan.transitions.push_back(
        {target > current ? Direction::forward : Direction::backward, target - current, 0});
  }
  return plan;
}

std::vector<Violation> validate_rotation(const RotationPlan& plan, const RotationConstraints& c) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < plan.shifts.size(); ++i) {
    try {
      plan.shifts[i].validate();
    } catch (const ValidationError& e) {
      out.push_back({i, "shift", e.what()});
    }
  }
  if (plan.transitions.size() + 1 != plan.shifts.size() && !plan.shifts.empty()) {
    out.push_back({0, "annotation", "transition count does not match shift count"});
    return out;
  }
  for (std::size_t i = 0; i < plan.transitions.size(); ++i) {
    const auto& from = plan.shifts[i];
    const auto& to = plan.shifts[i + 1];
    const auto& note = plan.transitions[i];
    const int step = to.start_min - from.start_min;
    const Timestamp rest = abs_start(to) - abs_end(from);
    const Direction actual =
        step > 0 ? Direction::forward : step < 0 ? Direction::backward : Direction::none;

    if (to.day_index <= from.day_index)
      out.push_back({i, "annotation", "shift days must strictly increase"});
    if (actual != note.direction || step != note.step_min)
      out.push_back({i, "annotation", "annotation does not match the start-time change"});
    if (actual == Direction::forward && step > c.max_forward_step_per_day)
      out.push_back({i, "forward_step",
                     "forward step of " + std::to_string(step) + " min exceeds " +
                         std::to_string(c.max_forward_step_per_day)});
    if (actual == Direction::backward) {
      if (note.extended_rest_min < c.min_extended_rest || rest < note.extended_rest_min)
        out.push_back({i, "backward_rest",
                       "backward move needs " + std::to_string(c.min_extended_rest) +
                           " min of time off; plan grants " + std::to_string(note.extended_rest_min) +
                           " (actual gap " + std::to_string(rest) + ")"});
    }
    if (rest < c.min_inter_shift_rest)
      out.push_back({i, "inter_shift_rest",
                     "rest of " + std::to_string(rest) + " min below " +
                         std::to_string(c.min_inter_shift_rest)});
  }
  return out;
}

std::string export_plan_csv(const RotationPlan& plan) {
  std::ostringstream os;
  os << "day,start,end,direction,step_min,extended_rest_min\n";
  for (std::size_t i = 0; i < plan.shifts.size(); ++i) {
    const auto& s = plan.shifts[i];
    const TransitionAnnotation note = i == 0 ? TransitionAnnotation{} : plan.transitions.at(i - 1);
    os << s.day_index << ',' << format_clock(s.start_min) << ',' << format_clock(s.end_min) << ','
       << to_string(note.direction) << ',' << note.step_min << ',' << note.extended_rest_min << '\n';
  }
  return os.str();
}

RotationPlan import_plan_csv(std::string_view text) {
  RotationPlan plan;
  std::istringstream is{std::string(text)};
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != "day,start,end,direction,step_min,extended_rest_min")
        throw ParseError("unexpected rotation header", lineno);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("expected 6 fields", lineno);
    ShiftSpec s;
    s.day_index = parse_int(cells[0], lineno);
    try {
      s.start_min = parse_clock(cells[1]);
      s.end_min = parse_clock(cells[2]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    const TransitionAnnotation note{direction_from_string(cells[3], lineno),
                                    parse_int(cells[4], lineno), parse_int(cells[5], lineno)};
    if (!plan.shifts.empty()) plan.transitions.push_back(note);
    plan.shifts.push_back(std::move(s));
  }
  if (lineno == 0) throw ParseError("empty rotation file");
  return plan;
}

// ---------------------------------------------------------------------------

void InvitedBreakPolicy::validate() const {
  if (kss_threshold < 1 || kss_threshold > 9) throw ValidationError("kss_threshold must lie in 1..9");
  if (rater_level_threshold < 1 || rater_level_threshold > 5)
    throw ValidationError("rater_level_threshold must lie in 1..5");
  if (!(ict_miss_rate_threshold > 0.0 && ict_miss_rate_threshold <= 1.0))
    throw ValidationError("ict_miss_rate_threshold must lie in (0,1]");
  if (cooldown_s < 0 || duration_s <= 0) throw ValidationError("break timings must be positive");
  if (!(acceptance_probability >= 0.0 && acceptance_probability <= 1.0))
    throw ValidationError("acceptance_probability must lie in [0,1]");
}

std::vector<BreakReason> break_triggers(const BreakSignalBundle& s, const InvitedBreakPolicy& p) {
  std::vector<BreakReason> fired;
  if (s.latest_pfs_kss && *s.latest_pfs_kss >= p.kss_threshold) fired.push_back(BreakReason::self_report);
  if (s.rater_level_recent && *s.rater_level_recent >= p.rater_level_threshold)
    fired.push_back(BreakReason::rater_validated);
  if (s.dms_flag_recent) fired.push_back(BreakReason::dms_confirmed);
  if (s.ict_miss_rate_window >= p.ict_miss_rate_threshold) fired.push_back(BreakReason::ict_performance);
  return fired;
}

std::optional<InvitedBreak> InvitedBreakGate::evaluate(const BreakSignalBundle& signals,
                                                       const InvitedBreakPolicy& policy,
                                                       Timestamp now) {
  auto reasons = break_triggers(signals, policy);
  if (reasons.empty()) return std::nullopt;
  if (last_ && now - *last_ < policy.cooldown_s) return std::nullopt;
  last_ = now;
  return InvitedBreak{now, std::move(reasons), policy.duration_s};
}

BreakEvent BreakLedger::request_impromptu(const DutyStatus& duty, Timestamp now, int duration_s) {
  return record(duty, now, BreakInitiator::self, duration_s);
}

BreakEvent BreakLedger::record(const DutyStatus& duty, Timestamp now, BreakInitiator initiator,
                               int duration_s) {
  if (!duty.on_shift) throw ValidationError("specialist " + duty.specialist_id + " is not on shift");
  if (duration_s <= 0) throw ValidationError("break duration must be positive");
  return BreakEvent{next_id_++, duty.specialist_id, now, initiator, duration_s};
}

AssignmentChange reassign_auxiliary(DutyStatus& duty, std::string reason) {
  if (duty.assignment == Assignment::auxiliary)
    throw ValidationError("specialist " + duty.specialist_id + " is already on auxiliary tasks");
  if (duty.assignment != Assignment::driving)
    throw ValidationError("specialist " + duty.specialist_id + " has no driving assignment");
  AssignmentChange change{duty.specialist_id, duty.assignment, Assignment::auxiliary,
                          std::move(reason), true};
  duty.assignment = Assignment::auxiliary;
  return change;
}

// ---------------------------------------------------------------------------

void LifecyclePolicy::validate() const {
  if (severe_threshold < 1 || any_threshold < 1 || window_s <= 0)
    throw ValidationError("lifecycle thresholds must be positive");
}

FatigueEventCounts SpecialistLifecycle::counts(Timestamp now, const LifecyclePolicy& p) const {
  FatigueEventCounts c;
  for (const auto& [t, severe] : fatigue_events) {
    if (now - t >= p.window_s) continue;
    ++c.frequent;
    if (severe) ++c.severe;
  }
  return c;
}

bool SpecialistLifecycle::may_drive() const {
  return stage == Stage::trainee || stage == Stage::dual_qualified ||
         stage == Stage::single_qualified;
}

SpecialistLifecycle lifecycle_step(SpecialistLifecycle lc, const LifecycleEvent& ev,
                                   const LifecyclePolicy& policy) {
  auto invalid = [&] {
    return ValidationError(std::string(to_string(ev.kind)) + " is not valid in stage " +
                           std::string(to_string(lc.stage)));
  };
  switch (ev.kind) {
    case LifecycleEventKind::training_complete:
      if (lc.stage != Stage::trainee) throw invalid();
      lc.stage = Stage::dual_qualified;
      break;
    case LifecycleEventKind::gateway_passed:
      if (lc.stage != Stage::dual_qualified) throw invalid();
      lc.stage = Stage::single_qualified;
      break;
    case LifecycleEventKind::fatigue_event: {
      if (!lc.may_drive()) throw invalid();
      lc.fatigue_events.emplace_back(ev.t, ev.severe);
      while (!lc.fatigue_events.empty() && ev.t - lc.fatigue_events.front().first >= policy.window_s)
        lc.fatigue_events.pop_front();
      const auto c = lc.counts(ev.t, policy);
      if (c.severe >= policy.severe_threshold || c.frequent >= policy.any_threshold) {
        lc.return_stage = lc.stage;
        lc.stage = Stage::retraining;
        lc.fatigue_events.clear();
      }
      break;
    }
    case LifecycleEventKind::supportive_actions_exhausted:
      if (lc.stage == Stage::suspended) throw invalid();
      lc.stage = Stage::suspended;
      lc.return_stage.reset();
      break;
    case LifecycleEventKind::retraining_complete:
      if (lc.stage != Stage::retraining || !lc.return_stage) throw invalid();
      lc.stage = *lc.return_stage;
      lc.return_stage.reset();
      break;
  }
  return lc;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::none: return "none";
  }
  return "none";
}

std::string_view to_string(BreakReason r) {
  switch (r) {
    case BreakReason::self_report: return "self_report";
    case BreakReason::rater_validated: return "rater_validated";
    case BreakReason::dms_confirmed: return "dms_confirmed";
    case BreakReason::ict_performance: return "ict_performance";
  }
  return "self_report";
}

std::string_view to_string(Assignment a) {
  switch (a) {
    case Assignment::none: return "none";
    case Assignment::driving: return "driving";
    case Assignment::auxiliary: return "auxiliary";
  }
  return "none";
}

std::string_view to_string(BreakInitiator i) {
  switch (i) {
    case BreakInitiator::self: return "self";
    case BreakInitiator::invited: return "invited";
    case BreakInitiator::scheduled: return "scheduled";
  }
  return "self";
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::trainee: return "trainee";
    case Stage::dual_qualified: return "dual_qualified";
    case Stage::single_qualified: return "single_qualified";
    case Stage::retraining: return "retraining";
    case Stage::suspended: return "suspended";
  }
  return "trainee";
}

std::string_view to_string(LifecycleEventKind k) {
  switch (k) {
    case LifecycleEventKind::training_complete: return "training_complete";
    case LifecycleEventKind::gateway_passed: return "gateway_passed";
    case LifecycleEventKind::fatigue_event: return "fatigue_event";
    case LifecycleEventKind::supportive_actions_exhausted: return "supportive_actions_exhausted";
    case LifecycleEventKind::retraining_complete: return "retraining_complete";
  }
  return "fatigue_event";
}

Stage stage_from_string(std::string_view s) {
  for (auto st : {Stage::trainee, Stage::dual_qualified, Stage::single_qualified, Stage::retraining,
                  Stage::suspended}) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown lifecycle stage: " + std::string(s));
}

LifecycleEventKind lifecycle_event_from_string(std::string_view s) {
  for (auto k : {LifecycleEventKind::training_complete, LifecycleEventKind::gateway_passed,
                 LifecycleEventKind::fatigue_event, LifecycleEventKind::supportive_actions_exhausted,
                 LifecycleEventKind::retraining_complete}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown lifecycle event: " + std::string(s));
}

}  // namespace frm::scheduling
