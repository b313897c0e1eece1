#include "frm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <utility>

#include "frm/awareness.hpp"
#include "frm/engagement.hpp"
#include "frm/error.hpp"
#include "frm/fatigue_model.hpp"
#include "frm/rng.hpp"
#include "frm/scheduling.hpp"
#include "frm/vigilance.hpp"

namespace frm::sim {

namespace {

using nlohmann::json;
using Timestamp = std::int64_t;
namespace eng = engagement;
namespace vig = vigilance;
namespace sch = scheduling;
namespace aw = awareness;

constexpr Timestamp kDay = 86400;
constexpr Timestamp kTicketAssessAfter = 3600;
constexpr Timestamp kTicketResolveAfter = kDay;

enum class Activity { off_duty, driving, on_break, auxiliary, stood_down, training };

const char* to_string(Activity a) {
  switch (a) {
    case Activity::off_duty: return "off_duty";
    case Activity::driving: return "driving";
    case Activity::on_break: return "on_break";
    case Activity::auxiliary: return "auxiliary";
    case Activity::stood_down: return "stood_down";
    case Activity::training: return "training";
  }
  return "off_duty";
}

struct ShiftWindow {
  Timestamp start = 0;
  Timestamp end = 0;
  int index = 0;
  std::vector<std::pair<Timestamp, int>> breaks;  // absolute start, seconds
};

struct Agent {
  const SpecialistDef* def = nullptr;
  fatigue::ModelParams params;
  fatigue::AlertnessState state;
  Timestamp state_t = 0;
  std::vector<ShiftWindow> shifts;
  std::vector<std::pair<Timestamp, Timestamp>> sleeps;
  std::size_t next_shift = 0;
  std::optional<std::size_t> current;

  Activity activity = Activity::off_duty;
  Activity resume = Activity::driving;
  Timestamp session_start = 0;
  int ord = 1;
  bool episode = false;
  double odometer = 0.0;
  bool demand_high = false;
  Timestamp demand_until = 0;

  eng::IctScheduler ict;
  bool ict_started = false;
  std::optional<std::uint64_t> open_case;

  Timestamp break_until = 0;
  std::uint64_t break_id = 0;

  Timestamp next_pfs = 0;
  std::optional<std::uint64_t> pfs_followup_of;
  std::optional<Timestamp> pfs_followup_at;
  std::optional<std::pair<Timestamp, int>> latest_pfs;
  int shift_max_kss = 0;

  std::optional<Timestamp> dms_confirmed_at;
  std::optional<std::pair<Timestamp, int>> rater_level;
  sch::InvitedBreakGate gate;
  int declines = 0;

  sch::SpecialistLifecycle lc;
  Timestamp retraining_until = 0;
  sch::DutyStatus duty;

  const std::string& id() const { return def->id; }
};

class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& cfg)
      : cfg_(cfg),
        on_(cfg.toggles),
        rng_(cfg.seed),
        log_(config_hash(cfg), cfg.seed),
        dms_(cfg.vigilance.dms),
        desk_(cfg.vigilance.escalation),
        sa_(cfg.sa),
        pfs_(cfg.pfs),
        horizon_(Timestamp(cfg.horizon_days) * kDay) {
    for (const auto& def : cfg.fleet) agents_.push_back(make_agent(def));
  }

  RunResult run();

 private:
  Agent make_agent(const SpecialistDef& def);
  void schedule(Timestamp t, std::function<void(Timestamp)> fn);
  void run_due(Timestamp t);
  Timestamp next_wakeup(Timestamp t) const;

  void advance_to(Agent& a, Timestamp t);
  fatigue::FatigueContext context(const Agent& a) const;
  void relieve(Agent& a, double fraction);

  void qualify_raters();
  void day_start(Timestamp t);
  void reliability(Timestamp t);

  void start_shift(Agent& a, Timestamp t);
  void end_shift(Agent& a, Timestamp t);
  void tick(Agent& a, Timestamp t);
  void drive(Agent& a, Timestamp t, const ShiftWindow& sh);

  void log_task_state(Agent& a, Timestamp t, bool on_task);
  void begin_driving(Agent& a, Timestamp t);
  void stop_driving(Agent& a, Timestamp t);
  bool start_break(Agent& a, Timestamp t, sch::BreakInitiator who, const std::string& reason,
                   int duration_s);
  void end_break(Agent& a, Timestamp t);
  void stand_down(Agent& a, Timestamp t, const std::string& reason);

  void on_prompt(std::size_t ai, Timestamp t, const eng::IctPrompt& p);
  void log_ict_resolution(std::size_t ai, Timestamp t, const eng::IctResolution& res);
  void transition(std::size_t ai, Timestamp t);

  void dms_observe(std::size_t ai, Timestamp t);
  void periodic_rating(std::size_t ai, Timestamp t);
  void open_case(std::size_t ai, Timestamp t, vig::EscalationCase c);
  void resolve_case(std::size_t ai, Timestamp t, const vig::EscalationCase& c);

  void invited_break_check(Agent& a, Timestamp t);
  void pfs_survey(Agent& a, Timestamp t, bool followup);
  void open_ticket(aw::Channel channel, std::string payload, bool anonymous,
                   std::optional<std::string> sid, Timestamp t);
  void lifecycle(Agent& a, Timestamp t, sch::LifecycleEventKind kind, bool severe = false);
  void fatigue_event(Agent& a, Timestamp t, bool severe);

  std::size_t index_of(const Agent& a) const { return std::size_t(&a - agents_.data()); }
  void emit(Timestamp t, const char* type, const std::string& sid, json data = json::object()) {
    log_.append(t, type, sid, std::move(data));
  }

  const ScenarioConfig& cfg_;
  Toggles on_;
  Rng rng_;
  EventLog log_;
  std::vector<Agent> agents_;
  std::map<std::pair<Timestamp, std::uint64_t>, std::function<void(Timestamp)>> queue_;
  std::uint64_t seq_ = 0;

  vig::DmsMonitor dms_;
  vig::EscalationDesk desk_;
  vig::TaskIdSource task_ids_;
  std::vector<vig::RaterProfile> pool_;
  std::vector<vig::OrdRating> history_;
  std::size_t reliability_from_ = 0;
  eng::SaTracker sa_;
  aw::PfsLedger pfs_;
  aw::ConcernLedger concerns_;
  sch::BreakLedger breaks_;
  Timestamp horizon_;
};

Agent Simulation::make_agent(const SpecialistDef& def) {
  Agent a;
  a.def = &def;
  a.params = specialist_params(cfg_.model, def);
  a.state = fatigue::make_state(a.params.homeostat_floor, 0.0, 0.0, a.params);
  a.ict = eng::IctScheduler(cfg_.ict);
  a.lc.stage = def.stage;
  a.duty.specialist_id = def.id;

  const ShiftPlanDef& plan = cfg_.shift_plans.at(def.shift_plan);
  Timestamp busy_until = 0;
  const Timestamp wake_offset = Timestamp(std::llround(def.wake_hours_before_shift * 3600.0));
  constexpr double kMinSleepH = 3.0;
  for (int d = 0; d <= cfg_.horizon_days; ++d) {
    const sch::ShiftSpec* spec = nullptr;
    for (const auto& s : plan.shifts) {
      if (s.day_index == d % plan.cycle_days) spec = &s;
    }
    Timestamp wake = Timestamp(d) * kDay + 7 * 3600;
    std::optional<Timestamp> shift_end;
    if (spec) {
      ShiftWindow w;
      w.start = Timestamp(d) * kDay + Timestamp(spec->start_min) * 60;
      w.end = w.start + Timestamp(spec->duration_min()) * 60;
      w.index = int(a.shifts.size());
      for (const auto& b : spec->breaks)
        w.breaks.emplace_back(w.start + Timestamp(b.offset_min) * 60, b.duration_min * 60);
      wake = w.start - wake_offset;
      shift_end = w.end;
      if (w.start < horizon_) a.shifts.push_back(std::move(w));
    }
    const double hours = std::max(kMinSleepH, rng_.normal(def.sleep_hours, cfg_.behavior.sleep_jitter_h));
    const Timestamp sleep_len = Timestamp(std::llround(hours * 3600.0));
    // Before the first wake-up the specialist is asleep.
    Timestamp sleep_start = d == 0 ? std::min<Timestamp>(0, wake - sleep_len) : wake - sleep_len;
    sleep_start = std::max(sleep_start, busy_until);
    if (sleep_start < wake) a.sleeps.emplace_back(sleep_start, wake);
    busy_until = std::max(wake, shift_end.value_or(wake));
  }
  return a;
}

void Simulation::schedule(Timestamp t, std::function<void(Timestamp)> fn) {
  queue_.emplace(std::make_pair(t, seq_++), std::move(fn));
}

void Simulation::run_due(Timestamp t) {
  while (!queue_.empty() && queue_.begin()->first.first <= t) {
    auto node = queue_.extract(queue_.begin());
    node.mapped()(node.key().first);
  }
}

Timestamp Simulation::next_wakeup(Timestamp t) const {
  Timestamp next = std::min(horizon_, (t / kDay + 1) * kDay);
  if (on_.vigilance) {
    const Timestamp r = cfg_.vigilance.reliability_interval_s;
    next = std::min(next, (t / r + 1) * r);
  }
  if (!queue_.empty()) next = std::min(next, queue_.begin()->first.first);
  for (const auto& a : agents_) {
    if (a.next_shift < a.shifts.size()) next = std::min(next, a.shifts[a.next_shift].start);
  }
  return std::max(next, t + 1);
}

void Simulation::advance_to(Agent& a, Timestamp t) {
  while (a.state_t < t) {
    bool asleep = false;
    Timestamp seg_end = t;
    for (const auto& [s, e] : a.sleeps) {
      if (e <= a.state_t) continue;
      if (s <= a.state_t) {
        asleep = true;
        seg_end = std::min(t, e);
      } else {
        seg_end = std::min(t, s);
      }
      break;
    }
    fatigue::FatigueContext ctx;
    ctx.asleep = asleep;
    a.state = fatigue::step_alertness(a.state, double(seg_end - a.state_t), ctx, a.params);
    a.state_t = seg_end;
  }
}

fatigue::FatigueContext Simulation::context(const Agent& a) const {
  fatigue::FatigueContext ctx;
  switch (a.activity) {
    case Activity::driving:
      ctx.on_task = true;
      ctx.monotony = cfg_.behavior.driving_monotony;
      break;
    case Activity::on_break:
      ctx.in_break = true;
      // Awareness education supplies the activity tips used during breaks.
      ctx.break_activity = on_.awareness ? fatigue::BreakActivity::physical
                                         : fatigue::BreakActivity::rest;
      break;
    default:
      break;
  }
  return ctx;
}

void Simulation::relieve(Agent& a, double fraction) {
  a.state = fatigue::make_state(a.state.homeostatic_pressure, a.state.circadian_phase,
                                a.state.task_load * (1.0 - fraction), a.params);
}

RunResult Simulation::run() {
  if (horizon_ == 0) return {std::move(log_), Metrics{}};
  if (on_.vigilance) qualify_raters();

  Timestamp t = 0;
  while (t < horizon_) {
    if (t % kDay == 0) day_start(t);
    if (on_.vigilance && t > 0 && t % cfg_.vigilance.reliability_interval_s == 0) reliability(t);
    run_due(t);
    bool busy = false;
    for (auto& a : agents_) {
      if (a.current && t >= a.shifts[*a.current].end) end_shift(a, t);
      if (!a.current && a.next_shift < a.shifts.size() && a.shifts[a.next_shift].start <= t)
        start_shift(a, t);
      if (a.current) {
        tick(a, t);
        busy = true;
      }
    }
    t = busy ? t + 1 : next_wakeup(t);
  }
  for (auto& a : agents_) {
    if (a.current) end_shift(a, horizon_);
  }
  // Terminal records still in flight (ratings, SA resolutions, tickets) land
  // after the horizon so every opened item is closed.
  run_due(INT64_MAX);

  RunResult out;
  out.metrics = compute_metrics(log_);
  out.log = std::move(log_);
  return out;
}

void Simulation::qualify_raters() {
  const auto vetted = vig::default_vetted_test_set();
  constexpr int kAttempts = 3;
  for (const auto& r : cfg_.raters) {
    for (int attempt = 1; attempt <= kAttempts; ++attempt) {
      const auto q = vig::qualify_rater(r, vetted, cfg_.vigilance.qualification, rng_,
                                        cfg_.vigilance.escalation.emission);
      emit(0, "rater_qualified",
           "", {{"rater", r.rater_id}, {"attempt", attempt}, {"passed", q.passed},
                {"exact_fraction", q.exact_fraction}, {"mean_abs_error", q.mean_abs_error}});
      if (q.passed) {
        vig::RaterProfile p = r;
        p.qualified = true;
        pool_.push_back(p);
        break;
      }
    }
  }
  if (int(pool_.size()) <= cfg_.vigilance.escalation.validation_raters) {
    throw ValidationError("only " + std::to_string(pool_.size()) +
                          " raters qualified; escalation needs more than " +
                          std::to_string(cfg_.vigilance.escalation.validation_raters));
  }
}

void Simulation::day_start(Timestamp t) {
  if (!on_.education) return;
  const int day = int(t / kDay);
  for (auto& a : agents_) {
    if (a.lc.stage == sch::Stage::retraining && t >= a.retraining_until)
      lifecycle(a, t, sch::LifecycleEventKind::retraining_complete);
  }
  for (const auto& e : cfg_.lifecycle_events) {
    if (e.day != day) continue;
    for (auto& a : agents_) {
      if (a.id() == e.specialist) lifecycle(a, t, e.event);
    }
  }
}

void Simulation::reliability(Timestamp t) {
  std::span<const vig::OrdRating> recent(history_.data() + reliability_from_,
                                         history_.size() - reliability_from_);
  try {
    const double kappa = vig::inter_rater_reliability(recent);
    emit(t, "reliability", "", {{"kappa", kappa}, {"ratings", recent.size()}});
  } catch (const ValidationError&) {
    return;  // nothing co-rated in this window
  }
  reliability_from_ = history_.size();
}

void Simulation::start_shift(Agent& a, Timestamp t) {
  advance_to(a, t);
  a.current = a.next_shift++;
  const ShiftWindow& sh = a.shifts[*a.current];
  a.duty = {a.id(), true, sch::Assignment::none};
  a.next_pfs = t + aw::kPfsRecallWindowS;
  a.shift_max_kss = 0;
  a.declines = 0;
  a.ict_started = false;
  a.demand_high = false;

  const bool drive = a.lc.may_drive();
  emit(t, "shift_start", a.id(),
       {{"shift_index", sh.index}, {"end", sh.end}, {"stage", sch::to_string(a.lc.stage)},
        {"assignment", drive ? "driving" : "none"}});
  if (drive) {
    a.duty.assignment = sch::Assignment::driving;
    begin_driving(a, t);
  } else {
    a.activity = a.lc.stage == sch::Stage::retraining ? Activity::training : Activity::stood_down;
  }
}

void Simulation::end_shift(Agent& a, Timestamp t) {
  if (a.activity == Activity::driving) stop_driving(a, t);
  if (a.activity == Activity::on_break) emit(t, "break_end", a.id(), {{"break_id", a.break_id}});
  emit(t, "shift_end", a.id(), {{"shift_index", a.shifts[*a.current].index}});
  if (on_.awareness && a.shift_max_kss >= cfg_.pfs.threshold &&
      rng_.bernoulli(cfg_.behavior.self_concern_probability)) {
    open_ticket(aw::Channel::anonymous_survey, "fatigue concern raised in end-of-shift survey", true,
                std::nullopt, t);
  }
  a.current.reset();
  a.activity = Activity::off_duty;
  a.duty.on_shift = false;
  a.duty.assignment = sch::Assignment::none;
  a.pfs_followup_of.reset();
  a.pfs_followup_at.reset();
  a.demand_high = false;
}

void Simulation::tick(Agent& a, Timestamp t) {
  const ShiftWindow& sh = a.shifts[*a.current];
  for (const auto& [start, dur] : sh.breaks) {
    if (start == t) start_break(a, t, sch::BreakInitiator::scheduled, "scheduled", dur);
  }
  if (a.activity == Activity::on_break && t >= a.break_until) end_break(a, t);
  if (on_.awareness) {
    if (t == a.next_pfs) pfs_survey(a, t, false);
    if (a.pfs_followup_at && t == *a.pfs_followup_at) pfs_survey(a, t, true);
  }
  if (a.activity == Activity::driving) drive(a, t, sh);
  if ((t - sh.start) % cfg_.behavior.state_sample_interval_s == 0) {
    emit(t, "state", a.id(),
         {{"homeostatic", a.state.homeostatic_pressure}, {"task_load", a.state.task_load},
          {"alertness", a.state.alertness}, {"phase", a.state.circadian_phase},
          {"ord", fatigue::to_ord_truth(a.state, a.params)}, {"activity", to_string(a.activity)}});
  }
  a.state = fatigue::step_alertness(a.state, 1.0, context(a), a.params);
  a.state_t = t + 1;
}

void Simulation::drive(Agent& a, Timestamp t, const ShiftWindow& sh) {
  const auto& b = cfg_.behavior;
  const std::size_t ai = index_of(a);
  if (fatigue::to_ord_truth(a.state, a.params) != a.ord) log_task_state(a, t, true);
  a.odometer += b.vehicle_speed_mps;

  if (a.demand_high && t >= a.demand_until) {
    a.demand_high = false;
  } else if (!a.demand_high && rng_.bernoulli(b.demand_high_rate_per_h / 3600.0)) {
    a.demand_high = true;
    a.demand_until = t + b.demand_high_duration_s;
    if (on_.engagement && a.ict.state().pending) {
      log_ict_resolution(ai, t, a.ict.resolve(t, a.odometer, eng::OutcomeSignal::demand_rose()));
    }
  }
  if (rng_.bernoulli(b.interaction_rate_per_min / 60.0 * a.state.alertness) && on_.engagement) {
    if (auto rec = a.ict.record_interactivity(t, a.odometer, a.demand_high))
      log_ict_resolution(ai, t, eng::IctResolution{*rec, std::nullopt, std::nullopt});
  }
  if (on_.engagement) {
    if (auto p = a.ict.tick(t, a.odometer, a.demand_high, rng_)) on_prompt(ai, t, *p);
  }
  if (rng_.bernoulli(b.transition_rate_per_h / 3600.0)) transition(ai, t);

  const Timestamp on_task_s = t - a.session_start;
  if (on_task_s > 0 && on_task_s % 60 == 0) {
    if (rng_.bernoulli(b.incautious.per_minute(a.state)))
      emit(t, "incautious", a.id(), {{"session_minute", on_task_s / 60}});
    if (on_.education && a.state.alertness <= b.self_break_alertness &&
        rng_.bernoulli(b.self_break_probability_per_min)) {
      start_break(a, t, sch::BreakInitiator::self, "self_noticed", cfg_.breaks.impromptu_duration_s);
      return;
    }
  }
  if (a.activity != Activity::driving) return;

  const Timestamp into_shift = t - sh.start;
  if (on_.vigilance) {
    if (into_shift % cfg_.vigilance.dms.observation_period_s == 0) dms_observe(ai, t);
    if (into_shift > 0 && into_shift % cfg_.vigilance.periodic_interval_s == 0 &&
        a.activity == Activity::driving)
      periodic_rating(ai, t);
  }
  if (on_.scheduling && into_shift % 60 == 0 && a.activity == Activity::driving)
    invited_break_check(a, t);
}

void Simulation::log_task_state(Agent& a, Timestamp t, bool on_task) {
  a.ord = fatigue::to_ord_truth(a.state, a.params);
  emit(t, "task_state", a.id(), {{"on_task", on_task}, {"ord", a.ord}});
  const bool high = on_task && a.ord >= 4;
  const bool onset = high && !a.episode;
  if (a.ord < 4) a.episode = false;
  if (high) a.episode = true;
  // A dual-configuration peer notices only occasionally, and adds nothing to detection.
  if (onset && a.def->dual && on_.awareness &&
      rng_.bernoulli(cfg_.behavior.peer_concern_probability)) {
    open_ticket(aw::Channel::supervisor_direct, "peer observed signs of drowsiness", false, a.id(),
                t);
  }
}

void Simulation::begin_driving(Agent& a, Timestamp t) {
  a.activity = Activity::driving;
  a.session_start = t;
  a.demand_high = false;
  log_task_state(a, t, true);
  if (!on_.engagement) return;
  if (!a.ict_started) {
    a.ict.begin_shift(t, a.odometer);
    a.ict_started = true;
  } else {
    a.ict.record_interactivity(t, a.odometer);
  }
}

void Simulation::stop_driving(Agent& a, Timestamp t) {
  // A prompt cannot be answered once the specialist leaves the wheel.
  if (on_.engagement && a.ict.state().pending) {
    log_ict_resolution(index_of(a), t,
                       a.ict.resolve(t, a.odometer, eng::OutcomeSignal::demand_rose()));
  }
  log_task_state(a, t, false);
  a.activity = Activity::stood_down;
}

bool Simulation::start_break(Agent& a, Timestamp t, sch::BreakInitiator who,
                             const std::string& reason, int duration_s) {
  if (a.activity != Activity::driving && a.activity != Activity::auxiliary) return false;
  const auto ev = breaks_.record(a.duty, t, who, duration_s);
  const Activity before = a.activity;
  if (before == Activity::driving) stop_driving(a, t);
  a.resume = before;
  a.activity = Activity::on_break;
  a.break_until = t + duration_s;
  a.break_id = ev.break_id;
  emit(t, "break_start", a.id(),
       {{"break_id", ev.break_id}, {"initiator", sch::to_string(who)}, {"reason", reason},
        {"duration_s", duration_s},
        {"recovery", fatigue::to_string(context(a).break_activity)}});
  return true;
}

void Simulation::end_break(Agent& a, Timestamp t) {
  emit(t, "break_end", a.id(), {{"break_id", a.break_id}});
  if (a.resume == Activity::driving && a.lc.may_drive()) {
    begin_driving(a, t);
  } else {
    a.activity = a.resume == Activity::driving ? Activity::stood_down : a.resume;
  }
  if (a.pfs_followup_of && !a.pfs_followup_at) a.pfs_followup_at = t + cfg_.pfs.followup_due_s;
}

void Simulation::stand_down(Agent& a, Timestamp t, const std::string& reason) {
  const bool driving = a.activity == Activity::driving;
  const bool returning = a.activity == Activity::on_break && a.resume == Activity::driving;
  if (!driving && !returning) return;
  Activity to = Activity::stood_down;
  if (on_.scheduling && a.duty.assignment == sch::Assignment::driving) {
    const auto change = sch::reassign_auxiliary(a.duty, reason);
    emit(t, "assignment", a.id(),
         {{"from", sch::to_string(change.from)}, {"to", sch::to_string(change.to)},
          {"reason", reason}, {"vehicle_restaffed", change.vehicle_restaffed}});
    to = Activity::auxiliary;
  } else {
    emit(t, "stand_down", a.id(), {{"reason", reason}});
  }
  if (driving) {
    stop_driving(a, t);
    a.activity = to;
  } else {
    a.resume = to;
  }
}

void Simulation::on_prompt(std::size_t ai, Timestamp t, const eng::IctPrompt& p) {
  Agent& a = agents_[ai];
  const auto& b = cfg_.behavior;
  emit(t, "ict_prompt", a.id(), eng::to_json(p));
  const double fatigue = 1.0 - a.state.alertness;
  const bool miss = rng_.bernoulli(b.ict_miss_base + b.ict_miss_fatigue_gain * fatigue * fatigue);
  const double latency =
      b.ict_latency_base_s + b.ict_latency_fatigue_s * fatigue + rng_.exponential(1.0);
  const std::uint64_t id = p.prompt_id;
  auto still_pending = [this, ai, id] {
    const auto& pending = agents_[ai].ict.state().pending;
    return pending && pending->prompt_id == id;
  };
  if (!miss && latency <= cfg_.ict.deadline_s) {
    const Timestamp at = t + std::max<Timestamp>(1, Timestamp(std::ceil(latency)));
    schedule(at, [this, ai, latency, still_pending](Timestamp now) {
      if (!still_pending()) return;
      Agent& ag = agents_[ai];
      log_ict_resolution(ai, now,
                         ag.ict.resolve(now, ag.odometer, eng::OutcomeSignal::responded(latency)));
    });
  } else {
    schedule(p.deadline + 1, [this, ai, still_pending](Timestamp now) {
      if (!still_pending()) return;
      Agent& ag = agents_[ai];
      log_ict_resolution(ai, now,
                         ag.ict.resolve(now, ag.odometer, eng::OutcomeSignal::deadline_passed()));
    });
  }
}

void Simulation::log_ict_resolution(std::size_t ai, Timestamp t, const eng::IctResolution& res) {
  Agent& a = agents_[ai];
  emit(t, "ict_record", a.id(), eng::to_json(res.record));
  a.ict.adapt();
  if (res.record.outcome == eng::IctOutcome::completed) relieve(a, cfg_.behavior.ict_relief);
  if (res.followup) on_prompt(ai, t, *res.followup);
  if (res.intervention) {
    emit(t, "ict_intervention", a.id(), eng::to_json(*res.intervention));
    relieve(a, cfg_.behavior.alert_relief);
    fatigue_event(a, t, res.intervention->pull_over);
    if (res.intervention->pull_over) stand_down(a, t, "ict_pull_over");
  }
}

void Simulation::transition(std::size_t ai, Timestamp t) {
  Agent& a = agents_[ai];
  const auto& b = cfg_.behavior;
  eng::SaDecisionInput in;
  const bool unintentional = rng_.bernoulli(b.unintentional_fraction);
  static constexpr eng::TransitionCause kManual[] = {
      eng::TransitionCause::pedal, eng::TransitionCause::steering, eng::TransitionCause::brake};
  in.cause = unintentional ? kManual[rng_.below(3)] : eng::TransitionCause::button;
  in.emergency = rng_.bernoulli(b.emergency_fraction);
  in.speed_mps = b.vehicle_speed_mps * rng_.uniform(0.5, 2.0);
  const double alert = a.state.alertness;
  in.input_before = rng_.bernoulli(unintentional ? 0.3 * alert : 0.95);
  in.input_after = rng_.bernoulli(unintentional ? alert : 0.95);
  const double response =
      b.sa_response_base_s + b.sa_response_fatigue_s * (1.0 - alert) + rng_.exponential(1.0);
  if (!on_.engagement) return;

  const auto decision = eng::sa_evaluate(in, cfg_.sa);
  emit(t, "sa_decision", a.id(),
       {{"cause", eng::to_string(in.cause)}, {"emergency", in.emergency},
        {"score", decision.rationale_score}, {"action", eng::to_string(decision.action)}});
  if (decision.action != eng::SaAction::issue) return;
  const auto issued = sa_.issue(decision, t);
  const std::string sid = a.id();
  schedule(issued.issued_at, [this, sid, issued, response](Timestamp now) {
    emit(now, "sa_issued", sid, {{"sa_id", issued.sa_id}});
    const bool cleared = response <= cfg_.sa.clear_timeout_s;
    const Timestamp at =
        now + Timestamp(std::ceil(cleared ? std::max(response, 1.0) : cfg_.sa.clear_timeout_s));
    schedule(at, [this, sid, issued, response](Timestamp when) {
      const auto r = sa_.resolve(issued.sa_id, response);
      emit(when, "sa_resolved", sid,
           {{"sa_id", issued.sa_id}, {"resolution", eng::to_string(r)}, {"input_s", response}});
    });
  });
}

void Simulation::dms_observe(std::size_t ai, Timestamp t) {
  Agent& a = agents_[ai];
  const int ord = fatigue::to_ord_truth(a.state, a.params);
  const auto flag = dms_.observe(a.id(), t, ord, rng_);
  if (!flag) return;
  emit(t, "dms_flag", a.id(), {{"flag_id", flag->flag_id}});
  if (a.open_case) return;
  open_case(ai, t, desk_.run_route_one(*flag, pool_, ord, rng_, task_ids_));
}

void Simulation::periodic_rating(std::size_t ai, Timestamp t) {
  Agent& a = agents_[ai];
  const vig::FeedRequest req{{a.id(), t - 30, t}, vig::FeedOrigin::periodic};
  auto tasks = vig::assign_rating_tasks(pool_, std::span(&req, 1), 1, rng_, task_ids_);
  const vig::RatingTask task = tasks.front();
  emit(t, "rating_task", a.id(), vig::to_json(task));
  const int ord = fatigue::to_ord_truth(a.state, a.params);
  schedule(t + cfg_.vigilance.escalation.rating_delay_s, [this, ai, task, ord](Timestamp now) {
    Agent& ag = agents_[ai];
    const auto rater = std::find_if(pool_.begin(), pool_.end(), [&](const vig::RaterProfile& r) {
      return r.rater_id == task.assigned_rater_ids.front();
    });
    vig::OrdRating rating = vig::rate(*rater, task, ord, rng_, cfg_.vigilance.escalation.emission);
    rating.t = now;
    emit(now, "ord_rating", ag.id(), vig::to_json(rating));
    history_.push_back(rating);
    if (rating.level < cfg_.vigilance.escalation.high_rating_threshold) return;
    if (ag.open_case || ag.activity != Activity::driving) return;
    const vig::FeedRef feed{ag.id(), now - 30, now};
    const int truth = fatigue::to_ord_truth(ag.state, ag.params);
    open_case(ai, now, desk_.run_route_two(rating, feed, pool_, truth, rng_, task_ids_));
  });
}

void Simulation::open_case(std::size_t ai, Timestamp t, vig::EscalationCase c) {
  Agent& a = agents_[ai];
  emit(t, "escalation_opened", a.id(),
       {{"case_id", c.case_id}, {"route", vig::to_string(c.route)},
        {"trigger", vig::to_string(c.trigger)}, {"trigger_ref", c.trigger_ref}});
  if (c.alert) {
    json modalities = json::array();
    for (auto m : c.alert->modalities) modalities.push_back(vig::to_string(m));
    emit(t, "alert", a.id(), {{"flag_id", c.alert->flag_id}, {"modalities", modalities}});
    relieve(a, cfg_.behavior.alert_relief);
  }
  if (c.supervisor_action) {
    emit(t, "supervisor_action", a.id(),
         {{"case_id", c.case_id}, {"action", vig::to_string(*c.supervisor_action)}});
    relieve(a, cfg_.behavior.alert_relief);
  }
  emit(t, "rating_task", a.id(), vig::to_json(c.validation_task));
  a.open_case = c.case_id;
  schedule(c.resolved_at, [this, ai, c = std::move(c)](Timestamp now) { resolve_case(ai, now, c); });
}

void Simulation::resolve_case(std::size_t ai, Timestamp t, const vig::EscalationCase& c) {
  Agent& a = agents_[ai];
  for (const auto& r : c.validation_ratings) {
    emit(t, "ord_rating", a.id(), vig::to_json(r));
    history_.push_back(r);
  }
  json data = {{"case_id", c.case_id},
               {"route", vig::to_string(c.route)},
               {"resolution", vig::to_string(c.resolution)},
               {"validated_level", c.validated_level}};
  if (c.followup_action) data["followup_action"] = vig::to_string(*c.followup_action);
  emit(t, "escalation_resolved", a.id(), std::move(data));
  a.open_case.reset();
  if (c.resolution != vig::Resolution::confirmed) return;

  a.rater_level = {t, c.validated_level};
  if (c.route == vig::Route::route_one) a.dms_confirmed_at = t;
  if (!a.current) return;
  fatigue_event(a, t, c.validated_level == 5);
  emit(t, "supervisor_action", a.id(),
       {{"case_id", c.case_id}, {"action", vig::to_string(*c.followup_action)}});
  if (*c.followup_action == vig::SupervisorAction::retrieve_vehicle)
    stand_down(a, t, "retrieve_vehicle");
}

void Simulation::invited_break_check(Agent& a, Timestamp t) {
  const Timestamp window = cfg_.breaks.signal_window_s;
  sch::BreakSignalBundle s;
  if (a.latest_pfs && t - a.latest_pfs->first <= window) s.latest_pfs_kss = a.latest_pfs->second;
  s.dms_flag_recent = a.dms_confirmed_at && t - *a.dms_confirmed_at <= window;
  if (a.rater_level && t - a.rater_level->first <= window) s.rater_level_recent = a.rater_level->second;
  if (on_.engagement) s.ict_miss_rate_window = a.ict.miss_rate();
  const auto inv = a.gate.evaluate(s, cfg_.breaks.invited, t);
  if (!inv) return;
  json reasons = json::array();
  std::string joined;
  for (auto r : inv->reasons) {
    reasons.push_back(sch::to_string(r));
    joined += (joined.empty() ? "" : "+") + std::string(sch::to_string(r));
  }
  emit(t, "break_invited", a.id(), {{"reasons", reasons}});
  if (rng_.bernoulli(cfg_.breaks.invited.acceptance_probability)) {
    a.declines = 0;
    start_break(a, t, sch::BreakInitiator::invited, joined, inv->duration_s);
    return;
  }
  ++a.declines;
  emit(t, "break_declined", a.id(), {{"declines", a.declines}});
  if (a.declines >= cfg_.breaks.declines_before_outreach) {
    emit(t, "supervisor_outreach", a.id(), {{"reason", "declined_invitations"}});
    stand_down(a, t, "supervisor_outreach");
  }
}

void Simulation::pfs_survey(Agent& a, Timestamp t, bool followup) {
  const int kss = fatigue::to_kss(a.state, rng_, a.params);
  const int shift_index = a.shifts[*a.current].index;
  const auto [rec, out] = pfs_.submit(a.id(), kss, t, followup,
                                      followup ? a.pfs_followup_of : std::nullopt, shift_index);
  json data = {{"record_id", rec.record_id},
               {"kss", kss},
               {"is_followup", followup},
               {"shift_index", shift_index},
               {"action", aw::to_string(out.action)}};
  if (rec.follows) data["follows"] = *rec.follows;
  if (!out.tips.empty()) data["tips"] = out.tips;
  emit(t, "pfs", a.id(), std::move(data));
  a.latest_pfs = {t, kss};
  a.shift_max_kss = std::max(a.shift_max_kss, kss);
  if (followup) {
    a.pfs_followup_of.reset();
    a.pfs_followup_at.reset();
  } else {
    a.next_pfs = t + cfg_.pfs.cadence_s;
  }

  switch (out.action) {
    case aw::PfsAction::none:
      break;
    case aw::PfsAction::suggest_break_and_followup:
      if (a.activity == Activity::driving &&
          start_break(a, t, sch::BreakInitiator::self, "pfs_suggestion",
                      cfg_.breaks.impromptu_duration_s)) {
        pfs_.link_break(rec.record_id, a.break_id);
        a.pfs_followup_of = rec.record_id;
      } else if (a.activity == Activity::on_break) {
        a.pfs_followup_of = rec.record_id;
      }
      break;
    case aw::PfsAction::supervisor_outreach:
      emit(t, "supervisor_outreach", a.id(), {{"reason", "pfs_followup"}});
      stand_down(a, t, "supervisor_outreach");
      break;
  }
}

void Simulation::open_ticket(aw::Channel channel, std::string payload, bool anonymous,
                             std::optional<std::string> sid, Timestamp t) {
  const auto& ticket = concerns_.open_concern(channel, std::move(payload), anonymous, sid, t);
  const std::uint64_t id = ticket.ticket_id;
  emit(t, "concern_opened", sid.value_or(""), aw::to_json(ticket));
  const std::string who = sid.value_or("");
  schedule(t + kTicketAssessAfter, [this, id, who](Timestamp now) {
    concerns_.assess(id, now);
    emit(now, "concern_assessed", who, {{"ticket_id", id}});
  });
  schedule(t + kTicketResolveAfter, [this, id, who](Timestamp now) {
    concerns_.resolve(id, now);
    emit(now, "concern_resolved", who, {{"ticket_id", id}});
  });
}

void Simulation::lifecycle(Agent& a, Timestamp t, sch::LifecycleEventKind kind, bool severe) {
  const sch::Stage before = a.lc.stage;
  a.lc = sch::lifecycle_step(a.lc, {kind, t, severe}, cfg_.lifecycle);
  json data = {{"event", sch::to_string(kind)},
               {"from", sch::to_string(before)},
               {"to", sch::to_string(a.lc.stage)}};
  if (kind == sch::LifecycleEventKind::fatigue_event) data["severe"] = severe;
  emit(t, "lifecycle", a.id(), std::move(data));
  if (a.lc.stage == sch::Stage::retraining && before != sch::Stage::retraining)
    a.retraining_until = t + Timestamp(cfg_.behavior.retraining_days) * kDay;
  if (!a.lc.may_drive() && a.current) stand_down(a, t, "lifecycle_" + std::string(sch::to_string(a.lc.stage)));
}

void Simulation::fatigue_event(Agent& a, Timestamp t, bool severe) {
  if (!on_.education || !a.lc.may_drive()) return;
  lifecycle(a, t, sch::LifecycleEventKind::fatigue_event, severe);
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Simulation sim(cfg);
  return sim.run();
}

std::vector<std::string> block_record_types(std::string_view block) {
  if (block == "engagement")
    return {"ict_prompt", "ict_record", "ict_intervention", "sa_decision", "sa_issued",
            "sa_resolved"};
  if (block == "vigilance")
    return {"dms_flag",    "alert",        "escalation_opened", "escalation_resolved",
            "rating_task", "ord_rating",   "supervisor_action", "rater_qualified",
            "reliability"};
  if (block == "awareness")
    return {"pfs", "concern_opened", "concern_assessed", "concern_resolved"};
  if (block == "scheduling") return {"break_invited", "break_declined", "assignment"};
  if (block == "education") return {"lifecycle"};
  throw ValidationError("unknown block " + std::string(block));
}

double sign_test_p(int k, int n) {
  if (n <= 0) return 1.0;
  double p = 0.0;
  for (int i = std::max(k, 0); i <= n; ++i) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                  n * std::log(2.0));
  }
  return std::min(1.0, p);
}

AblationResult run_ablation(const ScenarioConfig& cfg, std::span<const ToggleSet> sets,
                            std::span<const std::uint64_t> seeds, const RunObserver& observer) {
  if (sets.size() < 2) throw ValidationError("ablation needs at least two toggle sets");
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  AblationResult out;
  out.sets.assign(sets.begin(), sets.end());
  out.seeds.assign(seeds.begin(), seeds.end());
  std::sort(out.seeds.begin(), out.seeds.end());

  // metrics[set][seed index]
  std::vector<std::vector<Metrics>> metrics(sets.size());
  for (std::size_t si = 0; si < sets.size(); ++si) {
    for (std::uint64_t seed : out.seeds) {
      ScenarioConfig c = cfg;
      c.toggles = sets[si].toggles;
      c.seed = seed;
      RunResult r = run_scenario(c);
      if (observer) observer(sets[si], seed, r);
      metrics[si].push_back(r.metrics);
    }
  }

  const auto names = Metrics{}.rows();
  for (std::size_t si = 1; si < sets.size(); ++si) {
    for (const auto& [name, _] : names) {
      AblationSummary s{name, sets[si].name};
      for (std::size_t k = 0; k < out.seeds.size(); ++k) {
        const double base = metrics[0][k].get(name);
        const double val = metrics[si][k].get(name);
        out.rows.push_back({name, out.seeds[k], sets[0].name, sets[si].name, base, val, val - base});
        ++s.n;
        if (val < base) ++s.lower;
        if (val > base) ++s.higher;
        s.mean_baseline += base;
        s.mean_variant += val;
      }
      s.mean_baseline /= s.n;
      s.mean_variant /= s.n;
      s.sign_test_p = sign_test_p(s.lower, s.lower + s.higher);
      out.summaries.push_back(s);
    }
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const AblationRow& x, const AblationRow& y) {
    return std::tie(x.metric, x.variant, x.seed) < std::tie(y.metric, y.variant, y.seed);
  });
  return out;
}

std::string ablation_csv(const AblationResult& r, const std::string& config_hash) {
  std::string out = "config_hash,metric,seed,baseline,variant,baseline_value,value,delta\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%s,%s,%.10g,%.10g,%.10g\n", config_hash.c_str(),
                  row.metric.c_str(), static_cast<unsigned long long>(row.seed),
                  row.baseline.c_str(), row.variant.c_str(), row.baseline_value, row.value,
                  row.delta);
    out += buf;
  }
  return out;
}

}  // namespace frm::sim
