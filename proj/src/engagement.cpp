#include "frm/engagement.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "frm/error.hpp"

namespace frm::engagement {

void IctConfig::validate() const {
  if (!(time_gap_s > 0.0) || !(distance_gap_m > 0.0))
    throw ValidationError("ICT gap thresholds must be positive");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ValidationError("ICT jitter must lie in [0,1)");
  if (!(deadline_s > 0.0)) throw ValidationError("ICT deadline must be positive");
  if (interventions_for_pull_over < 1) throw ValidationError("pull-over tally must be >= 1");
  if (adapt_window == 0) throw ValidationError("ICT adaptation window must be >= 1");
  if (!(min_multiplier > 0.0 && min_multiplier <= 1.0))
    throw ValidationError("ICT min multiplier must lie in (0,1]");
  if (!(recovery_fraction >= 0.0 && recovery_fraction <= 1.0))
    throw ValidationError("ICT recovery fraction must lie in [0,1]");
}

IctScheduler::IctScheduler(IctConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<IctRecord> IctScheduler::record_interactivity(Timestamp now, double odometer,
                                                            bool demand_high) {
  if (now < state_.last_interactivity_time) throw ValidationError("interactivity time regressed");
  if (odometer < state_.last_interactivity_odometer)
    throw ValidationError("interactivity odometer regressed");
  state_.last_interactivity_time = now;
  state_.last_interactivity_odometer = odometer;
  if (demand_high && state_.pending) return resolve(now, odometer, OutcomeSignal::demand_rose()).record;
  return std::nullopt;
}

IctPrompt IctScheduler::issue(IctTrigger trigger, Timestamp now, bool followup,
                              std::optional<std::uint64_t> follows) {
  IctPrompt p;
  p.prompt_id = state_.next_prompt_id++;
  p.trigger = trigger;
  p.issued_at = now;
  p.deadline = now + static_cast<Timestamp>(std::ceil(cfg_.deadline_s));
  p.is_followup = followup;
  p.follows = follows;
  state_.pending = p;
  state_.jitter_factor.reset();
  return p;
}

std::optional<IctPrompt> IctScheduler::tick(Timestamp now, double odometer, bool demand_high,
                                            Rng& rng) {
  if (state_.pending || demand_high) return std::nullopt;
  if (!state_.jitter_factor) {
    state_.jitter_factor = cfg_.jitter > 0.0 ? 1.0 + cfg_.jitter * (2.0 * rng.uniform() - 1.0) : 1.0;
  }
  const double scale = state_.frequency_multiplier * *state_.jitter_factor;
  const double time_gap = static_cast<double>(now - state_.last_interactivity_time);
  const double distance_gap = odometer - state_.last_interactivity_odometer;
  if (time_gap >= cfg_.time_gap_s * scale) return issue(IctTrigger::gap_time, now, false, {});
  if (distance_gap >= cfg_.distance_gap_m * scale)
    return issue(IctTrigger::gap_distance, now, false, {});
  return std::nullopt;
}

void IctScheduler::push_outcome(const IctRecord& r) {
  state_.recent_outcomes.push_back(r);
  while (state_.recent_outcomes.size() > cfg_.adapt_window) state_.recent_outcomes.pop_front();
}

IctResolution IctScheduler::resolve(Timestamp now, double odometer, OutcomeSignal signal) {
  if (!state_.pending) throw ValidationError("no pending ICT prompt to resolve");
  const IctPrompt prompt = *state_.pending;

  IctResolution out;
  out.record.prompt_id = prompt.prompt_id;
  out.record.trigger = prompt.trigger;
  out.record.follows = prompt.follows;
  out.record.resolved_at = now;

  switch (signal.kind) {
    case OutcomeSignal::Kind::responded:
      if (!(signal.latency_s >= 0.0) || signal.latency_s > cfg_.deadline_s)
        throw ValidationError("ICT response latency outside [0, deadline]");
      out.record.outcome = IctOutcome::completed;
      out.record.response_latency_s = signal.latency_s;
      state_.pending.reset();
      break;
    case OutcomeSignal::Kind::deadline_passed:
      if (now <= prompt.deadline) throw ValidationError("ICT deadline has not passed yet");
      out.record.outcome = IctOutcome::missed;
      state_.pending.reset();
      if (!prompt.is_followup) {
        out.followup = issue(IctTrigger::followup, now, true, prompt.prompt_id);
      } else {
        ++state_.interventions_this_shift;
        Intervention iv;
        iv.prompt_id = prompt.prompt_id;
        iv.t = now;
        iv.pull_over = state_.interventions_this_shift >= cfg_.interventions_for_pull_over;
        out.intervention = iv;
      }
      break;
    case OutcomeSignal::Kind::demand_rose:
      out.record.outcome = IctOutcome::voided_by_demand;
      state_.pending.reset();
      break;
  }

  if (!state_.pending) {
    state_.last_interactivity_time = std::max(state_.last_interactivity_time, now);
    state_.last_interactivity_odometer = std::max(state_.last_interactivity_odometer, odometer);
  }
  push_outcome(out.record);
  return out;
}

double IctScheduler::miss_rate() const {
  std::size_t n = 0, misses = 0;
  for (const auto& r : state_.recent_outcomes) {
    if (r.outcome == IctOutcome::voided_by_demand) continue;
    ++n;
    if (r.outcome == IctOutcome::missed) ++misses;
  }
  return n ? static_cast<double>(misses) / static_cast<double>(n) : 0.0;
}

void IctScheduler::adapt() {
  std::size_t n = 0, completed = 0;
  double latency = 0.0;
  for (const auto& r : state_.recent_outcomes) {
    if (r.outcome == IctOutcome::voided_by_demand) continue;
    ++n;
    if (r.outcome == IctOutcome::completed) {
      ++completed;
      latency += r.response_latency_s.value_or(0.0);
    }
  }
  if (n == 0) return;
  const bool slow = completed > 0 && latency / static_cast<double>(completed) > cfg_.adapt_latency_s;
  double& m = state_.frequency_multiplier;
  if (miss_rate() >= cfg_.adapt_miss_rate || slow) {
    m = std::max(cfg_.min_multiplier, m * 0.5);
  } else {
    m = std::min(1.0, m + (1.0 - m) * cfg_.recovery_fraction);
  }
}

void IctScheduler::begin_shift(Timestamp now, double odometer) {
  if (state_.pending) throw ValidationError("cannot begin a shift with a pending ICT prompt");
  state_.interventions_this_shift = 0;
  state_.last_interactivity_time = now;
  state_.last_interactivity_odometer = odometer;
  state_.jitter_factor.reset();
}

// ---------------------------------------------------------------------------

void SaConfig::validate() const {
  for (double w : {weight_pedal, weight_steering_brake, weight_button, no_input_before,
                   no_input_after, high_speed}) {
    if (!(w >= 0.0)) throw ValidationError("SA weights must be nonnegative");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("SA threshold must lie in [0,1]");
  if (!(issue_delay_s >= 0.0) || !(clear_timeout_s > 0.0))
    throw ValidationError("SA delay must be >= 0 and timeout > 0");
}

SaDecision sa_evaluate(const SaDecisionInput& in, const SaConfig& cfg) {
  double score = 0.0;
  switch (in.cause) {
    case TransitionCause::pedal: score += cfg.weight_pedal; break;
    case TransitionCause::steering:
    case TransitionCause::brake: score += cfg.weight_steering_brake; break;
    case TransitionCause::button: score += cfg.weight_button; break;
  }
  if (!in.input_before) score += cfg.no_input_before;
  if (!in.input_after) score += cfg.no_input_after;
  if (in.speed_mps > cfg.high_speed_mps) score += cfg.high_speed;

  SaDecision d;
  d.rationale_score = std::clamp(score, 0.0, 1.0);
  if (in.emergency) {
    d.action = SaAction::suppress_emergency;
  } else if (d.rationale_score >= cfg.threshold) {
    d.action = SaAction::issue;
    d.delay_s = cfg.issue_delay_s;
  }
  return d;
}

SaTracker::SaTracker(SaConfig cfg) : cfg_(cfg) { cfg_.validate(); }

IssuedSa SaTracker::issue(const SaDecision& decision, Timestamp transition_at) {
  if (decision.action != SaAction::issue) throw ValidationError("decision does not issue an SA");
  IssuedSa sa{next_id_++, transition_at + static_cast<Timestamp>(std::ceil(decision.delay_s))};
  open_.insert(sa.sa_id);
  return sa;
}

SaResolution SaTracker::resolve(std::uint64_t sa_id, std::optional<double> input_within_s) {
  if (open_.erase(sa_id) == 0)
    throw ValidationError("SA " + std::to_string(sa_id) + " is not an open issued alert");
  if (input_within_s && *input_within_s >= 0.0 && *input_within_s <= cfg_.clear_timeout_s)
    return SaResolution::cleared;
  return SaResolution::support_alerted;
}

// ---------------------------------------------------------------------------

std::string_view to_string(IctTrigger t) {
  switch (t) {
    case IctTrigger::gap_time: return "gap_time";
    case IctTrigger::gap_distance: return "gap_distance";
    case IctTrigger::followup: return "followup";
  }
  return "gap_time";
}

std::string_view to_string(IctOutcome o) {
  switch (o) {
    case IctOutcome::completed: return "completed";
    case IctOutcome::missed: return "missed";
    case IctOutcome::voided_by_demand: return "voided_by_demand";
  }
  return "completed";
}

std::string_view to_string(InterventionAction a) {
  switch (a) {
    case InterventionAction::contact_support: return "contact_support";
    case InterventionAction::start_video_stream: return "start_video_stream";
    case InterventionAction::hmi_alert: return "hmi_alert";
  }
  return "contact_support";
}

std::string_view to_string(TransitionCause c) {
  switch (c) {
    case TransitionCause::button: return "button";
    case TransitionCause::pedal: return "pedal";
    case TransitionCause::steering: return "steering";
    case TransitionCause::brake: return "brake";
  }
  return "button";
}

TransitionCause transition_cause_from_string(std::string_view s) {
  for (auto c : {TransitionCause::button, TransitionCause::pedal, TransitionCause::steering,
                 TransitionCause::brake}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown transition cause: " + std::string(s));
}

std::string_view to_string(SaAction a) {
  switch (a) {
    case SaAction::none: return "none";
    case SaAction::issue: return "issue";
    case SaAction::suppress_emergency: return "suppress_emergency";
  }
  return "none";
}

std::string_view to_string(SaResolution r) {
  return r == SaResolution::cleared ? "cleared" : "support_alerted";
}

nlohmann::json to_json(const IctPrompt& p) {
  nlohmann::json j{{"prompt_id", p.prompt_id},
                   {"trigger", to_string(p.trigger)},
                   {"issued_at", p.issued_at},
                   {"deadline", p.deadline},
                   {"is_followup", p.is_followup}};
  if (p.follows) j["follows"] = *p.follows;
  return j;
}

nlohmann::json to_json(const IctRecord& r) {
  nlohmann::json j{{"prompt_id", r.prompt_id},
                   {"trigger", to_string(r.trigger)},
                   {"outcome", to_string(r.outcome)}};
  if (r.response_latency_s) j["latency_s"] = *r.response_latency_s;
  if (r.follows) j["follows"] = *r.follows;
  return j;
}

nlohmann::json to_json(const Intervention& i) {
  nlohmann::json actions = nlohmann::json::array();
  for (auto a : i.actions) actions.push_back(to_string(a));
  return {{"prompt_id", i.prompt_id}, {"actions", std::move(actions)}, {"pull_over", i.pull_over}};
}

}  // namespace frm::engagement
