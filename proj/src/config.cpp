#include "frm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "frm/error.hpp"
#include "frm/hash.hpp"

namespace frm::sim {

namespace {

using nlohmann::json;

// Field visitors shared by the reader and the writer so the two cannot drift.
struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& value);

  void finish() const {
    for (const auto& [k, _] : j.items()) {
      if (!seen.count(k)) throw ParseError("unknown field " + path + "." + k);
    }
  }
};

struct Writer {
  json j = json::object();

  template <class T>
  void operator()(const char* key, const T& value);
};

template <class T>
void decode(const json& j, T& out, const std::string& path);
template <class T>
json encode(const T& v);

template <class V>
void visit(V& v, fatigue::ModelParams& p) {
  v("homeostat_rise_tau_h", p.homeostat_rise_tau_h);
  v("homeostat_decay_tau_h", p.homeostat_decay_tau_h);
  v("homeostat_floor", p.homeostat_floor);
  v("circadian_amplitude", p.circadian_amplitude);
  v("circadian_trough_hour", p.circadian_trough_hour);
  v("task_load_rate_per_h", p.task_load_rate_per_h);
  v("task_recovery_tau_min", p.task_recovery_tau_min);
  v("physical_recovery_boost", p.physical_recovery_boost);
  v("social_recovery_boost", p.social_recovery_boost);
  v("weights", p.weights);
  v("report_noise_sd", p.report_noise_sd);
  v("ord_band_edges", p.ord_band_edges);
}

template <class V>
void visit(V& v, IncautiousHazard& p) {
  v("base_per_min", p.base_per_min);
  v("task_gain", p.task_gain);
  v("fatigue_gain", p.fatigue_gain);
}

template <class V>
void visit(V& v, BehaviorParams& p) {
  v("driving_monotony", p.driving_monotony);
  v("vehicle_speed_mps", p.vehicle_speed_mps);
  v("interaction_rate_per_min", p.interaction_rate_per_min);
  v("demand_high_rate_per_h", p.demand_high_rate_per_h);
  v("demand_high_duration_s", p.demand_high_duration_s);
  v("ict_miss_base", p.ict_miss_base);
  v("ict_miss_fatigue_gain", p.ict_miss_fatigue_gain);
  v("ict_latency_base_s", p.ict_latency_base_s);
  v("ict_latency_fatigue_s", p.ict_latency_fatigue_s);
  v("ict_relief", p.ict_relief);
  v("alert_relief", p.alert_relief);
  v("transition_rate_per_h", p.transition_rate_per_h);
  v("unintentional_fraction", p.unintentional_fraction);
  v("emergency_fraction", p.emergency_fraction);
  v("sa_response_base_s", p.sa_response_base_s);
  v("sa_response_fatigue_s", p.sa_response_fatigue_s);
  v("self_break_alertness", p.self_break_alertness);
  v("self_break_probability_per_min", p.self_break_probability_per_min);
  v("peer_concern_probability", p.peer_concern_probability);
  v("self_concern_probability", p.self_concern_probability);
  v("sleep_jitter_h", p.sleep_jitter_h);
  v("retraining_days", p.retraining_days);
  v("state_sample_interval_s", p.state_sample_interval_s);
  v("incautious", p.incautious);
}

template <class V>
void visit(V& v, SpecialistDef& p) {
  v("id", p.id);
  v("susceptibility", p.susceptibility);
  v("baseline_pressure", p.baseline_pressure);
  v("wake_hours_before_shift", p.wake_hours_before_shift);
  v("sleep_hours", p.sleep_hours);
  v("stage", p.stage);
  v("dual", p.dual);
  v("shift_plan", p.shift_plan);
}

template <class V>
void visit(V& v, scheduling::ScheduledBreak& p) {
  v("offset_min", p.offset_min);
  v("duration_min", p.duration_min);
}

template <class V>
void visit(V& v, ShiftPlanDef& p) {
  v("cycle_days", p.cycle_days);
  v("shifts", p.shifts);
}

template <class V>
void visit(V& v, vigilance::DmsConfig& p) {
  v("detect_threshold_ord", p.detect_threshold_ord);
  v("false_positive_rate", p.false_positive_rate);
  v("false_negative_rate", p.false_negative_rate);
  v("observation_period_s", p.observation_period_s);
}

template <class V>
void visit(V& v, vigilance::IndicatorEmission& p) {
  v("own_level", p.own_level);
  v("adjacent_level", p.adjacent_level);
  v("device_use", p.device_use);
  v("hands_placement", p.hands_placement);
}

template <class V>
void visit(V& v, vigilance::EscalationPolicy& p) {
  v("validation_raters", p.validation_raters);
  v("high_rating_threshold", p.high_rating_threshold);
  v("confirm_threshold", p.confirm_threshold);
  v("rating_delay_s", p.rating_delay_s);
  v("emission", p.emission);
}

template <class V>
void visit(V& v, vigilance::QualificationPolicy& p) {
  v("min_exact_fraction", p.min_exact_fraction);
  v("max_mean_abs_error", p.max_mean_abs_error);
}

template <class V>
void visit(V& v, VigilancePolicy& p) {
  v("dms", p.dms);
  v("escalation", p.escalation);
  v("periodic_interval_s", p.periodic_interval_s);
  v("reliability_interval_s", p.reliability_interval_s);
  v("qualification", p.qualification);
}

template <class V>
void visit(V& v, vigilance::RaterProfile& p) {
  v("id", p.rater_id);
  v("bias", p.bias);
  v("noise_sd", p.noise_sd);
}

template <class V>
void visit(V& v, engagement::IctConfig& p) {
  v("time_gap_s", p.time_gap_s);
  v("distance_gap_m", p.distance_gap_m);
  v("jitter", p.jitter);
  v("deadline_s", p.deadline_s);
  v("interventions_for_pull_over", p.interventions_for_pull_over);
  v("adapt_window", p.adapt_window);
  v("adapt_miss_rate", p.adapt_miss_rate);
  v("adapt_latency_s", p.adapt_latency_s);
  v("min_multiplier", p.min_multiplier);
  v("recovery_fraction", p.recovery_fraction);
}

template <class V>
void visit(V& v, engagement::SaConfig& p) {
  v("weight_pedal", p.weight_pedal);
  v("weight_steering_brake", p.weight_steering_brake);
  v("weight_button", p.weight_button);
  v("no_input_before", p.no_input_before);
  v("no_input_after", p.no_input_after);
  v("high_speed", p.high_speed);
  v("high_speed_mps", p.high_speed_mps);
  v("threshold", p.threshold);
  v("issue_delay_s", p.issue_delay_s);
  v("clear_timeout_s", p.clear_timeout_s);
}

template <class V>
void visit(V& v, scheduling::InvitedBreakPolicy& p) {
  v("kss_threshold", p.kss_threshold);
  v("rater_level_threshold", p.rater_level_threshold);
  v("ict_miss_rate_threshold", p.ict_miss_rate_threshold);
  v("cooldown_s", p.cooldown_s);
  v("duration_s", p.duration_s);
  v("acceptance_probability", p.acceptance_probability);
}

template <class V>
void visit(V& v, BreakSettings& p) {
  v("invited", p.invited);
  v("impromptu_duration_s", p.impromptu_duration_s);
  v("signal_window_s", p.signal_window_s);
  v("declines_before_outreach", p.declines_before_outreach);
}

template <class V>
void visit(V& v, awareness::PfsPolicy& p) {
  v("threshold", p.threshold);
  v("cadence_s", p.cadence_s);
  v("followup_due_s", p.followup_due_s);
  v("tips", p.tips);
}

template <class V>
void visit(V& v, scheduling::LifecyclePolicy& p) {
  v("severe_threshold", p.severe_threshold);
  v("any_threshold", p.any_threshold);
  v("window_s", p.window_s);
}

template <class V>
void visit(V& v, scheduling::RotationConstraints& p) {
  v("max_forward_step_per_day", p.max_forward_step_per_day);
  v("min_extended_rest", p.min_extended_rest);
  v("min_inter_shift_rest", p.min_inter_shift_rest);
}

template <class V>
void visit(V& v, LifecycleEventDef& p) {
  v("specialist", p.specialist);
  v("day", p.day);
  v("event", p.event);
}

template <class V>
void visit(V& v, Toggles& p) {
  v("education", p.education);
  v("awareness", p.awareness);
  v("vigilance", p.vigilance);
  v("engagement", p.engagement);
  v("scheduling", p.scheduling);
}

template <class V>
void visit(V& v, ScenarioConfig& p) {
  v("schema_version", p.schema_version);
  v("seed", p.seed);
  v("horizon_days", p.horizon_days);
  v("toggles", p.toggles);
  v("model", p.model);
  v("behavior", p.behavior);
  v("fleet", p.fleet);
  v("shift_plans", p.shift_plans);
  v("vigilance", p.vigilance);
  v("raters", p.raters);
  v("ict", p.ict);
  v("sa", p.sa);
  v("breaks", p.breaks);
  v("pfs", p.pfs);
  v("lifecycle", p.lifecycle);
  v("rotation", p.rotation);
  v("lifecycle_events", p.lifecycle_events);
}

template <class T>
concept Visitable = requires(Reader& r, T& t) { visit(r, t); };

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

template <class T>
void decode(const json& j, T& out, const std::string& path) {
  try {
    if constexpr (Visitable<T>) {
      if (!j.is_object()) throw ParseError(path + " must be an object");
      Reader r{j, path, {}};
      visit(r, out);
      r.finish();
    } else if constexpr (std::is_same_v<T, scheduling::ShiftSpec>) {
      if (!j.is_object()) throw ParseError(path + " must be an object");
      Reader r{j, path, {}};
      std::string start = scheduling::format_clock(out.start_min);
      std::string end = scheduling::format_clock(out.end_min);
      r("day", out.day_index);
      r("start", start);
      r("end", end);
      r("breaks", out.breaks);
      r.finish();
      out.start_min = scheduling::parse_clock(start);
      out.end_min = scheduling::parse_clock(end);
    } else if constexpr (std::is_same_v<T, scheduling::Stage>) {
      out = scheduling::stage_from_string(j.get<std::string>());
    } else if constexpr (std::is_same_v<T, scheduling::LifecycleEventKind>) {
      out = scheduling::lifecycle_event_from_string(j.get<std::string>());
    } else if constexpr (is_vector<T>::value) {
      if (!j.is_array()) throw ParseError(path + " must be an array");
      out.clear();
      for (std::size_t i = 0; i < j.size(); ++i) {
        typename T::value_type item{};
        decode(j[i], item, path + "[" + std::to_string(i) + "]");
        out.push_back(std::move(item));
      }
    } else if constexpr (std::is_same_v<T, std::map<std::string, ShiftPlanDef>>) {
      if (!j.is_object()) throw ParseError(path + " must be an object");
      out.clear();
      for (const auto& [k, val] : j.items()) decode(val, out[k], path + "." + k);
    } else {
      out = j.get<T>();
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

template <class T>
json encode(const T& v) {
  if constexpr (Visitable<T>) {
    Writer w;
    T copy = v;
    visit(w, copy);
    return std::move(w.j);
  } else if constexpr (std::is_same_v<T, scheduling::ShiftSpec>) {
    json breaks = json::array();
    for (const auto& b : v.breaks) breaks.push_back(encode(b));
    return {{"day", v.day_index},
            {"start", scheduling::format_clock(v.start_min)},
            {"end", scheduling::format_clock(v.end_min)},
            {"breaks", std::move(breaks)}};
  } else if constexpr (std::is_same_v<T, scheduling::Stage> ||
                       std::is_same_v<T, scheduling::LifecycleEventKind>) {
    return std::string(scheduling::to_string(v));
  } else if constexpr (is_vector<T>::value) {
    json arr = json::array();
    for (const auto& item : v) arr.push_back(encode(item));
    return arr;
  } else if constexpr (std::is_same_v<T, std::map<std::string, ShiftPlanDef>>) {
    json obj = json::object();
    for (const auto& [k, val] : v) obj[k] = encode(val);
    return obj;
  } else {
    return json(v);
  }
}

template <class T>
void Reader::operator()(const char* key, T& value) {
  seen.insert(key);
  if (const auto it = j.find(key); it != j.end()) decode(*it, value, path + "." + key);
}

template <class T>
void Writer::operator()(const char* key, const T& value) {
  j[key] = encode(value);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

double IncautiousHazard::per_minute(const fatigue::AlertnessState& s) const {
  return std::clamp(base_per_min + task_gain * s.task_load + fatigue_gain * (1.0 - s.alertness),
                    0.0, 1.0);
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig cfg;
  cfg.fleet.clear();
  cfg.shift_plans.clear();
  cfg.raters.clear();
  decode(j, cfg, "config");
  return cfg;
}

json to_json(const ScenarioConfig& cfg) { return encode(cfg); }

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate(const ScenarioConfig& cfg) {
  require(cfg.schema_version == kSchemaVersion,
          "unsupported schema_version " + std::to_string(cfg.schema_version));
  require(cfg.horizon_days >= 0, "horizon_days must be >= 0");
  cfg.model.validate();
  cfg.vigilance.dms.validate();
  cfg.ict.validate();
  cfg.sa.validate();
  cfg.breaks.invited.validate();
  cfg.pfs.validate();
  cfg.lifecycle.validate();
  cfg.rotation.validate();

  const auto& b = cfg.behavior;
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(b.driving_monotony), "driving_monotony must lie in [0,1]");
  for (double p : {b.ict_miss_base, b.ict_relief, b.self_break_alertness,
                   b.self_break_probability_per_min, b.alert_relief, b.unintentional_fraction,
                   b.emergency_fraction, b.peer_concern_probability, b.self_concern_probability})
    require(prob(p), "behavior probabilities and reliefs must lie in [0,1]");
  for (double r : {b.vehicle_speed_mps, b.interaction_rate_per_min, b.demand_high_rate_per_h,
                   b.ict_miss_fatigue_gain, b.ict_latency_base_s, b.ict_latency_fatigue_s,
                   b.transition_rate_per_h, b.sa_response_base_s, b.sa_response_fatigue_s,
                   b.incautious.base_per_min, b.incautious.task_gain, b.incautious.fatigue_gain})
    require(std::isfinite(r) && r >= 0.0, "behavior rates must be finite and >= 0");
  require(std::isfinite(b.sleep_jitter_h) && b.sleep_jitter_h >= 0.0, "sleep_jitter_h must be >= 0");
  require(b.demand_high_duration_s > 0 && b.state_sample_interval_s > 0 && b.retraining_days >= 0,
          "behavior durations must be positive");
  require(cfg.breaks.impromptu_duration_s > 0 && cfg.breaks.signal_window_s > 0 &&
              cfg.breaks.declines_before_outreach > 0,
          "break settings must be positive");
  require(cfg.vigilance.periodic_interval_s > 0 && cfg.vigilance.reliability_interval_s > 0,
          "vigilance intervals must be positive");
  vigilance::EscalationDesk check(cfg.vigilance.escalation);

  std::set<std::string> ids;
  for (const auto& s : cfg.fleet) {
    require(!s.id.empty(), "specialist id must be non-empty");
    require(ids.insert(s.id).second, "duplicate specialist id " + s.id);
    require(cfg.shift_plans.count(s.shift_plan) == 1,
            "specialist " + s.id + " references unknown shift plan '" + s.shift_plan + "'");
    require(s.susceptibility > 0.0, "susceptibility must be positive");
    require(s.baseline_pressure >= 0.0 && s.baseline_pressure <= 1.0,
            "baseline_pressure must lie in [0,1]");
    require(s.wake_hours_before_shift >= 0.0 && s.sleep_hours > 0.0 &&
                s.wake_hours_before_shift + s.sleep_hours < 24.0,
            "sleep timing of " + s.id + " must fit in a day");
    require(s.dual || (s.stage != scheduling::Stage::trainee &&
                       s.stage != scheduling::Stage::dual_qualified),
            "specialist " + s.id + " needs a dual configuration at stage " +
                std::string(scheduling::to_string(s.stage)));
  }
  for (const auto& [name, plan] : cfg.shift_plans) {
    require(plan.cycle_days >= 1, "shift plan " + name + " needs cycle_days >= 1");
    std::set<int> days;
    for (const auto& shift : plan.shifts) {
      shift.validate();
      require(shift.day_index >= 0 && shift.day_index < plan.cycle_days,
              "shift plan " + name + " has a day outside its cycle");
      require(days.insert(shift.day_index).second, "shift plan " + name + " repeats a day");
    }
  }
  std::set<std::string> rater_ids;
  for (const auto& r : cfg.raters) {
    require(!r.rater_id.empty() && rater_ids.insert(r.rater_id).second, "rater ids must be unique");
    require(r.noise_sd >= 0.0 && std::isfinite(r.bias), "rater noise must be >= 0");
  }
  if (cfg.toggles.vigilance) {
    require(static_cast<int>(cfg.raters.size()) > cfg.vigilance.escalation.validation_raters,
            "rater pool must exceed the validation rater count");
  }
  for (const auto& e : cfg.lifecycle_events) {
    require(ids.count(e.specialist) == 1, "lifecycle event references unknown specialist " + e.specialist);
    require(e.day >= 0, "lifecycle event day must be >= 0");
    require(e.event != scheduling::LifecycleEventKind::fatigue_event,
            "fatigue events are generated by the simulation");
  }
}

std::string config_hash(const ScenarioConfig& cfg) {
  json j = to_json(cfg);
  j.erase("seed");
  return hex64(fnv1a64(j.dump()));
}

fatigue::ModelParams specialist_params(const fatigue::ModelParams& base, const SpecialistDef& s) {
  fatigue::ModelParams p = base;
  p.homeostat_rise_tau_h = base.homeostat_rise_tau_h / s.susceptibility;
  p.task_load_rate_per_h = base.task_load_rate_per_h * s.susceptibility;
  p.homeostat_floor = std::max(base.homeostat_floor, s.baseline_pressure);
  return p;
}

json toggles_to_json(const Toggles& t) { return encode(t); }

Toggles toggles_from_json(const json& j) {
  Toggles t;
  decode(j, t, "toggles");
  return t;
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.seed = 20240601;
  cfg.horizon_days = 5;

  ShiftPlanDef afternoon;
  afternoon.cycle_days = 7;
  for (int d = 0; d < 5; ++d) {
    afternoon.shifts.push_back({d, 14 * 60, 22 * 60, {{240, 30}}});
  }
  ShiftPlanDef evening;
  evening.cycle_days = 7;
  for (int d = 0; d < 5; ++d) {
    evening.shifts.push_back({d, 16 * 60, 0, {{240, 30}}});
  }
  cfg.shift_plans = {{"afternoon", afternoon}, {"evening", evening}};

  cfg.fleet = {
      {"S1", 1.0, 0.10, 2.0, 7.5, scheduling::Stage::single_qualified, false, "afternoon"},
      {"S2", 1.2, 0.15, 2.0, 7.0, scheduling::Stage::single_qualified, false, "evening"},
      {"S3", 0.9, 0.10, 3.0, 7.5, scheduling::Stage::dual_qualified, true, "afternoon"},
      {"S4", 1.1, 0.20, 2.0, 6.5, scheduling::Stage::single_qualified, false, "evening"},
  };
  cfg.raters = {
      {"R1", 0.0, 0.25, false}, {"R2", 0.1, 0.3, false}, {"R3", -0.1, 0.3, false},
      {"R4", 0.0, 0.35, false}, {"R5", 0.0, 0.2, false}, {"R6", 0.2, 0.25, false},
  };
  cfg.lifecycle_events = {{"S3", 3, scheduling::LifecycleEventKind::gateway_passed}};
  return cfg;
}

}  // namespace frm::sim
