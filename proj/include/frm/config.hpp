#pragma once

// Scenario configuration: a JSON document with a versioned schema. Every
// field has a default, so a config only needs to name what it changes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frm/awareness.hpp"
#include "frm/engagement.hpp"
#include "frm/fatigue_model.hpp"
#include "frm/scheduling.hpp"
#include "frm/vigilance.hpp"

namespace frm::sim {

constexpr int kSchemaVersion = 1;

// One switch per framework block.
struct Toggles {
  bool education = true;
  bool awareness = true;
  bool vigilance = true;
  bool engagement = true;
  bool scheduling = true;

  static Toggles all(bool on) { return {on, on, on, on, on}; }
  bool operator==(const Toggles&) const = default;
};

// Per-minute probability of an incautious event while driving.
struct IncautiousHazard {
  double base_per_min = 0.0081;
  double task_gain = 0.1436;
  double fatigue_gain = 0.0;

  double per_minute(const fatigue::AlertnessState& s) const;
};

struct BehaviorParams {
  double driving_monotony = 1.0;
  double vehicle_speed_mps = 10.0;
  double interaction_rate_per_min = 0.3;  // scaled by alertness
  double demand_high_rate_per_h = 2.0;
  int demand_high_duration_s = 120;
  double ict_miss_base = 0.02;
  double ict_miss_fatigue_gain = 0.4;  // P(miss) = base + gain * (1 - alertness)^2
  double ict_latency_base_s = 2.0;
  double ict_latency_fatigue_s = 15.0;
  double ict_relief = 0.02;    // share of task load shed on a completed ICT
  double alert_relief = 0.05;  // share shed by a multimodal DMS alert
  double transition_rate_per_h = 0.5;
  double unintentional_fraction = 0.3;
  double emergency_fraction = 0.05;
  double sa_response_base_s = 2.0;
  double sa_response_fatigue_s = 20.0;
  // Trained specialists take an impromptu break when they notice drowsiness.
  double self_break_alertness = 0.45;
  double self_break_probability_per_min = 0.05;
  double peer_concern_probability = 0.05;
  double self_concern_probability = 0.02;
  double sleep_jitter_h = 0.75;  // night-to-night spread of sleep duration
  int retraining_days = 1;
  int state_sample_interval_s = 300;
  IncautiousHazard incautious;
};

struct SpecialistDef {
  std::string id;
  double susceptibility = 1.0;
  double baseline_pressure = 0.1;  // chronic-fatigue floor for homeostatic pressure
  double wake_hours_before_shift = 2.0;
  double sleep_hours = 7.5;
  scheduling::Stage stage = scheduling::Stage::single_qualified;
  bool dual = false;
  std::string shift_plan;
};

struct ShiftPlanDef {
  int cycle_days = 7;
  std::vector<scheduling::ShiftSpec> shifts;  // day_index within the cycle
};

struct VigilancePolicy {
  vigilance::DmsConfig dms;
  vigilance::EscalationPolicy escalation;
  int periodic_interval_s = 1800;
  int reliability_interval_s = 86400;
  vigilance::QualificationPolicy qualification;
};

struct BreakSettings {
  scheduling::InvitedBreakPolicy invited;
  int impromptu_duration_s = 900;
  int signal_window_s = 900;
  int declines_before_outreach = 2;
};

struct LifecycleEventDef {
  std::string specialist;
  int day = 0;
  scheduling::LifecycleEventKind event = scheduling::LifecycleEventKind::training_complete;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  int horizon_days = 5;
  Toggles toggles;
  fatigue::ModelParams model;
  BehaviorParams behavior;
  std::vector<SpecialistDef> fleet;
  std::map<std::string, ShiftPlanDef> shift_plans;
  VigilancePolicy vigilance;
  std::vector<vigilance::RaterProfile> raters;
  engagement::IctConfig ict;
  engagement::SaConfig sa;
  BreakSettings breaks;
  awareness::PfsPolicy pfs;
  scheduling::LifecyclePolicy lifecycle;
  scheduling::RotationConstraints rotation;
  std::vector<LifecycleEventDef> lifecycle_events;
};

// Throws ParseError on malformed or unknown fields.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& cfg);

// Reads and parses; ParseError for I/O and syntax problems.
ScenarioConfig load_config(const std::filesystem::path& path);

// Throws ValidationError on unresolved references or out-of-range values.
void validate(const ScenarioConfig& cfg);

// Hash of the normalised config excluding the seed, so seed sweeps share it.
std::string config_hash(const ScenarioConfig& cfg);

// Model parameters personalised for one specialist.
fatigue::ModelParams specialist_params(const fatigue::ModelParams& base, const SpecialistDef& s);

// Small built-in fleet used by tests and as a CLI starting point.
ScenarioConfig default_scenario();

nlohmann::json toggles_to_json(const Toggles& t);
Toggles toggles_from_json(const nlohmann::json& j);

}  // namespace frm::sim
