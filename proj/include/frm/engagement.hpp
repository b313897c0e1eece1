#pragma once

// Supplemental engagement: interactive cognitive task (ICT) prompting driven
// by interactivity gaps, with follow-ups and interventions on repeated misses,
// and the secondary-alert (SA) decision for automated-to-manual transitions.

#include <array>
#include <cstdint>
#include <deque>
#include <set>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "frm/rng.hpp"

namespace frm::engagement {

using Timestamp = std::int64_t;

struct IctConfig {
  double time_gap_s = 300.0;
  double distance_gap_m = 3000.0;
  double jitter = 0.2;  // J: thresholds scaled by a factor drawn from [1-J, 1+J]
  double deadline_s = 30.0;
  int interventions_for_pull_over = 2;
  // adaptation
  std::size_t adapt_window = 10;
  double adapt_miss_rate = 0.2;
  double adapt_latency_s = 10.0;
  double min_multiplier = 0.25;
  double recovery_fraction = 0.5;  // share of the gap to 1.0 recovered per clean window

  void validate() const;
};

enum class IctTrigger { gap_time, gap_distance, followup };
enum class IctOutcome { completed, missed, voided_by_demand };

struct IctPrompt {
  std::uint64_t prompt_id = 0;
  IctTrigger trigger = IctTrigger::gap_time;
  Timestamp issued_at = 0;
  Timestamp deadline = 0;
  bool is_followup = false;
  std::optional<std::uint64_t> follows;  // the missed prompt a follow-up repeats
};

struct IctRecord {
  std::uint64_t prompt_id = 0;
  IctTrigger trigger = IctTrigger::gap_time;
  IctOutcome outcome = IctOutcome::completed;
  std::optional<double> response_latency_s;
  std::optional<std::uint64_t> follows;
  Timestamp resolved_at = 0;
};

enum class InterventionAction { contact_support, start_video_stream, hmi_alert };

struct Intervention {
  std::uint64_t prompt_id = 0;  // the missed follow-up
  Timestamp t = 0;
  std::array<InterventionAction, 3> actions{InterventionAction::contact_support,
                                            InterventionAction::start_video_stream,
                                            InterventionAction::hmi_alert};
  bool pull_over = false;
};

struct IctResolution {
  IctRecord record;
  std::optional<IctPrompt> followup;
  std::optional<Intervention> intervention;
};

struct OutcomeSignal {
  enum class Kind { responded, deadline_passed, demand_rose };
  Kind kind = Kind::responded;
  double latency_s = 0.0;  // responded only

  static OutcomeSignal responded(double latency) { return {Kind::responded, latency}; }
  static OutcomeSignal deadline_passed() { return {Kind::deadline_passed, 0.0}; }
  static OutcomeSignal demand_rose() { return {Kind::demand_rose, 0.0}; }
};

struct IctSchedulerState {
  Timestamp last_interactivity_time = 0;
  double last_interactivity_odometer = 0.0;
  std::optional<IctPrompt> pending;
  std::deque<IctRecord> recent_outcomes;  // bounded to the adaptation window
  double frequency_multiplier = 1.0;
  std::optional<double> jitter_factor;  // drawn once per prompt decision
  int interventions_this_shift = 0;
  std::uint64_t next_prompt_id = 1;
};

// Per-specialist ICT state machine. Single writer.
class IctScheduler {
 public:
  explicit IctScheduler(IctConfig cfg = {});

  // Resets the gap baselines. A pending prompt survives unless demand is high,
  // in which case it is voided and the voided record returned.
  std::optional<IctRecord> record_interactivity(Timestamp now, double odometer,
                                                bool demand_high = false);

  std::optional<IctPrompt> tick(Timestamp now, double odometer, bool demand_high, Rng& rng);

  IctResolution resolve(Timestamp now, double odometer, OutcomeSignal signal);

  // Adjusts the frequency multiplier from the recent outcome window.
  void adapt();

  // Starts a new shift: clears the intervention tally and gap baselines.
  void begin_shift(Timestamp now, double odometer);

  double miss_rate() const;

  const IctSchedulerState& state() const { return state_; }
  const IctConfig& config() const { return cfg_; }

 private:
  void push_outcome(const IctRecord& r);
  IctPrompt issue(IctTrigger trigger, Timestamp now, bool followup,
                  std::optional<std::uint64_t> follows);

  IctConfig cfg_;
  IctSchedulerState state_;
};

// ---------------------------------------------------------------------------
// Secondary alerts

enum class TransitionCause { button, pedal, steering, brake };

struct SaDecisionInput {
  TransitionCause cause = TransitionCause::button;
  double speed_mps = 0.0;
  bool input_before = false;
  bool input_after = false;
  bool emergency = false;
};

struct SaConfig {
  double weight_pedal = 0.5;
  double weight_steering_brake = 0.35;
  double weight_button = 0.1;
  double no_input_before = 0.2;
  double no_input_after = 0.2;
  double high_speed = 0.1;
  double high_speed_mps = 15.0;
  double threshold = 0.6;
  double issue_delay_s = 5.0;
  double clear_timeout_s = 10.0;

  void validate() const;
};

enum class SaAction { none, issue, suppress_emergency };

struct SaDecision {
  SaAction action = SaAction::none;
  double delay_s = 0.0;  // issue only
  double rationale_score = 0.0;
};

SaDecision sa_evaluate(const SaDecisionInput& input, const SaConfig& cfg);

enum class SaResolution { cleared, support_alerted };

struct IssuedSa {
  std::uint64_t sa_id = 0;
  Timestamp issued_at = 0;
};

// Issued-alert ledger; each issued alert resolves exactly once.
class SaTracker {
 public:
  explicit SaTracker(SaConfig cfg = {});

  IssuedSa issue(const SaDecision& decision, Timestamp transition_at);

  // input_within_s: seconds from issuance to the specialist's clearing input,
  // or nullopt when no input arrived.
  SaResolution resolve(std::uint64_t sa_id, std::optional<double> input_within_s);

  std::size_t open_count() const { return open_.size(); }

 private:
  SaConfig cfg_;
  std::uint64_t next_id_ = 1;
  std::set<std::uint64_t> open_;
};

std::string_view to_string(IctTrigger t);
std::string_view to_string(IctOutcome o);
std::string_view to_string(InterventionAction a);
std::string_view to_string(TransitionCause c);
std::string_view to_string(SaAction a);
std::string_view to_string(SaResolution r);
TransitionCause transition_cause_from_string(std::string_view s);

nlohmann::json to_json(const IctPrompt& p);
nlohmann::json to_json(const IctRecord& r);
nlohmann::json to_json(const Intervention& i);

}  // namespace frm::engagement
