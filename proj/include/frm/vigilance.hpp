#pragma once

// Real-time vigilance assessment: a stochastic stand-in for a camera-based
// driver monitoring system, blinded observer rating tasks, two escalation
// routes with multi-rater validation, and rater reliability/qualification.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "frm/rng.hpp"

namespace frm::vigilance {

using Timestamp = std::int64_t;  // simulated seconds

struct DmsConfig {
  int detect_threshold_ord = 4;
  double false_positive_rate = 0.02;
  double false_negative_rate = 0.10;
  int observation_period_s = 60;

  void validate() const;
};

struct DmsFlag {
  std::uint64_t flag_id = 0;
  std::string specialist_id;
  Timestamp t = 0;
};

// True when the sensor emits a flag for one observation of the given truth.
bool dms_fires(int true_ord, const DmsConfig& cfg, Rng& rng);

// dms_fires wrapped with flag identity bookkeeping.
class DmsMonitor {
 public:
  explicit DmsMonitor(DmsConfig cfg);
  std::optional<DmsFlag> observe(const std::string& specialist_id, Timestamp t, int true_ord,
                                 Rng& rng);
  const DmsConfig& config() const { return cfg_; }

 private:
  DmsConfig cfg_;
  std::uint64_t next_id_ = 1;
};

enum class Modality { tone, vibration, light };

struct AlertEvent {
  std::uint64_t flag_id = 0;
  std::string specialist_id;
  Timestamp t = 0;
  std::array<Modality, 3> modalities{Modality::tone, Modality::vibration, Modality::light};
};

// One multimodal alert per flag; a repeated flag id is rejected.
class AlertIssuer {
 public:
  AlertEvent issue(const DmsFlag& flag);

 private:
  std::set<std::uint64_t> issued_;
};

// ---------------------------------------------------------------------------
// Rating vocabulary

enum class IndicatorCategory { eyes, face_head, body };

enum class Indicator : std::uint8_t {
  fast_blinking,
  short_glances,
  occasional_movement,
  less_sharp_looks,
  longer_glances,
  slower_blinks,
  face_rubbing,
  eye_rubbing,
  scratching,
  facial_contortions,
  restless_movements,
  subdued_appearance,
  fixed_stare,
  eyelid_closure_2s,
  eye_rolling,
  lack_of_activity,
  eyelid_closure_4s,
  inactivity_periods,
  dozing_body_movements,
};

enum class Observation : std::uint8_t { device_use, hands_placement };

struct IndicatorInfo {
  Indicator id;
  std::string_view name;
  IndicatorCategory category;
  int level;  // ORD level the mannerism characterises
};

std::span<const IndicatorInfo> indicator_vocabulary();
const IndicatorInfo& indicator_info(Indicator i);
std::optional<Indicator> indicator_from_name(std::string_view name);
std::string_view to_string(IndicatorCategory c);
std::string_view to_string(Observation o);

// Inclusion probabilities used when a rater ticks checklist items.
struct IndicatorEmission {
  double own_level = 0.7;
  double adjacent_level = 0.2;
  double device_use = 0.02;
  double hands_placement = 0.1;
};

// ---------------------------------------------------------------------------
// Raters and tasks

struct RaterProfile {
  std::string rater_id;
  double bias = 0.0;      // signed, in levels
  double noise_sd = 0.0;  // in levels
  bool qualified = false;
};

struct FeedRef {
  std::string specialist_id;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
};

// A rating assignment. Deliberately carries nothing about why the feed is
// being rated.
struct RatingTask {
  std::uint64_t task_id = 0;
  FeedRef feed;
  std::vector<std::string> assigned_rater_ids;
};

nlohmann::json to_json(const RatingTask& task);

enum class FeedOrigin { periodic, escalated };

struct FeedRequest {
  FeedRef feed;
  FeedOrigin origin = FeedOrigin::periodic;
};

class TaskIdSource {
 public:
  std::uint64_t next() { return next_++; }

 private:
  std::uint64_t next_ = 1;
};

// Escalated feeds go to k distinct qualified raters, periodic feeds to one.
// Throws ValidationError when the pool cannot cover a request.
std::vector<RatingTask> assign_rating_tasks(std::span<const RaterProfile> pool,
                                            std::span<const FeedRequest> feeds, int k, Rng& rng,
                                            TaskIdSource& ids);

struct OrdRating {
  std::string rater_id;
  std::uint64_t task_id = 0;
  int level = 1;
  std::vector<Indicator> indicators;
  std::vector<Observation> observations;
  Timestamp t = 0;
};

nlohmann::json to_json(const OrdRating& rating);

// Throws ValidationError if the rater is not qualified.
OrdRating rate(const RaterProfile& rater, const RatingTask& task, int true_ord, Rng& rng,
               const IndicatorEmission& emission = {});

// Median level, taking the higher middle value for even counts.
int aggregate(std::span<const OrdRating> ratings);

// ---------------------------------------------------------------------------
// Escalation

enum class Route { route_one, route_two };
enum class Trigger { dms_flag, single_high_rating };
enum class Resolution { confirmed, not_confirmed };
enum class SupervisorAction { check_in, invite_break, retrieve_vehicle };

struct EscalationCase {
  std::uint64_t case_id = 0;
  std::string specialist_id;
  Route route = Route::route_one;
  Trigger trigger = Trigger::dms_flag;
  std::uint64_t trigger_ref = 0;  // flag id or rating task id
  Timestamp opened_at = 0;
  std::optional<AlertEvent> alert;  // route one
  std::optional<SupervisorAction> supervisor_action;  // immediate, route two
  std::optional<Timestamp> supervisor_action_at;
  RatingTask validation_task;
  std::vector<OrdRating> validation_ratings;
  int validated_level = 0;
  Resolution resolution = Resolution::not_confirmed;
  std::optional<SupervisorAction> followup_action;  // after validation
  Timestamp resolved_at = 0;
};

nlohmann::json to_json(const EscalationCase& c);

struct EscalationPolicy {
  int validation_raters = 3;
  int high_rating_threshold = 4;  // route two entry level
  int confirm_threshold = 4;
  int rating_delay_s = 90;
  IndicatorEmission emission;
};

// Case numbering plus the multimodal alert ledger.
class EscalationDesk {
 public:
  explicit EscalationDesk(EscalationPolicy policy);

  // Alert the specialist, then validate the flag with k blinded raters.
  EscalationCase run_route_one(const DmsFlag& flag, std::span<const RaterProfile> pool,
                               int true_ord, Rng& rng, TaskIdSource& ids);

  // Supervisor checks in immediately; additional raters validate the rating.
  EscalationCase run_route_two(const OrdRating& single_rating, const FeedRef& feed,
                               std::span<const RaterProfile> pool, int true_ord, Rng& rng,
                               TaskIdSource& ids);

  const EscalationPolicy& policy() const { return policy_; }

 private:
  void validate(EscalationCase& c, std::span<const RaterProfile> pool,
                const std::optional<std::string>& exclude_rater, int true_ord, Rng& rng,
                TaskIdSource& ids, Timestamp feed_time);

  EscalationPolicy policy_;
  AlertIssuer alerts_;
  std::uint64_t next_case_ = 1;
};

// A specialist's own high-fatigue flag takes precedence over a validation
// still in flight.
bool self_flag_preempts(const EscalationCase& c, Timestamp self_flag_t);

// ---------------------------------------------------------------------------
// Reliability and qualification

// Linearly weighted Cohen's kappa between two raters over 1..5 levels.
double weighted_kappa(std::span<const int> a, std::span<const int> b);

// Mean pairwise weighted kappa over rater pairs that share at least one task.
// Throws ValidationError when no pair shares a task.
double inter_rater_reliability(std::span<const OrdRating> history);

struct VettedItem {
  int true_ord = 1;
  std::vector<Indicator> expected_indicators;
};

struct QualificationPolicy {
  double min_exact_fraction = 0.8;
  double max_mean_abs_error = 0.5;
};

struct QualificationResult {
  bool passed = false;
  double exact_fraction = 0.0;
  double mean_abs_error = 0.0;
  double indicator_recall = 0.0;  // informational
};

QualificationResult qualify_rater(const RaterProfile& rater, std::span<const VettedItem> test_set,
                                  const QualificationPolicy& policy, Rng& rng,
                                  const IndicatorEmission& emission = {});

// Two items per level, each expecting that level's first indicator.
std::vector<VettedItem> default_vetted_test_set();

std::string_view to_string(Route r);
std::string_view to_string(Trigger t);
std::string_view to_string(Resolution r);
std::string_view to_string(SupervisorAction a);
std::string_view to_string(Modality m);

}  // namespace frm::vigilance
