#pragma once

// Adaptive scheduling: forward-rotation planning and validation, smart breaks
// (self-initiated and invited), auxiliary task reassignment, and the
// specialist qualification lifecycle.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace frm::scheduling {

using Timestamp = std::int64_t;

constexpr int kMinutesPerDay = 1440;
constexpr int kMaxShiftMinutes = 14 * 60;

// "HH:MM" <-> minutes from midnight. parse_clock throws ParseError.
int parse_clock(std::string_view text);
std::string format_clock(int minutes);

struct ScheduledBreak {
  int offset_min = 0;  // from shift start
  int duration_min = 0;
};

struct ShiftSpec {
  int day_index = 0;
  int start_min = 0;  // minutes from midnight
  int end_min = 0;    // may wrap past midnight
  std::vector<ScheduledBreak> breaks;

  int duration_min() const;
  void validate() const;  // throws ValidationError
};

enum class Direction { forward, backward, none };

struct TransitionAnnotation {
  Direction direction = Direction::none;
  int step_min = 0;
  int extended_rest_min = 0;
};

// transitions[i] annotates the move from shifts[i] to shifts[i + 1].
struct RotationPlan {
  std::vector<ShiftSpec> shifts;
  std::vector<TransitionAnnotation> transitions;
};

struct RotationConstraints {
  int max_forward_step_per_day = 120;
  int min_extended_rest = 2880;
  int min_inter_shift_rest = 600;

  void validate() const;
};

// Later target: daily forward steps of at most max_forward_step_per_day.
// Earlier target: one backward move separated by min_extended_rest of time off.
RotationPlan plan_rotation(int current_start, int target_start, const RotationConstraints& c,
                           int shift_length_min = 480);

// Next-day jump straight to the target with no extended rest. Used to show
// what an unplanned change looks like to the validator.
RotationPlan direct_transition(int current_start, int target_start, int shift_length_min = 480);

struct Violation {
  std::size_t transition = 0;
  std::string kind;  // forward_step | backward_rest | inter_shift_rest | annotation | shift
  std::string detail;
};

std::vector<Violation> validate_rotation(const RotationPlan& plan, const RotationConstraints& c);

// Record format: header line then one row per shift:
//   day,start,end,direction,step_min,extended_rest_min
// The first row carries direction "none"; later rows carry the annotation of
// the transition into that shift.
std::string export_plan_csv(const RotationPlan& plan);
RotationPlan import_plan_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Smart breaks

struct BreakSignalBundle {
  std::optional<int> latest_pfs_kss;
  bool dms_flag_recent = false;  // a DMS flag confirmed by raters
  std::optional<int> rater_level_recent;  // validated level
  double ict_miss_rate_window = 0.0;
};

struct InvitedBreakPolicy {
  int kss_threshold = 6;
  int rater_level_threshold = 4;
  double ict_miss_rate_threshold = 0.3;
  int cooldown_s = 3600;
  int duration_s = 900;
  double acceptance_probability = 0.9;

  void validate() const;
};

enum class BreakReason { self_report, rater_validated, dms_confirmed, ict_performance };

// Triggers that fire for a bundle, in a fixed order.
std::vector<BreakReason> break_triggers(const BreakSignalBundle& signals,
                                        const InvitedBreakPolicy& policy);

struct InvitedBreak {
  Timestamp t = 0;
  std::vector<BreakReason> reasons;
  int duration_s = 0;
};

// Invited-break debounce: at most one invitation per cool-down window.
class InvitedBreakGate {
 public:
  std::optional<InvitedBreak> evaluate(const BreakSignalBundle& signals,
                                       const InvitedBreakPolicy& policy, Timestamp now);

 private:
  std::optional<Timestamp> last_;
};

enum class Assignment { none, driving, auxiliary };

struct DutyStatus {
  std::string specialist_id;
  bool on_shift = false;
  Assignment assignment = Assignment::none;
};

enum class BreakInitiator { self, invited, scheduled };

struct BreakEvent {
  std::uint64_t break_id = 0;
  std::string specialist_id;
  Timestamp t = 0;
  BreakInitiator initiator = BreakInitiator::self;
  int duration_s = 0;
};

class BreakLedger {
 public:
  // Always granted while on shift, at any reported sleepiness; never debounced.
  BreakEvent request_impromptu(const DutyStatus& duty, Timestamp now, int duration_s);
  BreakEvent record(const DutyStatus& duty, Timestamp now, BreakInitiator initiator,
                    int duration_s);

 private:
  std::uint64_t next_id_ = 1;
};

struct AssignmentChange {
  std::string specialist_id;
  Assignment from = Assignment::driving;
  Assignment to = Assignment::auxiliary;
  std::string reason;
  bool vehicle_restaffed = true;
};

// Moves a specialist off the vehicle onto non-safety-critical work. Carries no
// lifecycle consequence.
AssignmentChange reassign_auxiliary(DutyStatus& duty, std::string reason);

// ---------------------------------------------------------------------------
// Lifecycle

enum class Stage { trainee, dual_qualified, single_qualified, retraining, suspended };

struct LifecyclePolicy {
  int severe_threshold = 3;
  int any_threshold = 6;
  Timestamp window_s = 30LL * 86400;

  void validate() const;
};

struct FatigueEventCounts {
  int frequent = 0;  // all severities
  int severe = 0;
};

enum class LifecycleEventKind {
  training_complete,
  gateway_passed,
  fatigue_event,
  supportive_actions_exhausted,
  retraining_complete,
};

struct LifecycleEvent {
  LifecycleEventKind kind = LifecycleEventKind::fatigue_event;
  Timestamp t = 0;
  bool severe = false;  // fatigue_event only
};

struct SpecialistLifecycle {
  Stage stage = Stage::trainee;
  std::optional<Stage> return_stage;  // set while retraining
  std::deque<std::pair<Timestamp, bool>> fatigue_events;  // (time, severe)

  FatigueEventCounts counts(Timestamp now, const LifecyclePolicy& policy) const;
  bool may_drive() const;
};

// Throws ValidationError when the event is not valid for the current stage.
SpecialistLifecycle lifecycle_step(SpecialistLifecycle lc, const LifecycleEvent& event,
                                   const LifecyclePolicy& policy);

std::string_view to_string(Direction d);
std::string_view to_string(BreakReason r);
std::string_view to_string(Assignment a);
std::string_view to_string(BreakInitiator i);
std::string_view to_string(Stage s);
std::string_view to_string(LifecycleEventKind k);
Stage stage_from_string(std::string_view s);
LifecycleEventKind lifecycle_event_from_string(std::string_view s);

}  // namespace frm::scheduling
