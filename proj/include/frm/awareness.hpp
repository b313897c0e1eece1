#pragma once

// Periodic fatigue surveys (KSS self-reports), cohort trend summaries,
// concern-escalation tickets, and the DMS-versus-self-report cross check.
//
// Self-reports never feed the formal drowsiness rating; vigilance::aggregate
// only accepts observer ratings.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "frm/vigilance.hpp"

namespace frm::awareness {

using Timestamp = std::int64_t;

// Each KSS value describes the 5 minutes before the survey started.
constexpr int kPfsRecallWindowS = 300;

struct PfsRecord {
  std::uint64_t record_id = 0;
  std::string specialist_id;
  Timestamp t = 0;
  int kss = 1;
  bool is_followup = false;
  std::optional<std::uint64_t> follows;  // triggering record of a follow-up
  std::optional<std::uint64_t> linked_break;
  int shift_index = 0;
};

enum class PfsAction { none, suggest_break_and_followup, supervisor_outreach };

struct PfsOutcome {
  PfsAction action = PfsAction::none;
  std::vector<std::string> tips;
};

struct PfsPolicy {
  int threshold = 6;
  int cadence_s = 7200;
  int followup_due_s = 300;  // after the break ends
  std::vector<std::string> tips{
      "stand up and stretch during the break",
      "take a short brisk walk",
      "have a conversation with a colleague",
      "hydrate and get some fresh air",
  };

  void validate() const;
};

// Total over kss 1..9 x {first, follow-up}; throws ValidationError otherwise.
PfsOutcome pfs_outcome(int kss, bool is_followup, const PfsPolicy& policy = {});

class PfsLedger {
 public:
  explicit PfsLedger(PfsPolicy policy = {});

  // Follow-ups must name an earlier record of the same specialist.
  std::pair<PfsRecord, PfsOutcome> submit(const std::string& specialist_id, int kss, Timestamp now,
                                          bool is_followup,
                                          std::optional<std::uint64_t> follows = std::nullopt,
                                          int shift_index = 0);

  void link_break(std::uint64_t record_id, std::uint64_t break_id);

  const std::vector<PfsRecord>& records() const { return records_; }
  const PfsPolicy& policy() const { return policy_; }

 private:
  PfsPolicy policy_;
  std::vector<PfsRecord> records_;
};

struct ShiftTrend {
  int shift_index = 0;
  std::vector<int> series;  // cohort KSS values in time order
  double mean = 0.0;
  int max = 0;
  int crossings = 0;
};

struct TrendSummary {
  std::vector<ShiftTrend> shifts;
  std::size_t count = 0;
  double mean = 0.0;
  int max = 0;
  int crossings = 0;  // upward crossings of the threshold, per specialist stream

  bool empty() const { return count == 0; }
};

struct TrendWindow {
  Timestamp from = 0;
  Timestamp to = 0;  // exclusive
};

// Cohort-level summary; never keyed by specialist.
TrendSummary pfs_trend(std::span<const PfsRecord> records, TrendWindow window, int threshold = 6);

// Upward crossings of the threshold in a single time-ordered series.
int count_crossings(std::span<const int> series, int threshold);

std::string trend_csv(const TrendSummary& summary);

// ---------------------------------------------------------------------------

enum class Channel { supervisor_direct, anonymous_survey, field_safety_program };
enum class TicketStatus { open, assessed, resolved };

struct ConcernTicket {
  std::uint64_t ticket_id = 0;
  Channel channel = Channel::supervisor_direct;
  bool anonymous = false;
  std::optional<std::string> specialist_id;  // never set when anonymous
  std::string payload;
  TicketStatus status = TicketStatus::open;
  std::vector<std::pair<TicketStatus, Timestamp>> history;
};

nlohmann::json to_json(const ConcernTicket& t);
ConcernTicket ticket_from_json(const nlohmann::json& j);

class ConcernLedger {
 public:
  ConcernTicket& open_concern(Channel channel, std::string payload, bool anonymous,
                              std::optional<std::string> specialist_id, Timestamp now);
  ConcernTicket& assess(std::uint64_t ticket_id, Timestamp now);
  ConcernTicket& resolve(std::uint64_t ticket_id, Timestamp now);

  const std::map<std::uint64_t, ConcernTicket>& tickets() const { return tickets_; }

 private:
  ConcernTicket& find(std::uint64_t id);

  std::map<std::uint64_t, ConcernTicket> tickets_;
  std::uint64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------

struct AgreementReport {
  int hits = 0;          // high self-report with a DMS flag shortly before
  int misses = 0;        // high self-report, no flag in the window
  int false_alarms = 0;  // flag with no high self-report shortly after
};

AgreementReport cross_check_dms_vs_pfs(std::span<const vigilance::DmsFlag> flags,
                                       std::span<const PfsRecord> records, Timestamp window_s,
                                       int threshold = 6);

std::string_view to_string(PfsAction a);
std::string_view to_string(Channel c);
std::string_view to_string(TicketStatus s);
Channel channel_from_string(std::string_view s);

}  // namespace frm::awareness
