#pragma once

// Run metrics, computed only from the event log so that a persisted log
// reproduces them exactly.

#include <string>
#include <utility>
#include <vector>

#include "frm/event_log.hpp"

namespace frm::sim {

struct SessionBucket {
  int sessions = 0;
  int with_incautious = 0;

  double fraction() const { return sessions ? double(with_incautious) / sessions : 0.0; }
};

struct Metrics {
  double time_at_ord_ge4_min = 0.0;
  int fatigue_event_count = 0;  // on-task onsets of true ORD >= 4
  int detected_events = 0;
  double mean_detection_latency_s = 0.0;  // over detected events
  int interventions = 0;
  int pull_overs = 0;
  int breaks_invited = 0;
  int breaks_impromptu = 0;
  int breaks_scheduled = 0;
  int invitations_declined = 0;
  int reassignments = 0;
  int incautious_events = 0;
  double on_task_min = 0.0;
  double incautious_event_rate = 0.0;  // events per on-task minute
  SessionBucket sessions_lt15;
  SessionBucket sessions_15to30;
  SessionBucket sessions_gt30;
  int escalations = 0;
  int escalations_confirmed = 0;
  int ict_prompts = 0;
  int ict_missed = 0;
  int sa_issued = 0;
  int pfs_reports = 0;
  int concern_tickets = 0;

  // (name, value) in a fixed order; the CSV and the acceptance checks use these.
  std::vector<std::pair<std::string, double>> rows() const;
  double get(const std::string& name) const;  // throws std::out_of_range
};

// Throws ParseError on records missing the fields a metric needs.
Metrics compute_metrics(const EventLog& log);

std::string metrics_csv(const Metrics& m, const std::string& config_hash, std::uint64_t seed);

// Conservation and ordering violations; empty when the log is sound.
std::vector<std::string> check_conservation(const EventLog& log);

}  // namespace frm::sim
