#include "frm/metrics.hpp"

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "frm/error.hpp"

namespace frm::sim {

using nlohmann::json;

namespace {

struct Track {
  bool on_task = false;
  int ord = 1;
  std::int64_t since = 0;
  std::optional<std::int64_t> session_start;
  bool session_incautious = false;
  bool episode = false;
  std::optional<std::int64_t> undetected_onset;
};

template <class T>
T field(const Record& r, const char* key, std::size_t index) {
  try {
    return r.data.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("record " + std::to_string(index + 1) + " (" + r.type + ") lacks field " + key,
                     static_cast<long>(index + 1));
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, double>> Metrics::rows() const {
  return {
      {"time_at_ord_ge4_min", time_at_ord_ge4_min},
      {"fatigue_event_count", fatigue_event_count},
      {"detected_events", detected_events},
      {"mean_detection_latency_s", mean_detection_latency_s},
      {"interventions", interventions},
      {"pull_overs", pull_overs},
      {"breaks_invited", breaks_invited},
      {"breaks_impromptu", breaks_impromptu},
      {"breaks_scheduled", breaks_scheduled},
      {"invitations_declined", invitations_declined},
      {"reassignments", reassignments},
      {"incautious_events", incautious_events},
      {"on_task_min", on_task_min},
      {"incautious_event_rate", incautious_event_rate},
      {"sessions_lt15", sessions_lt15.sessions},
      {"sessions_15to30", sessions_15to30.sessions},
      {"sessions_gt30", sessions_gt30.sessions},
      {"p_incautious_lt15", sessions_lt15.fraction()},
      {"p_incautious_15to30", sessions_15to30.fraction()},
      {"p_incautious_gt30", sessions_gt30.fraction()},
      {"escalations", escalations},
      {"escalations_confirmed", escalations_confirmed},
      {"ict_prompts", ict_prompts},
      {"ict_missed", ict_missed},
      {"sa_issued", sa_issued},
      {"pfs_reports", pfs_reports},
      {"concern_tickets", concern_tickets},
  };
}

double Metrics::get(const std::string& name) const {
  for (const auto& [k, v] : rows())
    if (k == name) return v;
  throw std::out_of_range("unknown metric " + name);
}

Metrics compute_metrics(const EventLog& log) {
  Metrics m;
  std::map<std::string, Track> tracks;
  double ge4_s = 0.0;
  double on_task_s = 0.0;
  double latency_sum = 0.0;

  auto close_span = [&](Track& tr, std::int64_t t) {
    if (!tr.on_task) return;
    const double span = double(t - tr.since);
    on_task_s += span;
    if (tr.ord >= 4) ge4_s += span;
  };

  const auto& recs = log.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Record& r = recs[i];
    const std::string& type = r.type;
    if (type == "task_state") {
      Track& tr = tracks[r.sid];
      close_span(tr, r.t);
      const bool on = field<bool>(r, "on_task", i);
      const int ord = field<int>(r, "ord", i);
      if (on && !tr.on_task) {
        tr.session_start = r.t;
        tr.session_incautious = false;
      }
      if (!on && tr.on_task && tr.session_start) {
        const double minutes = double(r.t - *tr.session_start) / 60.0;
        SessionBucket* b = nullptr;
        if (minutes < 15.0) b = &m.sessions_lt15;
        else if (minutes <= 30.0) b = &m.sessions_15to30;
        else b = &m.sessions_gt30;
        ++b->sessions;
        if (tr.session_incautious) ++b->with_incautious;
        tr.session_start.reset();
      }
      const bool high = on && ord >= 4;
      if (high && !tr.episode) {
        ++m.fatigue_event_count;
        tr.undetected_onset = r.t;
      }
      if (ord < 4) tr.episode = false;
      if (high) tr.episode = true;
      tr.on_task = on;
      tr.ord = ord;
      tr.since = r.t;
    } else if (type == "incautious") {
      ++m.incautious_events;
      tracks[r.sid].session_incautious = true;
    } else if (type == "escalation_opened") {
      ++m.escalations;
    } else if (type == "escalation_resolved") {
      if (field<std::string>(r, "resolution", i) == "confirmed") {
        ++m.escalations_confirmed;
        Track& tr = tracks[r.sid];
        if (tr.undetected_onset) {
          latency_sum += double(r.t - *tr.undetected_onset);
          ++m.detected_events;
          tr.undetected_onset.reset();
        }
      }
    } else if (type == "ict_intervention") {
      ++m.interventions;
      if (field<bool>(r, "pull_over", i)) ++m.pull_overs;
    } else if (type == "break_start") {
      const auto who = field<std::string>(r, "initiator", i);
      if (who == "invited") ++m.breaks_invited;
      else if (who == "self") ++m.breaks_impromptu;
      else ++m.breaks_scheduled;
    } else if (type == "break_declined") {
      ++m.invitations_declined;
    } else if (type == "assignment") {
      if (field<std::string>(r, "to", i) == "auxiliary") ++m.reassignments;
    } else if (type == "ict_prompt") {
      ++m.ict_prompts;
    } else if (type == "ict_record") {
      if (field<std::string>(r, "outcome", i) == "missed") ++m.ict_missed;
    } else if (type == "sa_issued") {
      ++m.sa_issued;
    } else if (type == "pfs") {
      ++m.pfs_reports;
    } else if (type == "concern_opened") {
      ++m.concern_tickets;
    }
  }
  // A well-formed log closes every span; an open one is counted to its last record.
  if (!recs.empty()) {
    for (auto& [_, tr] : tracks) close_span(tr, recs.back().t);
  }

  m.time_at_ord_ge4_min = ge4_s / 60.0;
  m.on_task_min = on_task_s / 60.0;
  m.incautious_event_rate = m.on_task_min > 0.0 ? m.incautious_events / m.on_task_min : 0.0;
  m.mean_detection_latency_s = m.detected_events ? latency_sum / m.detected_events : 0.0;
  return m;
}

std::string metrics_csv(const Metrics& m, const std::string& config_hash, std::uint64_t seed) {
  std::string out = "config_hash,seed,metric,value\n";
  for (const auto& [k, v] : m.rows()) {
    out += config_hash + "," + std::to_string(seed) + "," + k + "," + fmt(v) + "\n";
  }
  return out;
}

std::vector<std::string> check_conservation(const EventLog& log) {
  std::vector<std::string> problems;
  std::map<std::string, int> prompts, sas, cases;
  std::int64_t last = INT64_MIN;
  const auto& recs = log.records();
  // Prompt ids are per specialist, so every key is qualified by the sid.
  auto id = [&](const Record& r, const char* key, std::size_t i) {
    return r.sid + ":" + std::to_string(field<std::uint64_t>(r, key, i));
  };
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Record& r = recs[i];
    if (r.t < last) problems.push_back("timestamp regression at record " + std::to_string(i + 1));
    last = r.t;
    if (r.type == "ict_prompt") {
      if (!prompts.emplace(id(r, "prompt_id", i), 0).second)
        problems.push_back("duplicate ict prompt " + id(r, "prompt_id", i));
    } else if (r.type == "ict_record") {
      auto it = prompts.find(id(r, "prompt_id", i));
      if (it == prompts.end()) problems.push_back("ict outcome without prompt");
      else ++it->second;
    } else if (r.type == "sa_issued") {
      sas.emplace(id(r, "sa_id", i), 0);
    } else if (r.type == "sa_resolved") {
      auto it = sas.find(id(r, "sa_id", i));
      if (it == sas.end()) problems.push_back("sa resolution without issuance");
      else ++it->second;
    } else if (r.type == "escalation_opened") {
      cases.emplace(id(r, "case_id", i), 0);
    } else if (r.type == "escalation_resolved") {
      auto it = cases.find(id(r, "case_id", i));
      if (it == cases.end()) problems.push_back("case resolution without opening");
      else ++it->second;
    }
  }
  auto check = [&](const std::map<std::string, int>& items, const char* what) {
    for (const auto& [k, n] : items) {
      if (n != 1)
        problems.push_back(std::string(what) + " " + k + " has " +
                           std::to_string(n) + " terminal records");
    }
  };
  check(prompts, "ict prompt");
  check(sas, "sa");
  check(cases, "escalation case");
  return problems;
}

}  // namespace frm::sim
