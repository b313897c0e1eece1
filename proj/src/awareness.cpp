#include "frm/awareness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "frm/error.hpp"

namespace frm::awareness {

void PfsPolicy::validate() const {
  if (threshold < 1 || threshold > 9) throw ValidationError("PFS threshold must lie in 1..9");
  if (cadence_s <= 0 || followup_due_s < 0) throw ValidationError("PFS timings must be positive");
}

PfsOutcome pfs_outcome(int kss, bool is_followup, const PfsPolicy& policy) {
  if (kss < 1 || kss > 9) throw ValidationError("KSS must lie in 1..9");
  PfsOutcome out;
  if (kss < policy.threshold) return out;
  if (is_followup) {
    out.action = PfsAction::supervisor_outreach;
    out.tips = policy.tips;
  } else {
    out.action = PfsAction::suggest_break_and_followup;
  }
  return out;
}

PfsLedger::PfsLedger(PfsPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

std::pair<PfsRecord, PfsOutcome> PfsLedger::submit(const std::string& specialist_id, int kss,
                                                   Timestamp now, bool is_followup,
                                                   std::optional<std::uint64_t> follows,
                                                   int shift_index) {
  PfsOutcome outcome = pfs_outcome(kss, is_followup, policy_);
  if (is_followup) {
    const auto it = std::find_if(records_.begin(), records_.end(), [&](const PfsRecord& r) {
      return follows && r.record_id == *follows;
    });
    if (it == records_.end() || it->specialist_id != specialist_id || it->t > now)
      throw ValidationError("follow-up survey must reference an earlier record of the same specialist");
  } else if (follows) {
    throw ValidationError("only follow-up surveys reference a triggering record");
  }
  PfsRecord rec;
  rec.record_id = records_.size() + 1;
  rec.specialist_id = specialist_id;
  rec.t = now;
  rec.kss = kss;
  rec.is_followup = is_followup;
  rec.follows = follows;
  rec.shift_index = shift_index;
  records_.push_back(rec);
  return {std::move(rec), std::move(outcome)};
}

void PfsLedger::link_break(std::uint64_t record_id, std::uint64_t break_id) {
  if (record_id == 0 || record_id > records_.size()) throw ValidationError("unknown PFS record");
  records_[record_id - 1].linked_break = break_id;
}

int count_crossings(std::span<const int> series, int threshold) {
  int n = 0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i - 1] < threshold && series[i] >= threshold) ++n;
  }
  return n;
}

TrendSummary pfs_trend(std::span<const PfsRecord> records, TrendWindow window, int threshold) {
  std::vector<const PfsRecord*> in;
  for (const auto& r : records) {
    if (r.t >= window.from && r.t < window.to) in.push_back(&r);
  }
  TrendSummary out;
  if (in.empty()) return out;

  // Per-specialist streams for crossings; the summary itself is not keyed by id.
  std::sort(in.begin(), in.end(), [](const PfsRecord* a, const PfsRecord* b) {
    return std::tie(a->specialist_id, a->t, a->record_id) <
           std::tie(b->specialist_id, b->t, b->record_id);
  });
  std::map<int, int> crossings_by_shift;
  for (std::size_t i = 1; i < in.size(); ++i) {
    if (in[i]->specialist_id == in[i - 1]->specialist_id && in[i - 1]->kss < threshold &&
        in[i]->kss >= threshold) {
      ++out.crossings;
      ++crossings_by_shift[in[i]->shift_index];
    }
  }

  std::stable_sort(in.begin(), in.end(), [](const PfsRecord* a, const PfsRecord* b) {
    return std::tie(a->shift_index, a->t) < std::tie(b->shift_index, b->t);
  });
  long total = 0;
  for (const PfsRecord* r : in) {
    if (out.shifts.empty() || out.shifts.back().shift_index != r->shift_index) {
      out.shifts.push_back({r->shift_index, {}, 0.0, 0, crossings_by_shift[r->shift_index]});
    }
    out.shifts.back().series.push_back(r->kss);
    total += r->kss;
    out.max = std::max(out.max, r->kss);
  }
  for (auto& s : out.shifts) {
    long sum = 0;
    for (int v : s.series) {
      sum += v;
      s.max = std::max(s.max, v);
    }
    s.mean = static_cast<double>(sum) / static_cast<double>(s.series.size());
  }
  out.count = in.size();
  out.mean = static_cast<double>(total) / static_cast<double>(in.size());
  return out;
}

std::string trend_csv(const TrendSummary& summary) {
  std::ostringstream os;
  os << "shift,count,mean_kss,max_kss,crossings\n";
  char buf[32];
  for (const auto& s : summary.shifts) {
    std::snprintf(buf, sizeof buf, "%.4f", s.mean);
    os << s.shift_index << ',' << s.series.size() << ',' << buf << ',' << s.max << ','
       << s.crossings << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.4f", summary.mean);
  os << "all," << summary.count << ',' << buf << ',' << summary.max << ',' << summary.crossings
     << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ConcernTicket& t) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& [status, at] : t.history) history.push_back({to_string(status), at});
  nlohmann::json j{{"ticket_id", t.ticket_id},
                   {"channel", to_string(t.channel)},
                   {"anonymous", t.anonymous},
                   {"payload", t.payload},
                   {"status", to_string(t.status)},
                   {"history", std::move(history)}};
  if (!t.anonymous && t.specialist_id) j["specialist"] = *t.specialist_id;
  return j;
}

ConcernTicket ticket_from_json(const nlohmann::json& j) {
  ConcernTicket t;
  t.ticket_id = j.at("ticket_id").get<std::uint64_t>();
  t.channel = channel_from_string(j.at("channel").get<std::string>());
  t.anonymous = j.at("anonymous").get<bool>();
  t.payload = j.at("payload").get<std::string>();
  auto status_from = [](const std::string& s) {
    for (auto st : {TicketStatus::open, TicketStatus::assessed, TicketStatus::resolved}) {
      if (to_string(st) == s) return st;
    }
    throw ParseError("unknown ticket status: " + s);
  };
  t.status = status_from(j.at("status").get<std::string>());
  for (const auto& h : j.at("history")) {
    t.history.emplace_back(status_from(h.at(0).get<std::string>()), h.at(1).get<Timestamp>());
  }
  if (j.contains("specialist")) {
    if (t.anonymous) throw ParseError("anonymous ticket carries an identity");
    t.specialist_id = j.at("specialist").get<std::string>();
  }
  return t;
}

ConcernTicket& ConcernLedger::open_concern(Channel channel, std::string payload, bool anonymous,
                                           std::optional<std::string> specialist_id,
                                           Timestamp now) {
  if (channel == Channel::anonymous_survey && !anonymous)
    throw ValidationError("the anonymous survey channel only accepts anonymous tickets");
  if (channel == Channel::supervisor_direct && anonymous)
    throw ValidationError("supervisor-direct tickets are identified");
  ConcernTicket t;
  t.ticket_id = next_id_++;
  t.channel = channel;
  t.anonymous = anonymous;
  if (!anonymous) t.specialist_id = std::move(specialist_id);
  t.payload = std::move(payload);
  t.history.emplace_back(TicketStatus::open, now);
  return tickets_.emplace(t.ticket_id, std::move(t)).first->second;
}

ConcernTicket& ConcernLedger::find(std::uint64_t id) {
  const auto it = tickets_.find(id);
  if (it == tickets_.end()) throw ValidationError("unknown ticket " + std::to_string(id));
  return it->second;
}

ConcernTicket& ConcernLedger::assess(std::uint64_t id, Timestamp now) {
  auto& t = find(id);
  if (t.status != TicketStatus::open) throw ValidationError("only open tickets can be assessed");
  t.status = TicketStatus::assessed;
  t.history.emplace_back(t.status, now);
  return t;
}

ConcernTicket& ConcernLedger::resolve(std::uint64_t id, Timestamp now) {
  auto& t = find(id);
  if (t.status != TicketStatus::assessed) throw ValidationError("tickets must be assessed before resolution");
  t.status = TicketStatus::resolved;
  t.history.emplace_back(t.status, now);
  return t;
}

// ---------------------------------------------------------------------------

AgreementReport cross_check_dms_vs_pfs(std::span<const vigilance::DmsFlag> flags,
                                       std::span<const PfsRecord> records, Timestamp window_s,
                                       int threshold) {
  AgreementReport rep;
  for (const auto& r : records) {
    if (r.kss < threshold) continue;
    const bool hit = std::any_of(flags.begin(), flags.end(), [&](const vigilance::DmsFlag& f) {
      return f.specialist_id == r.specialist_id && f.t <= r.t && r.t - f.t <= window_s;
    });
    hit ? ++rep.hits : ++rep.misses;
  }
  for (const auto& f : flags) {
    const bool confirmed = std::any_of(records.begin(), records.end(), [&](const PfsRecord& r) {
      return r.kss >= threshold && r.specialist_id == f.specialist_id && f.t <= r.t &&
             r.t - f.t <= window_s;
    });
    if (!confirmed) ++rep.false_alarms;
  }
  return rep;
}

std::string_view to_string(PfsAction a) {
  switch (a) {
    case PfsAction::none: return "none";
    case PfsAction::suggest_break_and_followup: return "suggest_break_and_followup";
    case PfsAction::supervisor_outreach: return "supervisor_outreach";
  }
  return "none";
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::supervisor_direct: return "supervisor_direct";
    case Channel::anonymous_survey: return "anonymous_survey";
    case Channel::field_safety_program: return "field_safety_program";
  }
  return "supervisor_direct";
}

std::string_view to_string(TicketStatus s) {
  switch (s) {
    case TicketStatus::open: return "open";
    case TicketStatus::assessed: return "assessed";
    case TicketStatus::resolved: return "resolved";
  }
  return "open";
}

Channel channel_from_string(std::string_view s) {
  for (auto c : {Channel::supervisor_direct, Channel::anonymous_survey, Channel::field_safety_program}) {
    if (to_string(c) == s) return c;
  }
  throw ParseError("unknown concern channel: " + std::string(s));
}

}  // namespace frm::awareness
