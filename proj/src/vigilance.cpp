#include "frm/vigilance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "frm/error.hpp"

namespace frm::vigilance {

namespace {

using enum Indicator;
using enum IndicatorCategory;

// Checklist items by the level they characterise (observer drowsiness scale).
constexpr std::array<IndicatorInfo, 19> kVocabulary{{
    {fast_blinking, "fast_blinking", eyes, 1},
    {short_glances, "short_glances", eyes, 1},
    {occasional_movement, "occasional_movement", body, 1},
    {less_sharp_looks, "less_sharp_looks", eyes, 2},
    {longer_glances, "longer_glances", eyes, 2},
    {slower_blinks, "slower_blinks", eyes, 2},
    {face_rubbing, "face_rubbing", face_head, 3},
    {eye_rubbing, "eye_rubbing", eyes, 3},
    {scratching, "scratching", body, 3},
    {facial_contortions, "facial_contortions", face_head, 3},
    {restless_movements, "restless_movements", body, 3},
    {subdued_appearance, "subdued_appearance", face_head, 3},
    {fixed_stare, "fixed_stare", eyes, 3},
    {eyelid_closure_2s, "eyelid_closure_2s", eyes, 4},
    {eye_rolling, "eye_rolling", eyes, 4},
    {lack_of_activity, "lack_of_activity", body, 4},
    {eyelid_closure_4s, "eyelid_closure_4s", eyes, 5},
    {inactivity_periods, "inactivity_periods", body, 5},
    {dozing_body_movements, "dozing_body_movements", body, 5},
}};

int clamp_level(double v) { return static_cast<int>(std::clamp(std::lround(v), 1L, 5L)); }

void require_level(int level, const char* what) {
  if (level < 1 || level > 5) throw ValidationError(std::string(what) + " must lie in 1..5");
}

OrdRating rate_unchecked(const RaterProfile& rater, const RatingTask& task, int true_ord, Rng& rng,
                         const IndicatorEmission& emission) {
  require_level(true_ord, "true ORD level");
  double perceived = true_ord + rater.bias;
  if (rater.noise_sd > 0.0) perceived += rng.normal(0.0, rater.noise_sd);

  OrdRating r;
  r.rater_id = rater.rater_id;
  r.task_id = task.task_id;
  r.level = clamp_level(perceived);
  r.t = task.feed.window_end;

  bool own_seen = false;
  for (const auto& item : kVocabulary) {
    const int distance = std::abs(item.level - r.level);
    const double p = distance == 0 ? emission.own_level
                     : distance == 1 ? emission.adjacent_level
                                     : 0.0;
    if (p > 0.0 && rng.bernoulli(p)) {
      r.indicators.push_back(item.id);
      own_seen = own_seen || distance == 0;
    }
  }
  if (!own_seen) {
    // A level is always backed by at least one of its own mannerisms.
    const auto first_own = std::find_if(kVocabulary.begin(), kVocabulary.end(),
                                        [&](const IndicatorInfo& i) { return i.level == r.level; });
    r.indicators.push_back(first_own->id);
    std::sort(r.indicators.begin(), r.indicators.end());
  }
  if (rng.bernoulli(emission.device_use)) r.observations.push_back(Observation::device_use);
  if (rng.bernoulli(emission.hands_placement)) r.observations.push_back(Observation::hands_placement);
  return r;
}

}  // namespace

void DmsConfig::validate() const {
  if (detect_threshold_ord < 2 || detect_threshold_ord > 5)
    throw ValidationError("DMS detect_threshold_ord must lie in 2..5");
  for (double p : {false_positive_rate, false_negative_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("DMS error rates must lie in [0,1]");
  }
  if (observation_period_s <= 0) throw ValidationError("DMS observation_period must be positive");
}

bool dms_fires(int true_ord, const DmsConfig& cfg, Rng& rng) {
  require_level(true_ord, "true ORD level");
  if (true_ord >= cfg.detect_threshold_ord) return rng.bernoulli(1.0 - cfg.false_negative_rate);
  return rng.bernoulli(cfg.false_positive_rate);
}

DmsMonitor::DmsMonitor(DmsConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<DmsFlag> DmsMonitor::observe(const std::string& specialist_id, Timestamp t,
                                           int true_ord, Rng& rng) {
  if (!dms_fires(true_ord, cfg_, rng)) return std::nullopt;
  return DmsFlag{next_id_++, specialist_id, t};
}

AlertEvent AlertIssuer::issue(const DmsFlag& flag) {
  if (!issued_.insert(flag.flag_id).second)
    throw ValidationError("alert already issued for flag " + std::to_string(flag.flag_id));
  AlertEvent e;
  e.flag_id = flag.flag_id;
  e.specialist_id = flag.specialist_id;
  e.t = flag.t;
  return e;
}

std::span<const IndicatorInfo> indicator_vocabulary() { return kVocabulary; }

const IndicatorInfo& indicator_info(Indicator i) { return kVocabulary[static_cast<std::size_t>(i)]; }

std::optional<Indicator> indicator_from_name(std::string_view name) {
  for (const auto& item : kVocabulary) {
    if (item.name == name) return item.id;
  }
  return std::nullopt;
}

std::string_view to_string(IndicatorCategory c) {
  switch (c) {
    case eyes: return "eyes";
    case face_head: return "face_head";
    case body: return "body";
  }
  return "eyes";
}

std::string_view to_string(Observation o) {
  return o == Observation::device_use ? "device_use" : "hands_placement";
}

nlohmann::json to_json(const RatingTask& task) {
  return {{"task_id", task.task_id},
          {"specialist", task.feed.specialist_id},
          {"window_start", task.feed.window_start},
          {"window_end", task.feed.window_end},
          {"raters", task.assigned_rater_ids}};
}

std::vector<RatingTask> assign_rating_tasks(std::span<const RaterProfile> pool,
                                            std::span<const FeedRequest> feeds, int k, Rng& rng,
                                            TaskIdSource& ids) {
  std::vector<std::size_t> qualified;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].qualified) qualified.push_back(i);
  }

  std::vector<RatingTask> tasks;
  tasks.reserve(feeds.size());
  for (const auto& req : feeds) {
    const bool escalated = req.origin == FeedOrigin::escalated;
    if (escalated && k < 2) throw ValidationError("escalated feeds need k >= 2 raters");
    const std::size_t need = escalated ? static_cast<std::size_t>(k) : 1;
    if (qualified.size() < need)
      throw ValidationError("insufficient qualified raters: need " + std::to_string(need) +
                            ", have " + std::to_string(qualified.size()));

    // Partial Fisher-Yates over a copy keeps draws independent of pool order quirks.
    std::vector<std::size_t> order = qualified;
    RatingTask task;
    task.task_id = ids.next();
    task.feed = req.feed;
    for (std::size_t j = 0; j < need; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng.below(order.size() - j));
      std::swap(order[j], order[pick]);
      task.assigned_rater_ids.push_back(pool[order[j]].rater_id);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

nlohmann::json to_json(const OrdRating& r) {
  nlohmann::json ind = nlohmann::json::array();
  for (auto i : r.indicators) ind.push_back(indicator_info(i).name);
  nlohmann::json obs = nlohmann::json::array();
  for (auto o : r.observations) obs.push_back(to_string(o));
  return {{"rater", r.rater_id},
          {"task_id", r.task_id},
          {"level", r.level},
          {"indicators", std::move(ind)},
          {"observations", std::move(obs)}};
}

OrdRating rate(const RaterProfile& rater, const RatingTask& task, int true_ord, Rng& rng,
               const IndicatorEmission& emission) {
  if (!rater.qualified) throw ValidationError("rater " + rater.rater_id + " is not qualified");
  return rate_unchecked(rater, task, true_ord, rng, emission);
}

int aggregate(std::span<const OrdRating> ratings) {
  if (ratings.empty()) throw ValidationError("cannot aggregate an empty rating list");
  std::vector<int> levels;
  levels.reserve(ratings.size());
  for (const auto& r : ratings) levels.push_back(r.level);
  std::sort(levels.begin(), levels.end());
  // Odd: the middle. Even: the upper of the two middles.
  return levels[levels.size() / 2];
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const EscalationCase& c) {
  nlohmann::json ratings = nlohmann::json::array();
  for (const auto& r : c.validation_ratings) ratings.push_back(to_json(r));
  nlohmann::json j{{"case_id", c.case_id},
                   {"specialist", c.specialist_id},
                   {"route", to_string(c.route)},
                   {"trigger", to_string(c.trigger)},
                   {"trigger_ref", c.trigger_ref},
                   {"opened_at", c.opened_at},
                   {"validated_level", c.validated_level},
                   {"resolution", to_string(c.resolution)},
                   {"resolved_at", c.resolved_at},
                   {"ratings", std::move(ratings)}};
  if (c.supervisor_action) j["supervisor_action"] = to_string(*c.supervisor_action);
  if (c.followup_action) j["followup_action"] = to_string(*c.followup_action);
  return j;
}

EscalationDesk::EscalationDesk(EscalationPolicy policy) : policy_(policy) {
  if (policy_.validation_raters < 2) throw ValidationError("validation needs at least 2 raters");
  require_level(policy_.high_rating_threshold, "high rating threshold");
  require_level(policy_.confirm_threshold, "confirm threshold");
  if (policy_.rating_delay_s < 0) throw ValidationError("rating delay must be >= 0");
}

void EscalationDesk::validate(EscalationCase& c, std::span<const RaterProfile> pool,
                              const std::optional<std::string>& exclude_rater, int true_ord,
                              Rng& rng, TaskIdSource& ids, Timestamp feed_time) {
  std::vector<RaterProfile> eligible;
  for (const auto& r : pool) {
    if (!exclude_rater || r.rater_id != *exclude_rater) eligible.push_back(r);
  }
  const FeedRequest req{{c.specialist_id, feed_time - 30, feed_time}, FeedOrigin::escalated};
  auto tasks = assign_rating_tasks(eligible, std::span(&req, 1), policy_.validation_raters, rng, ids);
  c.validation_task = std::move(tasks.front());

  const Timestamp rated_at = feed_time + policy_.rating_delay_s;
  // Each rater sees only the task and the feed; no rating feeds another.
  for (const auto& id : c.validation_task.assigned_rater_ids) {
    const auto it = std::find_if(eligible.begin(), eligible.end(),
                                 [&](const RaterProfile& r) { return r.rater_id == id; });
    OrdRating r = rate(*it, c.validation_task, true_ord, rng, policy_.emission);
    r.t = rated_at;
    c.validation_ratings.push_back(std::move(r));
  }
  c.validated_level = aggregate(c.validation_ratings);
  c.resolution = c.validated_level >= policy_.confirm_threshold ? Resolution::confirmed
                                                                : Resolution::not_confirmed;
  if (c.resolution == Resolution::confirmed) {
    c.followup_action =
        c.validated_level == 5 ? SupervisorAction::retrieve_vehicle : SupervisorAction::invite_break;
  }
  c.resolved_at = rated_at;
}

EscalationCase EscalationDesk::run_route_one(const DmsFlag& flag,
                                             std::span<const RaterProfile> pool, int true_ord,
                                             Rng& rng, TaskIdSource& ids) {
  EscalationCase c;
  c.case_id = next_case_++;
  c.specialist_id = flag.specialist_id;
  c.route = Route::route_one;
  c.trigger = Trigger::dms_flag;
  c.trigger_ref = flag.flag_id;
  c.opened_at = flag.t;
  c.alert = alerts_.issue(flag);
  validate(c, pool, std::nullopt, true_ord, rng, ids, flag.t);
  return c;
}

EscalationCase EscalationDesk::run_route_two(const OrdRating& single_rating, const FeedRef& feed,
                                             std::span<const RaterProfile> pool, int true_ord,
                                             Rng& rng, TaskIdSource& ids) {
  if (single_rating.level < policy_.high_rating_threshold)
    throw ValidationError("route two needs a rating of at least " +
                          std::to_string(policy_.high_rating_threshold));
  EscalationCase c;
  c.case_id = next_case_++;
  c.specialist_id = feed.specialist_id;
  c.route = Route::route_two;
  c.trigger = Trigger::single_high_rating;
  c.trigger_ref = single_rating.task_id;
  c.opened_at = single_rating.t;
  c.supervisor_action = SupervisorAction::check_in;
  c.supervisor_action_at = single_rating.t;
  validate(c, pool, single_rating.rater_id, true_ord, rng, ids, feed.window_end);
  return c;
}

bool self_flag_preempts(const EscalationCase& c, Timestamp self_flag_t) {
  return self_flag_t >= c.opened_at && self_flag_t < c.resolved_at;
}

// ---------------------------------------------------------------------------

double weighted_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty())
    throw ValidationError("weighted kappa needs two equal-length, non-empty series");
  constexpr int K = 5;
  std::array<std::array<double, K>, K> counts{};
  std::array<double, K> rows{}, cols{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_level(a[i], "rating level");
    require_level(b[i], "rating level");
    counts[a[i] - 1][b[i] - 1] += 1.0;
    rows[a[i] - 1] += 1.0;
    cols[b[i] - 1] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double observed = 0.0, expected = 0.0;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      const double w = 1.0 - std::abs(i - j) / double(K - 1);
      observed += w * counts[i][j];
      expected += w * rows[i] * cols[j];
    }
  }
  observed /= n;
  expected /= n * n;
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

double inter_rater_reliability(std::span<const OrdRating> history) {
  // rater -> task -> level (first rating wins)
  std::map<std::string, std::map<std::uint64_t, int>> by_rater;
  for (const auto& r : history) by_rater[r.rater_id].emplace(r.task_id, r.level);

  std::vector<double> kappas;
  for (auto i = by_rater.begin(); i != by_rater.end(); ++i) {
    for (auto j = std::next(i); j != by_rater.end(); ++j) {
      std::vector<int> a, b;
      for (const auto& [task, level] : i->second) {
        const auto hit = j->second.find(task);
        if (hit != j->second.end()) {
          a.push_back(level);
          b.push_back(hit->second);
        }
      }
      if (!a.empty()) kappas.push_back(weighted_kappa(a, b));
    }
  }
  if (kappas.empty()) throw ValidationError("no co-rated tasks in rating history");
  // Summation order independent of rater naming.
  std::sort(kappas.begin(), kappas.end());
  return std::accumulate(kappas.begin(), kappas.end(), 0.0) / static_cast<double>(kappas.size());
}

QualificationResult qualify_rater(const RaterProfile& rater, std::span<const VettedItem> test_set,
                                  const QualificationPolicy& policy, Rng& rng,
                                  const IndicatorEmission& emission) {
  if (test_set.empty()) throw ValidationError("qualification test set is empty");
  std::size_t exact = 0, expected_total = 0, expected_hit = 0;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto& item = test_set[i];
    RatingTask task{i + 1, {"vetted", 0, 0}, {rater.rater_id}};
    const OrdRating r = rate_unchecked(rater, task, item.true_ord, rng, emission);
    if (r.level == item.true_ord) ++exact;
    abs_err += std::abs(r.level - item.true_ord);
    for (auto want : item.expected_indicators) {
      ++expected_total;
      if (std::find(r.indicators.begin(), r.indicators.end(), want) != r.indicators.end())
        ++expected_hit;
    }
  }
  QualificationResult out;
  const double n = static_cast<double>(test_set.size());
  out.exact_fraction = static_cast<double>(exact) / n;
  out.mean_abs_error = abs_err / n;
  out.indicator_recall =
      expected_total ? static_cast<double>(expected_hit) / static_cast<double>(expected_total) : 1.0;
  out.passed = out.exact_fraction >= policy.min_exact_fraction &&
               out.mean_abs_error <= policy.max_mean_abs_error;
  return out;
}

std::vector<VettedItem> default_vetted_test_set() {
  std::vector<VettedItem> items;
  for (int level = 1; level <= 5; ++level) {
    const auto first = std::find_if(kVocabulary.begin(), kVocabulary.end(),
                                    [&](const IndicatorInfo& i) { return i.level == level; });
    for (int rep = 0; rep < 2; ++rep) items.push_back({level, {first->id}});
  }
  return items;
}

std::string_view to_string(Route r) { return r == Route::route_one ? "route_one" : "route_two"; }

std::string_view to_string(Trigger t) {
  return t == Trigger::dms_flag ? "dms_flag" : "single_high_rating";
}

std::string_view to_string(Resolution r) {
  return r == Resolution::confirmed ? "confirmed" : "not_confirmed";
}

std::string_view to_string(SupervisorAction a) {
  switch (a) {
    case SupervisorAction::check_in: return "check_in";
    case SupervisorAction::invite_break: return "invite_break";
    case SupervisorAction::retrieve_vehicle: return "retrieve_vehicle";
  }
  return "check_in";
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::tone: return "tone";
    case Modality::vibration: return "vibration";
    case Modality::light: return "light";
  }
  return "tone";
}

}  // namespace frm::vigilance
