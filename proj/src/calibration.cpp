#include "frm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "frm/error.hpp"
#include "frm/rng.hpp"

namespace frm::sim {

namespace {

constexpr std::uint64_t kFitStream = 0x5e55;
constexpr std::uint64_t kVerifyStream = 0xc4ec;

double p_any(const std::vector<fatigue::AlertnessState>& trace, const IncautiousHazard& h) {
  double none = 1.0;
  for (const auto& s : trace) none *= 1.0 - h.per_minute(s);
  return 1.0 - none;
}

double mean_p(const std::vector<std::vector<fatigue::AlertnessState>>& traces,
              const IncautiousHazard& h) {
  double sum = 0.0;
  for (const auto& t : traces) sum += p_any(t, h);
  return traces.empty() ? 0.0 : sum / double(traces.size());
}

// Smallest x in [lo, hi] with f(x) >= target, for f nondecreasing.
template <class F>
double bisect(F f, double target, double lo, double hi, int iterations) {
  if (f(lo) >= target) return lo;
  if (f(hi) < target) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) >= target ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

std::vector<fatigue::AlertnessState> session_trace(const ScenarioConfig& cfg, SessionKind kind,
                                                   Rng& rng) {
  if (cfg.fleet.empty()) throw ValidationError("calibration needs at least one specialist");
  const SpecialistDef& def = cfg.fleet[rng.below(cfg.fleet.size())];
  const auto params = specialist_params(cfg.model, def);
  const auto& plan = cfg.shift_plans.at(def.shift_plan);
  if (plan.shifts.empty()) throw ValidationError("shift plan " + def.shift_plan + " has no shifts");
  const auto& shift = plan.shifts.front();

  const int minutes = kind == SessionKind::short_session ? 5 + int(rng.below(10))    // 5..14
                                                         : 31 + int(rng.below(30));  // 31..60
  const int room_s = std::max(0, shift.duration_min() * 60 - minutes * 60);
  const double offset_s = double(rng.below(std::uint64_t(room_s) + 1));

  const double wake_phase =
      std::fmod(shift.start_min / 60.0 - def.wake_hours_before_shift + 48.0, 24.0);
  auto state = fatigue::make_state(params.homeostat_floor, wake_phase, 0.0, params);
  const fatigue::FatigueContext idle;
  state = fatigue::step_alertness(state, def.wake_hours_before_shift * 3600.0 + offset_s, idle,
                                  params);
  fatigue::FatigueContext driving;
  driving.on_task = true;
  driving.monotony = cfg.behavior.driving_monotony;

  std::vector<fatigue::AlertnessState> trace;
  trace.reserve(std::size_t(minutes));
  for (int m = 0; m < minutes; ++m) {
    state = fatigue::step_alertness(state, 60.0, driving, params);
    trace.push_back(state);
  }
  return trace;
}

std::pair<BucketEstimate, BucketEstimate> simulate_sessions(const ScenarioConfig& cfg,
                                                            const IncautiousHazard& hazard, int n,
                                                            std::uint64_t seed) {
  Rng rng(seed);
  BucketEstimate out[2];
  for (int k = 0; k < 2; ++k) {
    const auto kind = k == 0 ? SessionKind::short_session : SessionKind::long_session;
    for (int i = 0; i < n; ++i) {
      const auto trace = session_trace(cfg, kind, rng);
      bool any = false;
      for (const auto& s : trace) any = rng.bernoulli(hazard.per_minute(s)) || any;
      ++out[k].sessions;
      if (any) ++out[k].with_event;
    }
  }
  return {out[0], out[1]};
}

CalibrationResult calibrate_session_length_effect(const ScenarioConfig& cfg,
                                                  const CalibrationOptions& opt) {
  if (opt.fit_sessions <= 0 || opt.verify_sessions <= 0)
    throw ValidationError("session counts must be positive");
  if (!(opt.ratio_lo > 0.0 && opt.ratio_lo <= opt.ratio_hi))
    throw ValidationError("target ratio range must satisfy 0 < lo <= hi");

  // Common random numbers: one fixed sample of traces serves every candidate.
  Rng rng = Rng(cfg.seed).fork(kFitStream);
  std::vector<std::vector<fatigue::AlertnessState>> short_traces, long_traces;
  for (int i = 0; i < opt.fit_sessions; ++i)
    short_traces.push_back(session_trace(cfg, SessionKind::short_session, rng));
  for (int i = 0; i < opt.fit_sessions; ++i)
    long_traces.push_back(session_trace(cfg, SessionKind::long_session, rng));

  IncautiousHazard h = cfg.behavior.incautious;
  auto fit_base = [&](double gain) {
    IncautiousHazard c = h;
    c.task_gain = gain;
    return bisect(
        [&](double base) {
          c.base_per_min = base;
          return mean_p(short_traces, c);
        },
        opt.target_short, 0.0, 1.0, opt.iterations);
  };
  auto with = [&](double gain) {
    IncautiousHazard c = h;
    c.task_gain = gain;
    c.base_per_min = fit_base(gain);
    return c;
  };

  if (opt.task_load_term) {
    constexpr double kMaxGain = 20.0;
    h.task_gain = bisect([&](double gain) { return mean_p(long_traces, with(gain)); },
                         opt.target_long, 0.0, kMaxGain, opt.iterations);
  } else {
    h.task_gain = 0.0;
  }
  h = with(h.task_gain);

  CalibrationResult r;
  r.fitted = h;
  r.fit_p_short = mean_p(short_traces, h);
  r.fit_p_long = mean_p(long_traces, h);
  std::tie(r.short_bucket, r.long_bucket) =
      simulate_sessions(cfg, h, opt.verify_sessions, Rng(cfg.seed).fork(kVerifyStream).next());
  r.ratio = r.short_bucket.p() > 0.0 ? r.long_bucket.p() / r.short_bucket.p() : 0.0;

  const bool ratio_ok = r.ratio >= opt.ratio_lo && r.ratio <= opt.ratio_hi;
  const bool short_ok = std::abs(r.short_bucket.p() - opt.target_short) <= opt.tolerance;
  const bool long_ok = std::abs(r.long_bucket.p() - opt.target_long) <= opt.tolerance;
  r.converged = ratio_ok && short_ok && long_ok;
  char buf[256];
  std::snprintf(buf, sizeof buf, "ratio %.3f (target %.1f-%.1f), short %.3f, long %.3f%s",
                r.ratio, opt.ratio_lo, opt.ratio_hi, r.short_bucket.p(), r.long_bucket.p(),
                r.converged ? "" : " - not converged");
  r.message = buf;
  return r;
}

nlohmann::json to_json(const CalibrationResult& r) {
  return {{"fitted",
           {{"base_per_min", r.fitted.base_per_min},
            {"task_gain", r.fitted.task_gain},
            {"fatigue_gain", r.fitted.fatigue_gain}}},
          {"fit_p_short", r.fit_p_short},
          {"fit_p_long", r.fit_p_long},
          {"short", {{"sessions", r.short_bucket.sessions}, {"with_event", r.short_bucket.with_event}, {"p", r.short_bucket.p()}}},
          {"long", {{"sessions", r.long_bucket.sessions}, {"with_event", r.long_bucket.with_event}, {"p", r.long_bucket.p()}}},
          {"ratio", r.ratio},
          {"converged", r.converged},
          {"message", r.message}};
}

}  // namespace frm::sim
