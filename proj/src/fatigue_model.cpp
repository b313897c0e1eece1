#include "frm/fatigue_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "frm/error.hpp"

namespace frm::fatigue {

namespace {

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

double recovery_boost(BreakActivity a, const ModelParams& p) {
  switch (a) {
    case BreakActivity::physical: return p.physical_recovery_boost;
    case BreakActivity::social: return p.social_recovery_boost;
    case BreakActivity::rest: break;
  }
  return 1.0;
}

}  // namespace

void FatigueContext::validate() const {
  if (!in_unit(monotony)) throw ValidationError("monotony must lie in [0,1]");
  if (asleep && on_task) throw ValidationError("an asleep specialist cannot be on task");
  if (in_break && on_task) throw ValidationError("a specialist on break cannot be on task");
}

void ModelParams::validate() const {
  for (double tau : {homeostat_rise_tau_h, homeostat_decay_tau_h, task_recovery_tau_min}) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("time constants must be positive");
  }
  if (!(task_load_rate_per_h >= 0.0)) throw ValidationError("task_load_rate must be nonnegative");
  if (!in_unit(homeostat_floor)) throw ValidationError("homeostat_floor must lie in [0,1]");
  if (!in_unit(circadian_amplitude)) throw ValidationError("circadian_amplitude must lie in [0,1]");
  if (!(circadian_trough_hour >= 0.0 && circadian_trough_hour < 24.0))
    throw ValidationError("circadian_trough_hour must lie in [0,24)");
  if (!(physical_recovery_boost > 0.0) || !(social_recovery_boost > 0.0))
    throw ValidationError("recovery boosts must be positive");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("component weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("component weights must sum to 1");
  if (!(report_noise_sd >= 0.0)) throw ValidationError("report_noise_sd must be nonnegative");
  for (std::size_t i = 0; i < ord_band_edges.size(); ++i) {
    if (!in_unit(ord_band_edges[i])) throw ValidationError("ORD band edges must lie in [0,1]");
    if (i > 0 && !(ord_band_edges[i] < ord_band_edges[i - 1]))
      throw ValidationError("ORD band edges must be strictly decreasing");
  }
}

double circadian_dip(double phase_h, const ModelParams& p) {
  const double angle = 2.0 * std::numbers::pi * (phase_h - p.circadian_trough_hour) / 24.0;
  return p.circadian_amplitude * 0.5 * (1.0 + std::cos(angle));
}

double composite_alertness(double h, double phase, double load, const ModelParams& p) {
  const double fatigue =
      p.weights[0] * h + p.weights[1] * circadian_dip(phase, p) + p.weights[2] * load;
  return 1.0 - std::clamp(fatigue, 0.0, 1.0);
}

AlertnessState make_state(double h, double phase, double load, const ModelParams& p) {
  if (!in_unit(h) || !in_unit(load)) throw ValidationError("state components must lie in [0,1]");
  if (!(phase >= 0.0 && phase < 24.0)) throw ValidationError("circadian_phase must lie in [0,24)");
  return {h, phase, load, composite_alertness(h, phase, load, p)};
}

AlertnessState step_alertness(const AlertnessState& state, double dt_s, const FatigueContext& ctx,
                              const ModelParams& p) {
  if (!std::isfinite(dt_s) || dt_s < 0.0) throw ValidationError("dt must be finite and >= 0");
  if (dt_s == 0.0) return state;

  const double dt_h = dt_s / 3600.0;
  AlertnessState next = state;

  if (ctx.asleep) {
    const double floor = std::min(p.homeostat_floor, state.homeostatic_pressure);
    next.homeostatic_pressure =
        floor + (state.homeostatic_pressure - floor) * std::exp(-dt_h / p.homeostat_decay_tau_h);
  } else {
    next.homeostatic_pressure =
        1.0 - (1.0 - state.homeostatic_pressure) * std::exp(-dt_h / p.homeostat_rise_tau_h);
  }

  if (ctx.on_task) {
    const double rate = p.task_load_rate_per_h * ctx.monotony;
    next.task_load = 1.0 - (1.0 - state.task_load) * std::exp(-rate * dt_h);
  } else {
    const double boost = ctx.in_break ? recovery_boost(ctx.break_activity, p) : 1.0;
    next.task_load = state.task_load * std::exp(-(dt_s / 60.0) * boost / p.task_recovery_tau_min);
  }

  next.circadian_phase = std::fmod(state.circadian_phase + dt_h, 24.0);

  next.homeostatic_pressure = std::clamp(next.homeostatic_pressure, 0.0, 1.0);
  next.task_load = std::clamp(next.task_load, 0.0, 1.0);
  next.alertness =
      composite_alertness(next.homeostatic_pressure, next.circadian_phase, next.task_load, p);
  return next;
}

int to_kss(const AlertnessState& state, Rng& rng, const ModelParams& p) {
  double fatigue = 1.0 - state.alertness;
  if (p.report_noise_sd > 0.0) {
    const double cap = 3.0 * p.report_noise_sd;
    fatigue += std::clamp(rng.normal(0.0, p.report_noise_sd), -cap, cap);
  }
  fatigue = std::clamp(fatigue, 0.0, 1.0);
  return static_cast<int>(std::clamp(std::lround(1.0 + 8.0 * fatigue), 1L, 9L));
}

int to_ord_truth(const AlertnessState& state, const ModelParams& p) {
  for (std::size_t i = 0; i < p.ord_band_edges.size(); ++i) {
    if (state.alertness >= p.ord_band_edges[i]) return static_cast<int>(i) + 1;
  }
  return 5;
}

const char* to_string(BreakActivity a) {
  switch (a) {
    case BreakActivity::rest: return "rest";
    case BreakActivity::physical: return "physical";
    case BreakActivity::social: return "social";
  }
  return "rest";
}

BreakActivity break_activity_from_string(const char* s) {
  if (std::strcmp(s, "rest") == 0) return BreakActivity::rest;
  if (std::strcmp(s, "physical") == 0) return BreakActivity::physical;
  if (std::strcmp(s, "social") == 0) return BreakActivity::social;
  throw ValidationError(std::string("unknown break activity: ") + s);
}

}  // namespace frm::fatigue
