#pragma once

// Three-component alertness model for a single specialist.
//
//   fatigue   = w_h * homeostatic_pressure + w_c * circadian_dip(phase) + w_t * task_load
//   alertness = 1 - clamp(fatigue, 0, 1)
//
// Homeostatic pressure rises toward 1 while awake and relaxes toward a floor
// while asleep. Task load (time-on-task fatigue) rises while on task at a rate
// proportional to monotony and recovers exponentially otherwise, faster during
// active breaks. The circadian dip is a raised cosine with its maximum at the
// configured early-morning trough hour.

#include <array>

#include "frm/rng.hpp"

namespace frm::fatigue {

enum class BreakActivity { rest, physical, social };

struct AlertnessState {
  double homeostatic_pressure = 0.0;  // [0, 1]
  double circadian_phase = 0.0;       // clock hours, [0, 24)
  double task_load = 0.0;             // [0, 1]
  double alertness = 1.0;             // [0, 1], 1 = fully alert
};

struct FatigueContext {
  bool on_task = false;
  double monotony = 0.0;  // [0, 1]
  bool in_break = false;
  bool asleep = false;
  BreakActivity break_activity = BreakActivity::rest;

  void validate() const;
};

struct ModelParams {
  double homeostat_rise_tau_h = 18.0;
  double homeostat_decay_tau_h = 4.0;
  double homeostat_floor = 0.0;  // chronic-fatigue baseline reached by sleep
  double circadian_amplitude = 1.0;
  double circadian_trough_hour = 4.0;
  double task_load_rate_per_h = 0.3;  // at monotony 1
  double task_recovery_tau_min = 20.0;
  double physical_recovery_boost = 1.5;
  double social_recovery_boost = 1.25;
  std::array<double, 3> weights{0.4, 0.2, 0.4};  // homeostatic, circadian, task
  double report_noise_sd = 0.05;
  // Alertness lower edges of ORD levels 1..4; anything below the last is level 5.
  std::array<double, 4> ord_band_edges{0.8, 0.6, 0.4, 0.2};

  void validate() const;
};

// Circadian contribution in [0, circadian_amplitude].
double circadian_dip(double phase_h, const ModelParams& params);

// Alertness as a pure function of the three components.
double composite_alertness(double homeostatic_pressure, double circadian_phase,
                           double task_load, const ModelParams& params);

// Builds a state with a consistent alertness field.
AlertnessState make_state(double homeostatic_pressure, double circadian_phase,
                          double task_load, const ModelParams& params);

// Advances the state by dt seconds under a fixed context. Exact for piecewise
// constant contexts (closed-form exponentials), so step size does not bias the
// trajectory. Throws ValidationError for negative or non-finite dt.
AlertnessState step_alertness(const AlertnessState& state, double dt_s,
                              const FatigueContext& ctx, const ModelParams& params);

// Karolinska Sleepiness Scale self-report, 1 (extremely alert) .. 9.
int to_kss(const AlertnessState& state, Rng& rng, const ModelParams& params);

// Ground-truth observer drowsiness level, 1 (not drowsy) .. 5 (extremely drowsy).
int to_ord_truth(const AlertnessState& state, const ModelParams& params = {});

const char* to_string(BreakActivity a);
BreakActivity break_activity_from_string(const char* s);

}  // namespace frm::fatigue
