#pragma once

// Fits the incautious-event hazard so that long driving sessions contain an
// incautious event far more often than short ones.

#include <cstdint>
#include <string>
#include <vector>

#include "frm/config.hpp"
#include "frm/fatigue_model.hpp"

namespace frm::sim {

struct CalibrationOptions {
  double ratio_lo = 5.0;
  double ratio_hi = 7.0;
  double target_short = 0.11;  // P(>= 1 event | session < 15 min)
  double target_long = 0.66;   // P(>= 1 event | session > 30 min)
  double tolerance = 0.08;
  int fit_sessions = 2000;     // per bucket, for the fit
  int verify_sessions = 5000;  // per bucket, fresh Monte-Carlo check
  bool task_load_term = true;  // false fits the null model (no task_load dependence)
  int iterations = 60;         // bisection steps per level
};

struct BucketEstimate {
  int sessions = 0;
  int with_event = 0;

  double p() const { return sessions ? double(with_event) / sessions : 0.0; }
};

struct CalibrationResult {
  IncautiousHazard fitted;
  double fit_p_short = 0.0;  // analytic, on the fitting sample
  double fit_p_long = 0.0;
  BucketEstimate short_bucket;  // Monte-Carlo verification
  BucketEstimate long_bucket;
  double ratio = 0.0;
  bool converged = false;
  std::string message;
};

enum class SessionKind { short_session, long_session };

// Fatigue state at each whole minute of one countermeasure-free driving
// session: a specialist drawn from the fleet starts from zero task load at a
// random point within their first shift.
std::vector<fatigue::AlertnessState> session_trace(const ScenarioConfig& cfg, SessionKind kind,
                                                   Rng& rng);

// Draws the per-minute Bernoulli events for n sessions of each kind.
std::pair<BucketEstimate, BucketEstimate> simulate_sessions(const ScenarioConfig& cfg,
                                                            const IncautiousHazard& hazard, int n,
                                                            std::uint64_t seed);

// Bisection on the hazard's base rate (short-session target) nested inside a
// bisection on its task-load gain (long-session target). Never throws for
// non-convergence; the result is flagged instead.
CalibrationResult calibrate_session_length_effect(const ScenarioConfig& cfg,
                                                  const CalibrationOptions& opt = {});

nlohmann::json to_json(const CalibrationResult& r);

}  // namespace frm::sim
