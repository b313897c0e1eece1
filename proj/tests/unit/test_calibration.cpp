#include <doctest.h>

#include <cmath>

#include "frm/calibration.hpp"
#include "frm/error.hpp"

using namespace frm::sim;

TEST_CASE("session traces have bucketed lengths and zero starting load") {
  const auto cfg = default_scenario();
  frm::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto s = session_trace(cfg, SessionKind::short_session, rng);
    CHECK(s.size() >= 5);
    CHECK(s.size() < 15);
    const auto l = session_trace(cfg, SessionKind::long_session, rng);
    CHECK(l.size() > 30);
    CHECK(l.size() <= 60);
    for (std::size_t k = 1; k < l.size(); ++k) CHECK(l[k].task_load > l[k - 1].task_load);
  }
}

TEST_CASE("constant hazard matches the geometric oracle") {
  const auto cfg = default_scenario();
  const IncautiousHazard h{0.02, 0.0, 0.0};
  const int n = 20000;
  const auto [s, l] = simulate_sessions(cfg, h, n, 5);
  // short lengths are uniform on 5..14 minutes, long on 31..60
  double ps = 0, pl = 0;
  for (int m = 5; m <= 14; ++m) ps += (1 - std::pow(0.98, m)) / 10;
  for (int m = 31; m <= 60; ++m) pl += (1 - std::pow(0.98, m)) / 30;
  CHECK(std::abs(s.p() - ps) < 5 * std::sqrt(ps * (1 - ps) / n));
  CHECK(std::abs(l.p() - pl) < 5 * std::sqrt(pl * (1 - pl) / n));
  const auto [z0, z1] = simulate_sessions(cfg, IncautiousHazard{0, 0, 0}, 500, 1);
  CHECK(z0.with_event == 0);
  CHECK(z1.with_event == 0);
}

TEST_CASE("calibration reaches the targets with the task-load term") {
  CalibrationOptions opt;
  opt.fit_sessions = 800;
  opt.verify_sessions = 2000;
  const auto r = calibrate_session_length_effect(default_scenario(), opt);
  INFO(r.message);
  CHECK(r.converged);
  CHECK(r.ratio >= 5.0);
  CHECK(r.ratio <= 7.0);
  CHECK(std::abs(r.short_bucket.p() - 0.11) <= 0.08);
  CHECK(std::abs(r.long_bucket.p() - 0.66) <= 0.08);
  CHECK(r.fitted.fatigue_gain == 0.0);
  const auto j = to_json(r);
  CHECK(j.contains("fitted"));
  CHECK(j["converged"] == true);
}

TEST_CASE("the null model cannot produce the session-length ratio") {
  CalibrationOptions opt;
  opt.fit_sessions = 800;
  opt.verify_sessions = 2000;
  opt.task_load_term = false;
  const auto r = calibrate_session_length_effect(default_scenario(), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.fitted.task_gain == 0.0);
  CHECK(r.ratio < 5.0);
}

TEST_CASE("calibration option checks") {
  CalibrationOptions opt;
  opt.fit_sessions = 0;
  CHECK_THROWS_AS(calibrate_session_length_effect(default_scenario(), opt), frm::ValidationError);
  auto empty = default_scenario();
  empty.fleet.clear();
  frm::Rng rng(1);
  CHECK_THROWS_AS(session_trace(empty, SessionKind::short_session, rng), frm::ValidationError);
}
