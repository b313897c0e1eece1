#include <doctest.h>

#include <cmath>

#include "frm/error.hpp"
#include "frm/fatigue_model.hpp"

using namespace frm::fatigue;

namespace {

// RK4 on dx/dt = f(x), used as an oracle independent of the closed forms.
template <class F>
double rk4(double x, double t_end, int steps, F f) {
  const double h = t_end / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(x), k2 = f(x + h * k1 / 2), k3 = f(x + h * k2 / 2), k4 = f(x + h * k3);
    x += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
  }
  return x;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

FatigueContext driving(double monotony = 1.0) {
  FatigueContext c;
  c.on_task = true;
  c.monotony = monotony;
  return c;
}

}  // namespace

TEST_CASE("off-task recovery matches exponential ODE") {
  ModelParams p;
  auto s = make_state(0.3, 12.0, 0.7, p);
  FatigueContext idle;
  const auto out = step_alertness(s, 1800.0, idle, p);
  // dL/dmin = -L / tau over 30 minutes
  const double want = rk4(0.7, 30.0, 3000, [&](double l) { return -l / p.task_recovery_tau_min; });
  CHECK(rel(out.task_load, want) < 1e-9);
  CHECK(rel(out.task_load, 0.7 * std::exp(-1.5)) < 1e-12);
}

TEST_CASE("physical break recovers faster than rest") {
  ModelParams p;
  auto s = make_state(0.3, 12.0, 0.7, p);
  FatigueContext rest, walk;
  rest.in_break = walk.in_break = true;
  walk.break_activity = BreakActivity::physical;
  const auto a = step_alertness(s, 600.0, rest, p);
  const auto b = step_alertness(s, 600.0, walk, p);
  CHECK(b.task_load < a.task_load);
  const double want = rk4(0.7, 10.0, 1000,
                          [&](double l) { return -p.physical_recovery_boost * l / p.task_recovery_tau_min; });
  CHECK(rel(b.task_load, want) < 1e-9);
}

TEST_CASE("homeostat rises while awake and decays to the floor asleep") {
  ModelParams p;
  p.homeostat_floor = 0.1;
  auto s = make_state(0.2, 8.0, 0.0, p);
  const auto awake = step_alertness(s, 4 * 3600.0, FatigueContext{}, p);
  const double want_up =
      rk4(0.2, 4.0, 4000, [&](double h) { return (1.0 - h) / p.homeostat_rise_tau_h; });
  CHECK(rel(awake.homeostatic_pressure, want_up) < 1e-9);

  FatigueContext sleep;
  sleep.asleep = true;
  auto tired = make_state(0.8, 23.0, 0.0, p);
  const auto slept = step_alertness(tired, 8 * 3600.0, sleep, p);
  const double want_down =
      rk4(0.8, 8.0, 8000, [&](double h) { return -(h - 0.1) / p.homeostat_decay_tau_h; });
  CHECK(rel(slept.homeostatic_pressure, want_down) < 1e-9);
  CHECK(slept.homeostatic_pressure > 0.1);
  CHECK(slept.circadian_phase == doctest::Approx(7.0));
}

TEST_CASE("on-task load follows saturating growth") {
  ModelParams p;
  auto s = make_state(0.2, 9.0, 0.1, p);
  const auto out = step_alertness(s, 2 * 3600.0, driving(0.5), p);
  const double r = p.task_load_rate_per_h * 0.5;
  const double want = rk4(0.1, 2.0, 2000, [&](double l) { return r * (1.0 - l); });
  CHECK(rel(out.task_load, want) < 1e-9);
}

TEST_CASE("step size does not change the trajectory") {
  ModelParams p;
  auto whole = make_state(0.25, 20.0, 0.0, p);
  auto pieces = whole;
  whole = step_alertness(whole, 3 * 3600.0, driving(), p);
  for (int i = 0; i < 180; ++i) pieces = step_alertness(pieces, 60.0, driving(), p);
  CHECK(rel(pieces.task_load, whole.task_load) < 1e-9);
  CHECK(rel(pieces.homeostatic_pressure, whole.homeostatic_pressure) < 1e-9);
  CHECK(rel(pieces.alertness, whole.alertness) < 1e-9);
}

TEST_CASE("alertness composition and circadian dip") {
  ModelParams p;
  CHECK(circadian_dip(p.circadian_trough_hour, p) == doctest::Approx(p.circadian_amplitude));
  CHECK(circadian_dip(p.circadian_trough_hour + 12.0, p) == doctest::Approx(0.0));
  const auto s = make_state(0.5, 4.0, 0.5, p);
  CHECK(s.alertness == doctest::Approx(1.0 - (0.4 * 0.5 + 0.2 * 1.0 + 0.4 * 0.5)));
  CHECK(make_state(1.0, 4.0, 1.0, p).alertness == 0.0);
}

TEST_CASE("zero dt is the identity, bad dt rejected") {
  ModelParams p;
  auto s = make_state(0.4, 3.0, 0.2, p);
  const auto same = step_alertness(s, 0.0, driving(), p);
  CHECK(same.task_load == s.task_load);
  CHECK(same.alertness == s.alertness);
  CHECK_THROWS_AS(step_alertness(s, -1.0, driving(), p), frm::ValidationError);
  CHECK_THROWS_AS(step_alertness(s, NAN, driving(), p), frm::ValidationError);
  CHECK_THROWS_AS(make_state(1.2, 3.0, 0.0, p), frm::ValidationError);
  CHECK_THROWS_AS(make_state(0.2, 24.0, 0.0, p), frm::ValidationError);
}

TEST_CASE("parameter and context validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  p.weights = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(p.validate(), frm::ValidationError);
  p = {};
  p.ord_band_edges = {0.8, 0.8, 0.4, 0.2};
  CHECK_THROWS_AS(p.validate(), frm::ValidationError);
  FatigueContext c;
  c.on_task = c.asleep = true;
  CHECK_THROWS_AS(c.validate(), frm::ValidationError);
  CHECK(break_activity_from_string(to_string(BreakActivity::social)) == BreakActivity::social);
  CHECK_THROWS(break_activity_from_string("jog"));
}

TEST_CASE("KSS without noise is a monotone quantizer with fixed endpoints") {
  ModelParams p;
  p.report_noise_sd = 0.0;
  frm::Rng rng(1);
  AlertnessState s;
  s.alertness = 1.0;
  CHECK(to_kss(s, rng, p) == 1);
  s.alertness = 0.0;
  CHECK(to_kss(s, rng, p) == 9);
  int prev = 9;
  for (int i = 0; i <= 1000; ++i) {
    s.alertness = i / 1000.0;
    const int k = to_kss(s, rng, p);
    CHECK(k <= prev);
    CHECK(k >= 1);
    prev = k;
  }
}

TEST_CASE("noisy KSS stays on the scale and tracks fatigue on average") {
  ModelParams p;
  frm::Rng rng(3);
  AlertnessState alert, drowsy;
  alert.alertness = 0.9;
  drowsy.alertness = 0.3;
  double a = 0, d = 0;
  for (int i = 0; i < 2000; ++i) {
    const int ka = to_kss(alert, rng, p), kd = to_kss(drowsy, rng, p);
    CHECK((ka >= 1 && ka <= 9 && kd >= 1 && kd <= 9));
    a += ka;
    d += kd;
  }
  CHECK(a < d);
}

TEST_CASE("ORD bands") {
  ModelParams p;
  AlertnessState s;
  const double cases[][2] = {{1.0, 1}, {0.8, 1}, {0.79, 2}, {0.6, 2}, {0.5, 3},
                             {0.4, 3}, {0.3, 4}, {0.2, 4}, {0.19, 5}, {0.0, 5}};
  for (auto [a, want] : cases) {
    s.alertness = a;
    CHECK(to_ord_truth(s, p) == int(want));
  }
  int prev = 1;
  for (int i = 1000; i >= 0; --i) {
    s.alertness = i / 1000.0;
    const int o = to_ord_truth(s, p);
    CHECK(o >= prev);
    prev = o;
  }
}
