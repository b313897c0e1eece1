#include <doctest.h>

#include <functional>
#include <string>

#include "frm/config.hpp"
#include "frm/error.hpp"

using namespace frm::sim;
using nlohmann::json;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("default scenario validates and round-trips through JSON") {
  const auto cfg = default_scenario();
  CHECK_NOTHROW(validate(cfg));
  const json j = to_json(cfg);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("the shipped config matches the built-in default") {
  const auto path = std::string(FRM_SOURCE_DIR) + "/configs/default.json";
  const auto cfg = load_config(path);
  CHECK(to_json(cfg) == to_json(default_scenario()));
}

TEST_CASE("missing fields take defaults") {
  const auto cfg = config_from_json(json::object());
  CHECK(cfg.schema_version == kSchemaVersion);
  CHECK(cfg.toggles == Toggles::all(true));
  CHECK(cfg.fleet.empty());
  const auto partial = config_from_json({{"behavior", {{"vehicle_speed_mps", 12.5}}}});
  CHECK(partial.behavior.vehicle_speed_mps == 12.5);
  CHECK(partial.behavior.ict_relief == BehaviorParams{}.ict_relief);
}

TEST_CASE("unknown and mistyped fields are parse errors naming the path") {
  auto j = to_json(default_scenario());
  j["behavior"]["vehicle_sped"] = 3;
  const auto msg = message_of([&] { config_from_json(j); });
  CHECK(msg.find("behavior") != std::string::npos);
  CHECK(msg.find("vehicle_sped") != std::string::npos);
  CHECK_THROWS_AS(config_from_json(j), frm::ParseError);

  auto typed = to_json(default_scenario());
  typed["horizon_days"] = "five";
  CHECK_THROWS_AS(config_from_json(typed), frm::ParseError);
  auto clock = to_json(default_scenario());
  clock["shift_plans"]["afternoon"]["shifts"][0]["start"] = "2pm";
  CHECK_THROWS_AS(config_from_json(clock), frm::ParseError);
  auto stage = to_json(default_scenario());
  stage["fleet"][0]["stage"] = "expert";
  CHECK_THROWS(config_from_json(stage));
}

TEST_CASE("missing config file names the path") {
  const std::string path = "/nonexistent/dir/cfg.json";
  const auto msg = message_of([&] { load_config(path); });
  CHECK(msg.find(path) != std::string::npos);
  CHECK_THROWS_AS(load_config(path), frm::ParseError);
}

TEST_CASE("semantic validation") {
  auto bad = [](auto mutate) {
    auto cfg = default_scenario();
    mutate(cfg);
    return message_of([&] { validate(cfg); });
  };
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.schema_version = 2; }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.horizon_days = -1; }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.fleet[1].id = c.fleet[0].id; }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.fleet[0].shift_plan = "night"; }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) {
                c.fleet[0].stage = frm::scheduling::Stage::trainee;
                c.fleet[0].dual = false;
              }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.raters.resize(2); }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.model.weights = {0.5, 0.5, 0.5}; }).empty());
  CHECK_FALSE(bad([](ScenarioConfig& c) { c.lifecycle_events[0].specialist = "nobody"; }).empty());
  CHECK(bad([](ScenarioConfig& c) { c.toggles.vigilance = false; c.raters.clear(); }).empty());
  auto cfg = default_scenario();
  cfg.horizon_days = -1;
  CHECK_THROWS_AS(validate(cfg), frm::ValidationError);
}

TEST_CASE("config hash ignores the seed but nothing else") {
  auto a = default_scenario(), b = a;
  b.seed = a.seed + 1;
  CHECK(config_hash(a) == config_hash(b));
  b.behavior.vehicle_speed_mps += 1.0;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("incautious hazard") {
  IncautiousHazard h{0.01, 0.2, 0.1};
  frm::fatigue::AlertnessState s;
  s.task_load = 0.5;
  s.alertness = 0.4;
  CHECK(h.per_minute(s) == doctest::Approx(0.01 + 0.1 + 0.06));
  IncautiousHazard big{0.9, 1.0, 1.0};
  CHECK(big.per_minute(s) == 1.0);
}

TEST_CASE("specialist parameters scale with susceptibility") {
  frm::fatigue::ModelParams base;
  SpecialistDef s;
  s.susceptibility = 2.0;
  s.baseline_pressure = 0.3;
  const auto p = specialist_params(base, s);
  CHECK(p.homeostat_rise_tau_h == doctest::Approx(base.homeostat_rise_tau_h / 2.0));
  CHECK(p.task_load_rate_per_h == doctest::Approx(base.task_load_rate_per_h * 2.0));
  CHECK(p.homeostat_floor == doctest::Approx(0.3));
}

TEST_CASE("toggle JSON") {
  Toggles t = Toggles::all(true);
  t.scheduling = false;
  CHECK(toggles_from_json(toggles_to_json(t)) == t);
  CHECK_THROWS(toggles_from_json({{"telepathy", true}}));
}
