#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "frm/awareness.hpp"
#include "frm/calibration.hpp"
#include "frm/config.hpp"
#include "frm/engagement.hpp"
#include "frm/error.hpp"
#include "frm/fatigue_model.hpp"
#include "frm/metrics.hpp"
#include "frm/rng.hpp"
#include "frm/scheduling.hpp"
#include "frm/sim.hpp"
#include "frm/version.hpp"
#include "frm/vigilance.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::dict metrics_dict(const frm::sim::Metrics& m) {
  py::dict d;
  for (const auto& [k, v] : m.rows()) d[py::str(k)] = v;
  return d;
}

frm::sim::ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw frm::ParseError(e.what());
  }
  return frm::sim::config_from_json(j);
}

std::vector<frm::vigilance::OrdRating> ratings_from(
    const std::vector<std::tuple<std::string, std::uint64_t, int>>& rows) {
  std::vector<frm::vigilance::OrdRating> out;
  for (const auto& [rater, task, level] : rows) {
    frm::vigilance::OrdRating r;
    r.rater_id = rater;
    r.task_id = task;
    r.level = level;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_frm, m) {
  m.doc() = "Fatigue risk management engine";
  m.attr("__version__") = frm::kVersion;

  py::register_exception<frm::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<frm::ParseError>(m, "ParseError", PyExc_ValueError);

  using namespace frm::fatigue;
  py::class_<AlertnessState>(m, "AlertnessState")
      .def(py::init<>())
      .def_readwrite("homeostatic_pressure", &AlertnessState::homeostatic_pressure)
      .def_readwrite("circadian_phase", &AlertnessState::circadian_phase)
      .def_readwrite("task_load", &AlertnessState::task_load)
      .def_readwrite("alertness", &AlertnessState::alertness);

  py::class_<FatigueContext>(m, "FatigueContext")
      .def(py::init<>())
      .def_readwrite("on_task", &FatigueContext::on_task)
      .def_readwrite("monotony", &FatigueContext::monotony)
      .def_readwrite("in_break", &FatigueContext::in_break)
      .def_readwrite("asleep", &FatigueContext::asleep);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("homeostat_rise_tau_h", &ModelParams::homeostat_rise_tau_h)
      .def_readwrite("homeostat_decay_tau_h", &ModelParams::homeostat_decay_tau_h)
      .def_readwrite("task_load_rate_per_h", &ModelParams::task_load_rate_per_h)
      .def_readwrite("task_recovery_tau_min", &ModelParams::task_recovery_tau_min)
      .def_readwrite("report_noise_sd", &ModelParams::report_noise_sd);

  m.def("make_state", &make_state, py::arg("homeostatic_pressure"), py::arg("circadian_phase"),
        py::arg("task_load"), py::arg("params") = ModelParams{});
  m.def("step_alertness", &step_alertness, py::arg("state"), py::arg("dt_s"), py::arg("context"),
        py::arg("params") = ModelParams{});
  m.def(
      "to_kss",
      [](const AlertnessState& s, std::uint64_t seed, const ModelParams& p) {
        frm::Rng rng(seed);
        return to_kss(s, rng, p);
      },
      py::arg("state"), py::arg("seed") = 0, py::arg("params") = ModelParams{});
  m.def("to_ord_truth", &to_ord_truth, py::arg("state"), py::arg("params") = ModelParams{});

  m.def(
      "aggregate",
      [](const std::vector<int>& levels) {
        std::vector<std::tuple<std::string, std::uint64_t, int>> rows;
        for (std::size_t i = 0; i < levels.size(); ++i)
          rows.emplace_back("r" + std::to_string(i), 1, levels[i]);
        return frm::vigilance::aggregate(ratings_from(rows));
      },
      "Aggregate ORD level of one task's ratings");
  m.def("weighted_kappa",
        [](const std::vector<int>& a, const std::vector<int>& b) {
          return frm::vigilance::weighted_kappa(a, b);
        });
  m.def(
      "inter_rater_reliability",
      [](const std::vector<std::tuple<std::string, std::uint64_t, int>>& rows) {
        return frm::vigilance::inter_rater_reliability(ratings_from(rows));
      },
      "Mean pairwise weighted kappa over (rater, task, level) rows");

  m.def(
      "pfs_outcome",
      [](int kss, bool is_followup) {
        return std::string(frm::awareness::to_string(frm::awareness::pfs_outcome(kss, is_followup).action));
      },
      py::arg("kss"), py::arg("is_followup") = false);

  m.def(
      "sa_evaluate",
      [](const std::string& cause, double speed, bool input_before, bool input_after,
         bool emergency) {
        frm::engagement::SaDecisionInput in;
        in.cause = frm::engagement::transition_cause_from_string(cause);
        in.speed_mps = speed;
        in.input_before = input_before;
        in.input_after = input_after;
        in.emergency = emergency;
        const auto d = frm::engagement::sa_evaluate(in, {});
        return py::make_tuple(std::string(frm::engagement::to_string(d.action)), d.delay_s,
                              d.rationale_score);
      },
      py::arg("cause"), py::arg("speed_mps"), py::arg("input_before"), py::arg("input_after"),
      py::arg("emergency") = false);

  m.def(
      "plan_rotation",
      [](const std::string& current, const std::string& target, int max_step, int min_extended_rest,
         int shift_length) {
        namespace sch = frm::scheduling;
        sch::RotationConstraints c;
        c.max_forward_step_per_day = max_step;
        c.min_extended_rest = min_extended_rest;
        c.validate();
        const auto plan =
            sch::plan_rotation(sch::parse_clock(current), sch::parse_clock(target), c, shift_length);
        std::vector<std::string> violations;
        for (const auto& v : sch::validate_rotation(plan, c)) violations.push_back(v.kind + ": " + v.detail);
        return py::make_tuple(sch::export_plan_csv(plan), violations);
      },
      py::arg("current"), py::arg("target"), py::arg("max_step") = 120,
      py::arg("min_extended_rest") = 2880, py::arg("shift_length") = 480,
      "Returns (plan CSV, list of violations)");

  m.def("default_config", [] { return frm::sim::to_json(frm::sim::default_scenario()).dump(); });
  m.def("config_hash", [](const std::string& text) { return frm::sim::config_hash(parse_config(text)); });

  m.def(
      "run_scenario",
      [](const std::string& config_json) {
        frm::sim::RunResult r;
        {
          const auto cfg = parse_config(config_json);
          py::gil_scoped_release release;
          r = frm::sim::run_scenario(cfg);
        }
        py::dict out;
        out["log"] = r.log.serialize();
        out["digest"] = r.log.digest();
        out["metrics"] = metrics_dict(r.metrics);
        return out;
      },
      py::arg("config_json"), "Run a scenario; returns {log, digest, metrics}");

  m.def(
      "compute_metrics",
      [](const std::string& log_text) {
        return metrics_dict(frm::sim::compute_metrics(frm::sim::parse_log(log_text)));
      },
      py::arg("log_text"));

  m.def(
      "calibrate",
      [](const std::string& config_json, bool null_model, int sessions) {
        frm::sim::CalibrationOptions opt;
        opt.task_load_term = !null_model;
        opt.verify_sessions = sessions;
        return frm::sim::to_json(frm::sim::calibrate_session_length_effect(parse_config(config_json), opt))
            .dump();
      },
      py::arg("config_json"), py::arg("null_model") = false, py::arg("sessions") = 5000,
      "Returns the fit as a JSON string");
}
