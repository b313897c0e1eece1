// frm: run scenarios, ablations and calibration, plan shift rotations,
// validate configs and summarise event logs.
//
// Exit status: 0 success, 1 validation or domain failure, 2 I/O or parse failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "frm/awareness.hpp"
#include "frm/calibration.hpp"
#include "frm/config.hpp"
#include "frm/error.hpp"
#include "frm/event_log.hpp"
#include "frm/hash.hpp"
#include "frm/metrics.hpp"
#include "frm/scheduling.hpp"
#include "frm/sim.hpp"
#include "frm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

frm::sim::ScenarioConfig load_validated(const std::string& path) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path);
  auto cfg = frm::sim::load_config(path);
  frm::sim::validate(cfg);
  return cfg;
}

bool* toggle_slot(frm::sim::Toggles& t, const std::string& block) {
  if (block == "education") return &t.education;
  if (block == "awareness") return &t.awareness;
  if (block == "vigilance") return &t.vigilance;
  if (block == "engagement") return &t.engagement;
  if (block == "scheduling") return &t.scheduling;
  return nullptr;
}

// "block=on|off", with "all" addressing every block.
void apply_toggle(frm::sim::Toggles& t, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw frm::ValidationError("toggle must look like block=on|off: " + spec);
  const std::string block = spec.substr(0, eq), value = spec.substr(eq + 1);
  if (value != "on" && value != "off") throw frm::ValidationError("toggle value must be on or off: " + spec);
  const bool on = value == "on";
  if (block == "all") {
    t = frm::sim::Toggles::all(on);
    return;
  }
  bool* slot = toggle_slot(t, block);
  if (!slot) throw frm::ValidationError("unknown block in toggle: " + block);
  *slot = on;
}

// "label=all", "label=none", or "label=none,engagement,vigilance".
frm::sim::ToggleSet parse_set(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw frm::ValidationError("set must look like label=blocks: " + spec);
  frm::sim::ToggleSet set{spec.substr(0, eq), frm::sim::Toggles::all(false)};
  std::stringstream ss(spec.substr(eq + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "all") set.toggles = frm::sim::Toggles::all(true);
    else if (tok == "none") set.toggles = frm::sim::Toggles::all(false);
    else if (bool* slot = toggle_slot(set.toggles, tok)) *slot = true;
    else throw frm::ValidationError("unknown block in set: " + tok);
  }
  return set;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> toggles;
};

int cmd_simulate(const SimulateArgs& a) {
  auto cfg = load_validated(a.config);
  if (a.seed) cfg.seed = *a.seed;
  for (const auto& t : a.toggles) apply_toggle(cfg.toggles, t);
  const auto result = frm::sim::run_scenario(cfg);
  const std::string hash = frm::sim::config_hash(cfg);
  const std::string log_text = result.log.serialize();
  const std::string metrics_text = frm::sim::metrics_csv(result.metrics, hash, cfg.seed);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  write_file(dir / "events.jsonl", log_text);
  write_file(dir / "metrics.csv", metrics_text);
  json manifest = {{"config_hash", hash},
                   {"seed", cfg.seed},
                   {"version", frm::kVersion},
                   {"schema_version", cfg.schema_version},
                   {"toggles", frm::sim::toggles_to_json(cfg.toggles)},
                   {"log_digest", frm::hex64(frm::fnv1a64(log_text))},
                   {"metrics_digest", frm::hex64(frm::fnv1a64(metrics_text))},
                   {"records", result.log.size()},
                   {"files", {"events.jsonl", "metrics.csv"}},
                   {"invoked_at", utc_now()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::printf("wrote %zu records to %s (log digest %s)\n", result.log.size(),
              (dir / "events.jsonl").c_str(), manifest["log_digest"].get<std::string>().c_str());
  return 0;
}

struct AblateArgs {
  std::string config, out;
  int seeds = 20;
  std::optional<std::uint64_t> base_seed;
  std::vector<std::string> sets;
};

int cmd_ablate(const AblateArgs& a) {
  const auto cfg = load_validated(a.config);
  if (a.seeds <= 0) throw frm::ValidationError("--seeds must be positive");
  std::vector<frm::sim::ToggleSet> sets;
  for (const auto& s : a.sets) sets.push_back(parse_set(s));
  if (sets.empty()) {
    sets = {{"all_off", frm::sim::Toggles::all(false)}, {"all_on", frm::sim::Toggles::all(true)}};
  }
  std::vector<std::uint64_t> seeds;
  const std::uint64_t base = a.base_seed.value_or(cfg.seed);
  for (int i = 0; i < a.seeds; ++i) seeds.push_back(base + std::uint64_t(i));

  const auto r = frm::sim::run_ablation(cfg, sets, seeds);
  const std::string hash = frm::sim::config_hash(cfg);
  ensure_dir(a.out);
  write_file(fs::path(a.out) / "ablation.csv", frm::sim::ablation_csv(r, hash));

  std::string summary = "config_hash,metric,baseline,variant,n,lower,higher,mean_baseline,mean_variant,sign_test_p\n";
  char buf[512];
  for (const auto& s : r.summaries) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%d,%d,%d,%.10g,%.10g,%.6g\n", hash.c_str(),
                  s.metric.c_str(), sets[0].name.c_str(), s.variant.c_str(), s.n, s.lower, s.higher,
                  s.mean_baseline, s.mean_variant, s.sign_test_p);
    summary += buf;
  }
  write_file(fs::path(a.out) / "summary.csv", summary);
  std::fputs(summary.c_str(), stdout);
  return 0;
}

struct CalibrateArgs {
  std::string config, out;
  int sessions = 5000;
  bool null_model = false;
};

int cmd_calibrate(const CalibrateArgs& a) {
  auto cfg = load_validated(a.config);
  frm::sim::CalibrationOptions opt;
  opt.verify_sessions = a.sessions;
  opt.task_load_term = !a.null_model;
  const auto r = frm::sim::calibrate_session_length_effect(cfg, opt);
  json j = frm::sim::to_json(r);
  j["config_hash"] = frm::sim::config_hash(cfg);
  if (!a.out.empty()) write_file(a.out, j.dump(2) + "\n");
  std::printf("base_per_min=%.6g task_gain=%.6g\n", r.fitted.base_per_min, r.fitted.task_gain);
  std::printf("%s\n", r.message.c_str());
  return r.converged ? 0 : 1;
}

struct RotationArgs {
  std::string current, target, out;
  int max_step = 120;
  bool extended_rest = false;
  int min_extended_rest = 2880;
  int min_rest = 600;
  int shift_length = 480;
};

int cmd_plan_rotation(const RotationArgs& a) {
  namespace sch = frm::scheduling;
  const int cur = sch::parse_clock(a.current);
  const int tgt = sch::parse_clock(a.target);
  sch::RotationConstraints c{a.max_step, a.min_extended_rest, a.min_rest};
  c.validate();
  // Moving earlier needs an explicit extended rest; without it the change is
  // a direct jump, which the validator rejects.
  const bool backward = tgt < cur;
  const auto plan = backward && !a.extended_rest ? sch::direct_transition(cur, tgt, a.shift_length)
                                                 : sch::plan_rotation(cur, tgt, c, a.shift_length);
  const std::string csv = sch::export_plan_csv(plan);
  std::fputs(csv.c_str(), stdout);
  if (!a.out.empty()) write_file(a.out, csv);
  const auto violations = sch::validate_rotation(plan, c);
  for (const auto& v : violations)
    std::printf("violation: transition %zu %s: %s\n", v.transition, v.kind.c_str(), v.detail.c_str());
  std::printf("%s: %zu transition(s)\n", violations.empty() ? "valid" : "INVALID",
              plan.transitions.size());
  return violations.empty() ? 0 : 1;
}

int cmd_validate_config(const std::string& path) {
  const auto cfg = load_validated(path);
  std::printf("ok: schema %d, %zu specialist(s), %zu rater(s), horizon %d day(s), config hash %s\n",
              cfg.schema_version, cfg.fleet.size(), cfg.raters.size(), cfg.horizon_days,
              frm::sim::config_hash(cfg).c_str());
  return 0;
}

struct ReportArgs {
  std::string log, metrics, ablation;
};

std::string escalation_table(const frm::sim::EventLog& log) {
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& r : log.records()) {
    if (r.type != "escalation_resolved") continue;
    ++counts[{r.data.at("route").get<std::string>(), r.data.at("resolution").get<std::string>()}];
  }
  std::string out = "route,resolution,count\n";
  for (const auto& [k, n] : counts) out += k.first + "," + k.second + "," + std::to_string(n) + "\n";
  return out;
}

std::string pfs_table(const frm::sim::EventLog& log) {
  std::vector<frm::awareness::PfsRecord> recs;
  std::int64_t last = 0;
  for (const auto& r : log.records()) {
    last = r.t;
    if (r.type != "pfs") continue;
    frm::awareness::PfsRecord p;
    p.record_id = r.data.at("record_id").get<std::uint64_t>();
    p.specialist_id = r.sid;
    p.t = r.t;
    p.kss = r.data.at("kss").get<int>();
    p.is_followup = r.data.at("is_followup").get<bool>();
    p.shift_index = r.data.value("shift_index", 0);
    recs.push_back(std::move(p));
  }
  return frm::awareness::trend_csv(frm::awareness::pfs_trend(recs, {0, last + 1}));
}

std::string ablation_table(const std::string& path) {
  std::stringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw frm::ParseError("ablation row needs 8 columns", line_no);
    auto& [sum, n] = acc[{cells[1], cells[4]}];
    try {
      sum += std::stod(cells[7]);
    } catch (const std::exception&) {
      throw frm::ParseError("bad delta value", line_no);
    }
    ++n;
  }
  std::string out = "metric,variant,seeds,mean_delta\n";
  char buf[64];
  for (const auto& [k, v] : acc) {
    std::snprintf(buf, sizeof buf, "%.10g", v.first / v.second);
    out += k.first + "," + k.second + "," + std::to_string(v.second) + "," + buf + "\n";
  }
  return out;
}

int cmd_report(const ReportArgs& a) {
  const auto log = frm::sim::parse_log(read_file(a.log));
  const auto metrics = frm::sim::compute_metrics(log);
  const std::string csv = frm::sim::metrics_csv(metrics, log.config_hash(), log.seed());
  std::printf("# metrics\n%s", csv.c_str());
  std::printf("\n# pfs trend\n%s", pfs_table(log).c_str());
  std::printf("\n# escalation outcomes\n%s", escalation_table(log).c_str());
  const auto problems = frm::sim::check_conservation(log);
  std::printf("\n# conservation\n%s\n", problems.empty() ? "ok" : "FAILED");
  for (const auto& p : problems) std::printf("%s\n", p.c_str());
  if (!a.ablation.empty()) std::printf("\n# ablation deltas\n%s", ablation_table(a.ablation).c_str());
  if (!a.metrics.empty() && read_file(a.metrics) != csv) {
    std::fprintf(stderr, "error: recomputed metrics differ from %s\n", a.metrics.c_str());
    return 1;
  }
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fatigue risk management engine and fleet-shift simulator"};
  app.set_version_flag("--version", frm::kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run one scenario and write the event log, metrics and manifest");
  s->add_option("--config", sim.config, "Scenario config (JSON)")->required();
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Override the config seed");
  s->add_option("--toggle", sim.toggles, "Block override, e.g. engagement=off or all=on");

  AblateArgs abl;
  auto* ab = app.add_subcommand("ablate", "Paired multi-seed comparison of toggle sets");
  ab->add_option("--config", abl.config, "Scenario config (JSON)")->required();
  ab->add_option("--out", abl.out, "Output directory")->required();
  ab->add_option("--seeds", abl.seeds, "Number of seeds")->capture_default_str();
  ab->add_option("--base-seed", abl.base_seed, "First seed (default: config seed)");
  ab->add_option("--set", abl.sets, "label=blocks, e.g. off=none, full=all, ict=none,engagement; first is the baseline");

  CalibrateArgs cal;
  auto* ca = app.add_subcommand("calibrate", "Fit the incautious-event hazard to the session-length effect");
  ca->add_option("--config", cal.config, "Scenario config (JSON)")->required();
  ca->add_option("--out", cal.out, "Write the fit as JSON");
  ca->add_option("--sessions", cal.sessions, "Verification sessions per bucket")->capture_default_str();
  ca->add_flag("--null-model", cal.null_model, "Fit without the task-load term");

  RotationArgs rot;
  auto* pr = app.add_subcommand("plan-rotation", "Plan and validate a shift start-time change");
  pr->add_option("--current", rot.current, "Current start, HH:MM")->required();
  pr->add_option("--target", rot.target, "Target start, HH:MM")->required();
  pr->add_option("--max-step", rot.max_step, "Largest forward step per day, minutes")->capture_default_str();
  pr->add_flag("--extended-rest", rot.extended_rest, "Allow an earlier target via an extended rest");
  pr->add_option("--min-extended-rest", rot.min_extended_rest, "Minutes off before a backward move")->capture_default_str();
  pr->add_option("--min-rest", rot.min_rest, "Minimum minutes between shifts")->capture_default_str();
  pr->add_option("--shift-length", rot.shift_length, "Shift length, minutes")->capture_default_str();
  pr->add_option("--out", rot.out, "Write the plan as CSV");

  std::string vc_path;
  auto* vc = app.add_subcommand("validate-config", "Parse and validate a scenario config");
  vc->add_option("--config", vc_path, "Scenario config (JSON)")->required();

  ReportArgs rep;
  auto* rp = app.add_subcommand("report", "Summarise an event log");
  rp->add_option("--log", rep.log, "Event log (JSONL)")->required();
  rp->add_option("--metrics", rep.metrics, "Metrics CSV to check against the recomputation");
  rp->add_option("--ablation", rep.ablation, "Ablation CSV to summarise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (ab->parsed()) return cmd_ablate(abl);
    if (ca->parsed()) return cmd_calibrate(cal);
    if (pr->parsed()) return cmd_plan_rotation(rot);
    if (vc->parsed()) return cmd_validate_config(vc_path);
    if (rp->parsed()) return cmd_report(rep);
  } catch (const frm::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const frm::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
