#pragma once

// Discrete-event fleet simulation. One scenario is one single-threaded run
// driven by one seeded generator; every module interaction is logged.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frm/config.hpp"
#include "frm/event_log.hpp"
#include "frm/metrics.hpp"

namespace frm::sim {

struct RunResult {
  EventLog log;
  Metrics metrics;
};

// Validates the config first (ValidationError). horizon_days == 0 yields an
// empty log.
RunResult run_scenario(const ScenarioConfig& cfg);

struct ToggleSet {
  std::string name;
  Toggles toggles;
};

// Record-type prefixes owned by each block, for toggle-isolation checks.
std::vector<std::string> block_record_types(std::string_view block);

struct AblationRow {
  std::string metric;
  std::uint64_t seed = 0;
  std::string baseline;
  std::string variant;
  double baseline_value = 0.0;
  double value = 0.0;
  double delta = 0.0;  // value - baseline_value
};

struct AblationSummary {
  std::string metric;
  std::string variant;
  int n = 0;
  int lower = 0;  // seeds where the variant is strictly lower
  int higher = 0;
  double mean_baseline = 0.0;
  double mean_variant = 0.0;
  double sign_test_p = 1.0;  // one-sided, variant lower
};

struct AblationResult {
  std::vector<ToggleSet> sets;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // sorted by metric, variant, seed
  std::vector<AblationSummary> summaries;
};

using RunObserver =
    std::function<void(const ToggleSet& set, std::uint64_t seed, const RunResult& result)>;

// The first set is the baseline; every other set is paired with it per seed.
// Throws ValidationError for fewer than two sets or an empty seed list.
AblationResult run_ablation(const ScenarioConfig& cfg, std::span<const ToggleSet> sets,
                            std::span<const std::uint64_t> seeds,
                            const RunObserver& observer = {});

// P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n);

std::string ablation_csv(const AblationResult& r, const std::string& config_hash);

}  // namespace frm::sim
