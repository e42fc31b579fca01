// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/gateway.hpp"
#include "realign/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace realign {

struct SyntheticWorld;  // sim.hpp

struct StepCost {
    long total_calls = 0;
    double avg_calls = 0.0;  // calls per refinement
    double avg_ms = 0.0;     // mean wall time per call
};

struct AspectStat {
    long count = 0;
    double success_rate = 0.0;
};

/// Everything the run reports need, all derivable from persisted ledgers.
struct RunReport {
    std::string profile;
    long total = 0;
    long solved = 0;
    double success_rate = 0.0;
    std::optional<double> mean_score_before;
    std::optional<double> mean_score_after;
    std::optional<double> score_improvement_pct;
    std::map<int, long> iteration_histogram;           // cycles_used -> count
    std::map<std::string, StepCost> per_step_calls;    // step name -> cost
    std::map<std::string, AspectStat> aspect_breakdown;
    std::shared_ptr<RunReport> baseline_comparison;    // paired report, when present
};

/// N_s / N with N_s = count(solved). Throws UsageError on empty input.
double success_rate(const std::vector<RefinementResult>& results);

/// (mean(after) - mean(before)) / mean(before) * 100.
/// Lengths must match; a zero before-mean is undefined and yields nullopt.
std::optional<double> score_improvement(const std::vector<double>& before,
                                        const std::vector<double>& after);

/// Counts by cycles_used. The workflow's max_iter bounds the keys, so raising
/// the cap to 10 for the investigation profile is purely a config matter.
std::map<int, long> iteration_distribution(const std::vector<RefinementResult>& results);

/// Per-step totals, average calls per refinement and mean wall time. Steps
/// with no calls are absent, not zero-filled.
std::map<std::string, StepCost> step_cost_report(const std::vector<CallLogEntry>& entries,
                                                 long n_refinements);

/// Rough aspect labeling for real runs, keyword-based over reflector text.
/// Synthetic runs use world ground truth instead.
std::optional<MisalignmentAspect> classify_aspect(const std::string& reflector_text);

/// Success rates per ablation profile on the same world. Known profiles:
/// "full", "no-planning", "no-action-2".."no-action-5", "single-cycle".
/// Throws UsageError for unknown profiles.
std::vector<std::pair<std::string, double>> ablation_harness(
    const SyntheticWorld& world, const std::vector<std::string>& profiles);

nlohmann::json to_json(const RunReport& report);
std::string format_report_text(const RunReport& report);

} // namespace realign
