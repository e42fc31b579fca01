// SPDX-License-Identifier: Apache-2.0
#include "realign/analytics.hpp"

#include "realign/errors.hpp"
#include "realign/sim.hpp"
#include "realign/util.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace realign {

using nlohmann::json;

double success_rate(const std::vector<RefinementResult>& results) {
    if (results.empty()) throw UsageError("success_rate: empty input");
    long solved = 0;
    for (const auto& r : results)
        if (r.solved) ++solved;
    return static_cast<double>(solved) / static_cast<double>(results.size());
}

std::optional<double> score_improvement(const std::vector<double>& before,
                                        const std::vector<double>& after) {
    if (before.size() != after.size()) throw UsageError("score_improvement: length mismatch");
    if (before.empty()) throw UsageError("score_improvement: empty input");
    const double mean_before =
        std::accumulate(before.begin(), before.end(), 0.0) / static_cast<double>(before.size());
    const double mean_after =
        std::accumulate(after.begin(), after.end(), 0.0) / static_cast<double>(after.size());
    if (mean_before == 0.0) return std::nullopt;
    return (mean_after - mean_before) / mean_before * 100.0;
}

std::map<int, long> iteration_distribution(const std::vector<RefinementResult>& results) {
    std::map<int, long> histogram;
    for (const auto& r : results) ++histogram[r.cycles_used];
    return histogram;
}

std::map<std::string, StepCost> step_cost_report(const std::vector<CallLogEntry>& entries,
                                                 long n_refinements) {
    if (n_refinements <= 0) throw UsageError("step_cost_report: n_refinements must be positive");
    std::map<std::string, StepCost> report;
    std::map<std::string, double> total_ms;
    for (const auto& entry : entries) {
        auto& cost = report[to_string(entry.step)];
        ++cost.total_calls;
        total_ms[to_string(entry.step)] += entry.wall_time_ms;
    }
    for (auto& [step, cost] : report) {
        cost.avg_calls = static_cast<double>(cost.total_calls) / static_cast<double>(n_refinements);
        cost.avg_ms = cost.total_calls > 0 ? total_ms[step] / cost.total_calls : 0.0;
    }
    return report;
}

std::optional<MisalignmentAspect> classify_aspect(const std::string& reflector_text) {
    struct Cue {
        MisalignmentAspect aspect;
        std::vector<const char*> words;
    };
    // heuristic keyword table, first hit wins
    static const std::vector<Cue> kCues = {
        {MisalignmentAspect::Category, {"category", "different object", "another object"}},
        {MisalignmentAspect::Attribute, {"color", "colour", "material", "shape", "texture"}},
        {MisalignmentAspect::Accessory, {"accessory", "wearing", "attached", "carries"}},
        {MisalignmentAspect::Location, {"location", "position", "left", "right", "side of the image"}},
        {MisalignmentAspect::Relation, {"relation", "next to", "surrounding", "between"}},
        {MisalignmentAspect::Behavior, {"behavior", "behaviour", "action", "doing", "activity"}},
    };
    for (const auto& cue : kCues)
        for (const char* word : cue.words)
            if (contains_ci(reflector_text, word)) return cue.aspect;
    return std::nullopt;
}

std::vector<std::pair<std::string, double>> ablation_harness(
    const SyntheticWorld& world, const std::vector<std::string>& profiles) {
    std::vector<std::pair<std::string, double>> table;
    table.reserve(profiles.size());
    for (const auto& profile : profiles) {
        WorkflowConfig config;
        config.max_iter = profile == "single-cycle" ? 1 : 3;
        config.rng_seed = world.seed;
        RunReport report;
        if (profile == "no-planning") {
            report = run_world_random_profile(world, config);
        } else {
            report = run_world_rule_profile(world, config, options_for_profile(profile));
        }
        table.emplace_back(profile, report.success_rate);
    }
    return table;
}

json to_json(const RunReport& report) {
    json histogram = json::object();
    for (const auto& [cycles, count] : report.iteration_histogram)
        histogram[std::to_string(cycles)] = count;
    json steps = json::object();
    for (const auto& [step, cost] : report.per_step_calls)
        steps[step] = json{{"total_calls", cost.total_calls},
                           {"avg_calls", cost.avg_calls},
                           {"avg_ms", cost.avg_ms}};
    json aspects = json::object();
    for (const auto& [aspect, stat] : report.aspect_breakdown)
        aspects[aspect] = json{{"count", stat.count}, {"success_rate", stat.success_rate}};
    json j{{"profile", report.profile},
           {"total", report.total},
           {"solved", report.solved},
           {"success_rate", report.success_rate},
           {"iteration_histogram", histogram},
           {"per_step_calls", steps},
           {"aspect_breakdown", aspects}};
    if (report.mean_score_before) j["mean_score_before"] = *report.mean_score_before;
    if (report.mean_score_after) j["mean_score_after"] = *report.mean_score_after;
    if (report.score_improvement_pct)
        j["score_improvement_pct"] = round_pct2(*report.score_improvement_pct);
    if (report.baseline_comparison) j["baseline_comparison"] = to_json(*report.baseline_comparison);
    return j;
}

namespace {
std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", round_pct2(v * 100.0));
    return buf;
}
} // namespace

std::string format_report_text(const RunReport& report) {
    std::ostringstream out;
    out << "profile: " << report.profile << "\n";
    out << "refinements: " << report.total << ", solved: " << report.solved
        << ", success rate: " << pct(report.success_rate) << "\n";
    if (report.mean_score_before && report.mean_score_after) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "matching score: %.4f -> %.4f", *report.mean_score_before,
                      *report.mean_score_after);
        out << buf;
        if (report.score_improvement_pct) {
            std::snprintf(buf, sizeof(buf), " (%+.2f%%)", round_pct2(*report.score_improvement_pct));
            out << buf;
        }
        out << "\n";
    }
    if (!report.iteration_histogram.empty()) {
        out << "iterations:";
        for (const auto& [cycles, count] : report.iteration_histogram)
            out << " " << cycles << ":" << count;
        out << "\n";
    }
    if (!report.per_step_calls.empty()) {
        out << "per-step averages (calls/refinement, ms/call):\n";
        for (const auto& [step, cost] : report.per_step_calls) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "  %-12s %6.2f  %8.3f\n", step.c_str(),
                          cost.avg_calls, cost.avg_ms);
            out << buf;
        }
    }
    if (!report.aspect_breakdown.empty()) {
        out << "aspects:\n";
        for (const auto& [aspect, stat] : report.aspect_breakdown)
            out << "  " << aspect << ": " << stat.count << " items, success "
                << pct(stat.success_rate) << "\n";
    }
    if (report.baseline_comparison) {
        out << "--- baseline ---\n" << format_report_text(*report.baseline_comparison);
    }
    return out.str();
}

} // namespace realign
