// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/analytics.hpp"
#include "realign/gateway.hpp"
#include "realign/types.hpp"
#include "realign/workflow.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace realign {

// ---------------------------------------------------------------------------
// Synthetic worlds
//
// A world pairs object records with latent ground truth and a full set of
// mock scripts for planner / VLM / LLM / reflector / scorer, so end-to-end
// runs execute offline and deterministically. The reveal rule is fixed: the
// VLM answers truthfully iff it is queried with the aspect-matching image
// edit (category/attribute -> crop, relation/accessory -> extended crop,
// location/behavior -> highlight) and the item is fixable.
// ---------------------------------------------------------------------------

struct WorldItem {
    ObjectRecord record;                         // one raw expression at index 0
    std::optional<MisalignmentAspect> aspect;    // nullopt: expression already correct
    bool fixable = true;                         // false: the VLM never reveals the truth
    std::string truth_expression;                // ground-truth phrase == corrected rewrite
    std::string wrong_rewrite;                   // what a rewrite without evidence produces
};

struct SyntheticWorld {
    std::uint64_t seed = 0;
    std::string images_dir;
    std::vector<WorldItem> items;
    std::vector<MockRule> scripts;

    /// Ground-truth success check (what the scripted reflector would say).
    bool is_success(const WorldItem& item, const std::string& final_expression) const {
        return final_expression == item.truth_expression;
    }
};

/// Mix over {"correct"} + the six aspect names; fractions must sum to 1.
using AspectMix = std::map<std::string, double>;

/// Default mix: 25% already-correct, category+attribute carrying the largest
/// faulty shares.
AspectMix default_aspect_mix();

/// Builds a world of n expressions plus the gateway scripts that make the
/// rule-following planner solve every fixable item. `fixable_fraction`
/// applies to the faulty items; images are written under images_dir.
SyntheticWorld generate_world(std::uint64_t seed, int n_expressions, const AspectMix& mix,
                              const std::string& images_dir, double fixable_fraction = 1.0);

/// Persists the world scripts as a JSONL mock-script file and the records as
/// an annotations file next to the images.
void save_world(const SyntheticWorld& world, const std::string& dir);

/// Mock gateway preloaded with the world's scripts.
MockGateway make_world_gateway(const SyntheticWorld& world);

/// Chat-planner refinement over the whole world; success measured against
/// ground truth. Populates per-step costs from the gateway log.
RunReport run_world_rule_profile(const SyntheticWorld& world, const WorkflowConfig& config,
                                 const RefineOptions& options = {});

/// Random-planning baseline over the whole world.
RunReport run_world_random_profile(const SyntheticWorld& world, const WorkflowConfig& config);

/// Exact success probability of the random baseline per item class, by brute
/// force over all 5^max_rounds action sequences weighted uniformly. This is
/// the independent oracle for the simulated numbers: it never invokes the
/// workflow engine.
struct RandomExpectation {
    double expected_success_rate = 0.0;
    double variance_of_rate = 0.0;  // variance of the per-world success fraction
};
RandomExpectation random_success_expectation(const SyntheticWorld& world, int max_rounds);

/// The headline analytical experiment: rule-planner profile vs random
/// baseline on the same world with max rounds 3. The returned report is the
/// rule profile with baseline_comparison set to the random profile.
RunReport run_paper_experiment(std::uint64_t seed, const std::string& work_dir,
                               int n_expressions = 400);

/// Seeds the shipped experiment runs over.
const std::vector<std::uint64_t>& shipped_experiment_seeds();

/// Hook used by refine options in ablation profiles.
RefineOptions options_for_profile(const std::string& profile);

} // namespace realign
