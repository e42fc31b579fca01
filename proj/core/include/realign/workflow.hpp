// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/gateway.hpp"
#include "realign/prompts.hpp"
#include "realign/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace realign {

/// Everything a refinement needs to reach models: one gateway (real or mock),
/// the per-capability endpoints, and the prompt library. Planner and
/// reflector calls use the endpoint temperatures as configured (default 0);
/// generation and synonym calls run at generation_temperature for diversity.
struct Gateways {
    ModelGateway* gateway = nullptr;
    EndpointConfig llm;
    EndpointConfig vlm;
    EndpointConfig scorer;
    const PromptLibrary* prompts = nullptr;
    double generation_temperature = 0.7;

    EndpointConfig llm_for_generation() const {
        EndpointConfig endpoint = llm;
        endpoint.temperature = generation_temperature;
        return endpoint;
    }
    EndpointConfig vlm_for_generation() const {
        EndpointConfig endpoint = vlm;
        endpoint.temperature = generation_temperature;
        return endpoint;
    }
};

/// Experiment knobs used by the ablation harness. A plan proposing the
/// disabled action fails its cycle instead of executing.
struct RefineOptions {
    std::optional<ActionType> disabled_action;
};

/// Text-only planner input: system instructions plus one user block carrying
/// the latest expression, caption, category, prior observations and the
/// previous cycle's feedback ("Empty" on the first cycle).
std::vector<ChatTurn> build_planner_input(const InfoPool& pool);

/// Parses planner output in the line-oriented grammar
/// ("Reasoning:" / "Conclusion:" / "Questions:" / "Target area:").
/// Target areas 1) / 2) / 3) map to crop / extended crop / highlight.
/// Throws UnparseablePlan when no state can be extracted.
PlanOutcome parse_plan(const std::string& planner_raw);

/// Extracts the rewritten expression from an LLM rewrite response
/// ("New Description: '...'", or the whole trimmed response as fallback).
std::string extract_new_description(const std::string& response);

/// Derives the verdict from reflector text: "uncertain" beats "wrong"-type
/// phrasing beats "correct". Throws UnparseableReflection when none match.
ReflectionVerdict parse_reflection(const std::string& text);

struct ExecutionContext {
    std::string record_id;
    int cycle_index = 0;
    CycleTrace* trace = nullptr;  // optional audit sink
};

/// Executes one non-Stop action and returns the updated pool. A rewrite
/// appends a new expression; a VLM action appends one observation and leaves
/// the expressions untouched.
InfoPool execute_action(const InfoPool& pool, const Action& action, const Gateways& gateways,
                        const WorkflowConfig& config, const ExecutionContext& context);

/// Runs the reflector over the latest expression and parses the verdict.
/// Unparseable reflections degrade to Uncertain and set a trace note.
ReflectionVerdict reflect(const InfoPool& pool, const Gateways& gateways,
                          const ExecutionContext& context);

/// Refines one expression of the record through the full cyclic workflow
/// (plan, act, reflect) with the prompt-driven planner.
RefinementResult refine(const ObjectRecord& record, int expression_index,
                        const Gateways& gateways, const WorkflowConfig& config,
                        const RefineOptions& options = {});

/// Identical loop with the planning step replaced by a uniform random draw
/// over the five states (seeded per work item from config.rng_seed, so runs
/// reproduce regardless of scheduling). The reflector still runs each cycle.
RefinementResult refine_random_baseline(const ObjectRecord& record, int expression_index,
                                        const Gateways& gateways, const WorkflowConfig& config,
                                        const RefineOptions& options = {});

} // namespace realign
