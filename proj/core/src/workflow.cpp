// SPDX-License-Identifier: Apache-2.0
#include "realign/workflow.hpp"

#include "realign/errors.hpp"
#include "realign/image.hpp"
#include "realign/image_ops.hpp"
#include "realign/util.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace realign {

namespace {

const char* kPlannerSystem =
    "You are a careful assistant that manages the step-by-step correction of a short "
    "description of one object in an image. You receive the object category, the image "
    "caption, the current description, earlier descriptions, supplementary observations "
    "collected from image tools, and feedback from the previous check.\n"
    "Decide the state of the current description and answer in exactly this format:\n"
    "Reasoning: <your analysis>\n"
    "Conclusion: The phrase is correct. | The phrase is wrong. | The phrase is uncertain. "
    "<what is missing>\n"
    "Questions: <numbered questions about the missing information; only when uncertain>\n"
    "Target area: 1)the object itself | 2)the object and the surrounding areas | 3)the whole "
    "image <only when uncertain; pick one>\n"
    "Conclude \"correct\" only when the description agrees with the caption, the observations "
    "and the feedback. Conclude \"wrong\" when it contradicts them and needs a rewrite.";

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool is_label_line(const std::string& line, std::string_view* label, std::string* rest) {
    static const std::vector<std::string> kLabels = {"Reasoning:", "Conclusion:", "Questions:",
                                                     "Target area:"};
    const std::string trimmed = trim(line);
    for (const auto& candidate : kLabels) {
        if (trimmed.rfind(candidate, 0) == 0) {
            *label = std::string_view(candidate);
            *rest = trim(trimmed.substr(candidate.size()));
            return true;
        }
    }
    return false;
}

/// Splits planner output into labeled blocks; a block runs until the next label.
std::map<std::string, std::string> split_blocks(const std::string& raw) {
    std::map<std::string, std::string> blocks;
    std::string current_label;
    std::vector<std::string> current_lines;
    auto flush = [&] {
        if (current_label.empty()) return;
        std::string text = trim(join(current_lines, "\n"));
        // first writer wins so a rogue duplicated label cannot overwrite
        blocks.emplace(current_label, std::move(text));
        current_lines.clear();
    };
    for (const auto& line : split_lines(raw)) {
        std::string_view label;
        std::string rest;
        if (is_label_line(line, &label, &rest)) {
            flush();
            current_label = std::string(label);
            current_lines = {rest};
        } else if (!current_label.empty()) {
            current_lines.push_back(trim(line));
        }
    }
    flush();
    return blocks;
}

enum class Classification { Right, Wrong, Uncertain };

std::optional<Classification> classify(const std::string& text) {
    if (contains_ci(text, "uncertain")) return Classification::Uncertain;
    if (contains_ci(text, "wrong") || contains_ci(text, "incorrect") ||
        contains_ci(text, "not correct") || contains_ci(text, "different object category") ||
        contains_ci(text, "conflicts with"))
        return Classification::Wrong;
    if (contains_ci(text, "correct") || contains_ci(text, "right")) return Classification::Right;
    return std::nullopt;
}

} // namespace

std::vector<ChatTurn> build_planner_input(const InfoPool& pool) {
    std::string body;
    body += "Object Category: " + pool.category + "\n";
    body += "Caption: " + pool.caption + "\n";
    body += "Expression: " + pool.latest_expression() + "\n";
    if (pool.expressions.size() > 1) {
        std::vector<std::string> earlier(pool.expressions.begin(), pool.expressions.end() - 1);
        body += "Expression History: " + join(earlier, " | ") + "\n";
    } else {
        body += "Expression History: Empty\n";
    }
    if (pool.observations.empty()) {
        body += "Observations: Empty\n";
    } else {
        body += "Observations:\n";
        for (const auto& [action, text] : pool.observations)
            body += "- [" + std::string(action_label(action)) + "] " + text + "\n";
    }
    body += "Feedback: " + (pool.feedback ? pool.feedback->feedback_text : "Empty") + "\n";
    return {system_turn(kPlannerSystem), user_turn(body)};
}

PlanOutcome parse_plan(const std::string& planner_raw) {
    const auto blocks = split_blocks(planner_raw);
    PlanOutcome plan;
    if (auto it = blocks.find("Reasoning:"); it != blocks.end()) plan.reasoning = it->second;

    std::string conclusion;
    if (auto it = blocks.find("Conclusion:"); it != blocks.end()) conclusion = it->second;
    const std::string& basis = conclusion.empty() ? planner_raw : conclusion;
    const auto cls = classify(basis);
    if (!cls) throw UnparseablePlan("no recognizable state in planner output");
    if (!conclusion.empty()) plan.values["conclusion"] = conclusion;

    switch (*cls) {
        case Classification::Right:
            plan.state = WorkflowStateKind::Right;
            return plan;
        case Classification::Wrong:
            plan.state = WorkflowStateKind::Wrong;
            plan.actions.push_back(Action{ActionType::RewriteWithLlm, "", std::nullopt});
            return plan;
        case Classification::Uncertain:
            break;
    }

    auto questions_it = blocks.find("Questions:");
    if (questions_it == blocks.end() || questions_it->second.empty())
        throw UnparseablePlan("uncertain plan without questions");
    auto target_it = blocks.find("Target area:");
    if (target_it == blocks.end() || target_it->second.empty())
        throw UnparseablePlan("uncertain plan without target area");

    const std::string& target = target_it->second;
    struct Marker {
        std::size_t pos;
        ActionType action;
    };
    std::vector<Marker> markers;
    const std::pair<const char*, ActionType> kMarkers[] = {
        {"1)", ActionType::VlmObjectCrop},
        {"2)", ActionType::VlmExtendedCrop},
        {"3)", ActionType::VlmHighlight},
    };
    for (const auto& [token, action] : kMarkers) {
        const std::size_t pos = target.find(token);
        if (pos != std::string::npos) markers.push_back(Marker{pos, action});
    }
    if (markers.empty()) throw UnparseablePlan("target area names no option 1)/2)/3)");
    std::sort(markers.begin(), markers.end(),
              [](const Marker& a, const Marker& b) { return a.pos < b.pos; });

    plan.values["questions"] = questions_it->second;
    plan.values["target_area"] = target;
    for (const auto& marker : markers)
        plan.actions.push_back(Action{marker.action, questions_it->second, std::nullopt});
    plan.state = state_for_action(markers.front().action);
    return plan;
}

std::string extract_new_description(const std::string& response) {
    static const std::string kToken = "New Description:";
    std::string text;
    const std::size_t pos = response.find(kToken);
    text = trim(pos == std::string::npos ? response : response.substr(pos + kToken.size()));
    if (text.size() >= 2 && text.front() == '\'' && text.back() == '\'')
        text = text.substr(1, text.size() - 2);
    return text;
}

ReflectionVerdict parse_reflection(const std::string& text) {
    ReflectionVerdict verdict;
    verdict.feedback_text = text;
    const std::string lower = to_lower_ascii(text);
    if (const std::size_t pos = lower.find("uncertain"); pos != std::string::npos) {
        verdict.verdict = VerdictKind::Uncertain;
        std::string rest = trim(text.substr(pos + std::string("uncertain").size()));
        while (!rest.empty() && (rest.front() == '.' || rest.front() == ',' ||
                                 rest.front() == ':' || rest.front() == ';'))
            rest = trim(rest.substr(1));
        if (!rest.empty()) verdict.missing_aspects = rest;
        return verdict;
    }
    if (lower.find("wrong") != std::string::npos || lower.find("incorrect") != std::string::npos ||
        lower.find("not correct") != std::string::npos ||
        lower.find("different object category") != std::string::npos ||
        lower.find("conflicts with") != std::string::npos) {
        verdict.verdict = VerdictKind::Wrong;
        return verdict;
    }
    if (lower.find("correct") != std::string::npos) {
        verdict.verdict = VerdictKind::Correct;
        return verdict;
    }
    throw UnparseableReflection("no recognizable verdict in reflector output");
}

namespace {

std::string caption_with_observations(const InfoPool& pool) {
    std::string caption = pool.caption;
    for (const auto& [action, text] : pool.observations)
        caption += "\nSupplementary observation (" + std::string(action_label(action)) + "): " +
                   text;
    return caption;
}

ImageEditSpec edit_for_action(const Action& action, const InfoPool& pool,
                              const WorkflowConfig& config) {
    ImageEditSpec spec;
    spec.box = pool.box;
    spec.extend_factor = config.extend_factor;
    spec.stroke_px = config.stroke_px;
    spec.stroke_color = config.stroke_color;
    switch (action.type) {
        case ActionType::VlmObjectCrop: spec.mode = ImageEditMode::Crop; break;
        case ActionType::VlmExtendedCrop: spec.mode = ImageEditMode::ExtendedCrop; break;
        case ActionType::VlmHighlight: spec.mode = ImageEditMode::Highlight; break;
        default: throw UsageError("no image edit for this action");
    }
    return spec;
}

void record_tool_call(CycleTrace* trace, ActionType action, const std::string& digest,
                      const std::string& response) {
    if (trace) trace->tool_calls.push_back(ToolCallRecord{action, digest, response});
}

} // namespace

InfoPool execute_action(const InfoPool& pool, const Action& action, const Gateways& gateways,
                        const WorkflowConfig& config, const ExecutionContext& context) {
    if (action.type == ActionType::Stop) throw UsageError("execute_action: Stop is not executable");
    if (!gateways.gateway || !gateways.prompts) throw UsageError("gateways not configured");

    InfoPool updated = pool;

    if (action.type == ActionType::RewriteWithLlm) {
        const std::map<std::string, std::string> bindings = {
            {"caption", caption_with_observations(pool)},
            {"chosen_object", format_object_list({{pool.category, pool.box}})},
            {"other_object", format_object_list(pool.other_objects, 1)},
            {"object_description", "'" + pool.latest_expression() + "'"},
        };
        const auto turns = gateways.prompts->render_chat("Rewrite", bindings);
        const std::string response = gateways.gateway->chat(
            gateways.llm, turns,
            CallContext{CallStep::LlmTool, context.record_id, context.cycle_index});
        record_tool_call(context.trace, action.type, turns_digest(turns), response);
        updated.expressions.push_back(extract_new_description(response));
        return updated;
    }

    // VLM re-perception with an image edit.
    const ImageEditSpec spec = action.image_edit ? *action.image_edit
                                                 : edit_for_action(action, pool, config);
    const Image source = load_image(pool.image_ref);
    const Image edited = apply_edit(source, spec);
    const auto png = encode_png(edited);

    std::vector<std::string> questions;
    if (!action.prompt.empty()) questions.push_back(action.prompt);
    else questions.push_back("Describe the " + pool.category + " in detail.");
    const std::string prompt_text =
        render_vlm_tool_prompt(pool.category, pool.latest_expression(), questions);

    ChatTurn turn = user_turn(prompt_text);
    turn.image = ImageAttachment{png, "image/png"};
    const std::vector<ChatTurn> turns = {turn};
    const std::string response = gateways.gateway->vision_chat(
        gateways.vlm, turns,
        CallContext{CallStep::VlmTool, context.record_id, context.cycle_index});
    record_tool_call(context.trace, action.type, turns_digest(turns), response);
    updated.observations.emplace_back(action.type, response);
    return updated;
}

ReflectionVerdict reflect(const InfoPool& pool, const Gateways& gateways,
                          const ExecutionContext& context) {
    if (!gateways.gateway || !gateways.prompts) throw UsageError("gateways not configured");
    const std::map<std::string, std::string> bindings = {
        {"category", pool.category},
        {"caption", pool.caption},
        {"phrase", "'" + pool.latest_expression() + "'"},
    };
    const auto turns = gateways.prompts->render_chat("Reflection", bindings);
    const std::string response = gateways.gateway->chat(
        gateways.llm, turns,
        CallContext{CallStep::Reflection, context.record_id, context.cycle_index});
    if (context.trace) context.trace->reflection_raw = response;

    ReflectionVerdict verdict;
    try {
        verdict = parse_reflection(response);
    } catch (const UnparseableReflection&) {
        verdict = ReflectionVerdict{VerdictKind::Uncertain, response, std::nullopt};
        if (context.trace) context.trace->note = "reflection unparseable, treated as uncertain";
    }
    if (context.trace) context.trace->verdict = verdict;
    return verdict;
}

namespace {

/// Produces (raw text, parsed plan) for one cycle; may consult the gateway.
using PlanFn = std::function<std::pair<std::string, PlanOutcome>(const InfoPool&, int)>;

InfoPool initial_pool(const ObjectRecord& record, int expression_index) {
    if (expression_index < 0 ||
        expression_index >= static_cast<int>(record.raw_expressions.size()))
        throw UsageError("expression_index out of range for record " + record.record_id);
    InfoPool pool;
    pool.image_ref = record.image_path;
    pool.caption = record.caption;
    pool.category = record.category;
    pool.box = record.box;
    pool.other_objects = record.other_objects;
    pool.expressions = {record.raw_expressions[expression_index]};
    pool.iteration = 0;
    return pool;
}

bool plan_has_action(const PlanOutcome& plan, ActionType type) {
    return std::any_of(plan.actions.begin(), plan.actions.end(),
                       [type](const Action& a) { return a.type == type; });
}

RefinementResult run_workflow(const ObjectRecord& record, int expression_index,
                              const Gateways& gateways, const WorkflowConfig& config,
                              const RefineOptions& options, const PlanFn& plan_fn) {
    InfoPool pool = initial_pool(record, expression_index);

    RefinementResult result;
    result.record_id = record.record_id;
    result.expression_index = expression_index;

    bool stop = false;
    bool solved = false;
    int iteration = 0;
    int cycle = 0;

    while (!stop) {
        CycleTrace trace;
        trace.cycle_index = cycle;

        PlanOutcome plan;
        try {
            auto [raw, parsed] = plan_fn(pool, cycle);
            trace.planner_raw = raw;
            plan = parsed;
        } catch (const UnparseablePlan& e) {
            trace.note = std::string("plan failed: ") + e.what();
            result.trace.push_back(std::move(trace));
            break;
        } catch (const std::exception& e) {
            trace.note = std::string("planning call failed: ") + e.what();
            result.trace.push_back(std::move(trace));
            break;
        }
        trace.plan = plan;

        if (!plan.actions.empty() && iteration < config.max_iter) {
            if (options.disabled_action && plan_has_action(plan, *options.disabled_action)) {
                trace.note = std::string("action disabled by profile: ") +
                             to_string(*options.disabled_action);
                result.trace.push_back(std::move(trace));
                break;
            }
            bool cycle_failed = false;
            for (const auto& action : plan.actions) {
                try {
                    pool = execute_action(pool, action, gateways, config,
                                          ExecutionContext{result.record_id, cycle, &trace});
                } catch (const std::exception& e) {
                    trace.note = std::string("tool call failed: ") + e.what();
                    cycle_failed = true;
                    break;
                }
            }
            if (cycle_failed) {
                result.trace.push_back(std::move(trace));
                break;
            }
            try {
                pool.feedback = reflect(pool, gateways,
                                        ExecutionContext{result.record_id, cycle, &trace});
            } catch (const std::exception& e) {
                trace.note = std::string("reflection call failed: ") + e.what();
                result.trace.push_back(std::move(trace));
                break;
            }
            ++iteration;
            pool.iteration = iteration;
            result.trace.push_back(std::move(trace));
        } else if (plan.actions.empty()) {
            solved = true;  // the planner reached a correct expression
            result.trace.push_back(std::move(trace));
        } else {
            // Actions proposed at the iteration cap: nothing executes and the
            // stop condition below ends the loop.
            trace.note = "iteration cap reached, actions not executed";
            result.trace.push_back(std::move(trace));
        }

        stop = solved || iteration == config.max_iter;
        ++cycle;
    }

    result.solved = solved;
    result.cycles_used = iteration;
    result.final_expression = pool.expressions.back();
    return result;
}

} // namespace

RefinementResult refine(const ObjectRecord& record, int expression_index,
                        const Gateways& gateways, const WorkflowConfig& config,
                        const RefineOptions& options) {
    if (!gateways.gateway || !gateways.prompts) throw UsageError("gateways not configured");

    PlanFn plan_fn = [&](const InfoPool& pool, int cycle) {
        const auto turns = build_planner_input(pool);
        const CallContext context{CallStep::Planning, record.record_id + "#" +
                                  std::to_string(expression_index), cycle};
        // one re-ask on a grammar failure, then the cycle fails
        std::string raw = gateways.gateway->chat(gateways.llm, turns, context);
        try {
            return std::make_pair(raw, parse_plan(raw));
        } catch (const UnparseablePlan&) {
            raw = gateways.gateway->chat(gateways.llm, turns, context);
            return std::make_pair(raw, parse_plan(raw));
        }
    };

    ObjectRecord tagged = record;
    tagged.record_id = record.record_id + "#" + std::to_string(expression_index);
    RefinementResult result =
        run_workflow(tagged, expression_index, gateways, config, options, plan_fn);
    result.record_id = record.record_id;
    return result;
}

RefinementResult refine_random_baseline(const ObjectRecord& record, int expression_index,
                                        const Gateways& gateways, const WorkflowConfig& config,
                                        const RefineOptions& options) {
    if (!gateways.gateway || !gateways.prompts) throw UsageError("gateways not configured");

    auto rng = std::make_shared<Rng>(
        mix_seed(config.rng_seed, record.record_id + "#" + std::to_string(expression_index)));

    PlanFn plan_fn = [rng](const InfoPool& pool, int) {
        const WorkflowStateKind state = kAllStates[rng->below(kAllStates.size())];
        PlanOutcome plan;
        plan.state = state;
        plan.reasoning = "uniform random selection";
        const ActionType action = action_for_state(state);
        if (action != ActionType::Stop) {
            std::string prompt;
            if (action != ActionType::RewriteWithLlm)
                prompt = "Describe the " + pool.category + " in detail.";
            plan.actions.push_back(Action{action, prompt, std::nullopt});
        }
        const std::string raw =
            std::string("random planner selected state: ") + to_string(state);
        return std::make_pair(raw, plan);
    };

    ObjectRecord tagged = record;
    tagged.record_id = record.record_id + "#" + std::to_string(expression_index);
    RefinementResult result =
        run_workflow(tagged, expression_index, gateways, config, options, plan_fn);
    result.record_id = record.record_id;
    return result;
}

} // namespace realign
