// SPDX-License-Identifier: Apache-2.0
#include "realign/serialization.hpp"
#include "realign/types.hpp"
#include "realign/util.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace realign;

namespace {

ObjectRecord sample_record() {
    ObjectRecord record;
    record.record_id = "rec-1";
    record.image_path = "img/rec-1.png";
    record.image_width = 1000;
    record.image_height = 1000;
    record.category = "Home appliance";
    record.box = NormalizedBox{0.68, 0.52, 0.15, 0.05};
    record.caption = "A kitchen with appliances.";
    record.raw_expressions = {"appliance for cleaning dishes with water and detergent"};
    record.other_objects = {{"Sink", NormalizedBox{0.1, 0.2, 0.2, 0.2}}};
    return record;
}

} // namespace

TEST_CASE("validate_record flags box and expression violations") {
    ObjectRecord record = sample_record();
    CHECK(validate_record(record).empty());

    record.box = NormalizedBox{0.7, 0.1, 0.5, 0.2};  // x + w = 1.2
    auto issues = validate_record(record);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "box exceeds right edge");

    record = sample_record();
    record.raw_expressions.clear();
    issues = validate_record(record);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "raw_expressions empty");
}

TEST_CASE("validate_record accepts boundary boxes within tolerance") {
    ObjectRecord record = sample_record();
    record.box = NormalizedBox{0.5, 0.5, 0.5, 0.5};  // exactly touches the edges
    CHECK(validate_record(record).empty());
    record.box = NormalizedBox{0.0, 0.0, 1.0, 1.0};
    CHECK(validate_record(record).empty());
}

TEST_CASE("refined expressions must trace to distinct raw expressions") {
    ObjectRecord record = sample_record();
    record.raw_expressions = {"a", "b"};
    RefinementResult r1;
    r1.expression_index = 0;
    RefinementResult r2;
    r2.expression_index = 0;
    record.refined_expressions = {r1, r2};
    auto issues = validate_record(record);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "refined expression index duplicated");

    record.refined_expressions[1].expression_index = 5;
    issues = validate_record(record);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "refined expression index out of range");
}

TEST_CASE("state/action mapping is a bijection") {
    for (auto state : kAllStates) CHECK(state_for_action(action_for_state(state)) == state);
    for (auto action : kAllActions) CHECK(action_for_state(state_for_action(action)) == action);
    // spot checks of the fixed pairing
    CHECK(action_for_state(WorkflowStateKind::Right) == ActionType::Stop);
    CHECK(action_for_state(WorkflowStateKind::Wrong) == ActionType::RewriteWithLlm);
    CHECK(action_for_state(WorkflowStateKind::UncertainCategoryAttribute) ==
          ActionType::VlmObjectCrop);
    CHECK(action_for_state(WorkflowStateKind::UncertainRelationAccessory) ==
          ActionType::VlmExtendedCrop);
    CHECK(action_for_state(WorkflowStateKind::UncertainLocationBehavior) ==
          ActionType::VlmHighlight);
}

TEST_CASE("aspect to action mapping follows the reveal rule") {
    CHECK(matching_action_for_aspect(MisalignmentAspect::Category) == ActionType::VlmObjectCrop);
    CHECK(matching_action_for_aspect(MisalignmentAspect::Attribute) == ActionType::VlmObjectCrop);
    CHECK(matching_action_for_aspect(MisalignmentAspect::Relation) == ActionType::VlmExtendedCrop);
    CHECK(matching_action_for_aspect(MisalignmentAspect::Accessory) ==
          ActionType::VlmExtendedCrop);
    CHECK(matching_action_for_aspect(MisalignmentAspect::Location) == ActionType::VlmHighlight);
    CHECK(matching_action_for_aspect(MisalignmentAspect::Behavior) == ActionType::VlmHighlight);
}

TEST_CASE("pool invariants: feedback presence tracks iteration") {
    InfoPool pool;
    pool.box = NormalizedBox{0.2, 0.2, 0.3, 0.3};
    pool.expressions = {"a mug"};
    CHECK(validate_pool(pool).empty());

    pool.feedback = ReflectionVerdict{VerdictKind::Correct, "ok", std::nullopt};
    auto issues = validate_pool(pool);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "feedback present at iteration 0");

    pool.iteration = 1;
    CHECK(validate_pool(pool).empty());

    pool.feedback.reset();
    issues = validate_pool(pool);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0] == "feedback absent after iteration 0");
}

TEST_CASE("record serialization round-trips on generated values") {
    Rng rng(42);
    for (int i = 0; i < 50; ++i) {
        ObjectRecord record = sample_record();
        record.record_id = "rec-" + std::to_string(i);
        record.box = NormalizedBox{rng.uniform01() * 0.5, rng.uniform01() * 0.5,
                                   0.01 + rng.uniform01() * 0.4, 0.01 + rng.uniform01() * 0.4};
        record.raw_expressions.push_back("expr " + std::to_string(rng.below(1000)));
        if (i % 3 == 0) record.flags.push_back("note");
        if (i % 2 == 0) {
            RefinementResult result;
            result.record_id = record.record_id;
            result.expression_index = 1;
            result.final_expression = "final " + std::to_string(i);
            result.solved = (i % 4 == 0);
            result.cycles_used = i % 5;
            CycleTrace trace;
            trace.cycle_index = 0;
            trace.planner_raw = "Conclusion: The phrase is wrong.";
            trace.plan.state = WorkflowStateKind::Wrong;
            trace.plan.actions.push_back(Action{ActionType::RewriteWithLlm, "", std::nullopt});
            trace.tool_calls.push_back(ToolCallRecord{ActionType::RewriteWithLlm, "abcd", "resp"});
            trace.verdict = ReflectionVerdict{VerdictKind::Uncertain, "text", "missing color"};
            result.trace.push_back(trace);
            record.refined_expressions.push_back(result);
        }
        const ObjectRecord parsed = record_from_json(to_json(record));
        CHECK(parsed == record);
    }
}

TEST_CASE("refinement result serialization round-trips") {
    RefinementResult result;
    result.record_id = "id";
    result.expression_index = 2;
    result.final_expression = "a red mug";
    result.solved = true;
    result.cycles_used = 3;
    CycleTrace trace;
    trace.cycle_index = 1;
    trace.plan.state = WorkflowStateKind::UncertainLocationBehavior;
    trace.plan.actions.push_back(
        Action{ActionType::VlmHighlight, "1. Where is it?",
               ImageEditSpec{ImageEditMode::Highlight, {0.1, 0.1, 0.2, 0.2}, 1.5, 4, {255, 0, 0}}});
    trace.note = "reflection unparseable, treated as uncertain";
    result.trace.push_back(trace);
    CHECK(refinement_from_json(to_json(result)) == result);

    const auto doc = trace_document(result);
    CHECK(trace_document_parse(doc) == result);
}

TEST_CASE("workflow config defaults match the documented values") {
    const WorkflowConfig config;
    CHECK(config.max_iter == 4);
    CHECK(config.filter_threshold == 0.5);
    CHECK(config.prompts_per_object == 2);
    CHECK(config.synonym_rounds == 2);
    CHECK(config.extend_factor == 1.5);
    CHECK(config.stroke_px == 4);
    CHECK(config.stroke_color == Rgb{255, 0, 0});
    CHECK(validate_config(config).empty());
    CHECK(config_from_json(to_json(config)) == config);
}

TEST_CASE("fraction formatting") {
    CHECK(format_fraction(0.68) == "0.68");
    CHECK(format_fraction(0.0) == "0.0");
    CHECK(format_fraction(0.05) == "0.05");
    CHECK(format_fraction(1.0) == "1.0");
    CHECK(format_fraction(0.26) == "0.26");
}

TEST_CASE("deterministic rng helpers") {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.below(97) == b.below(97));
    Rng c(7);
    auto s1 = c.sample_distinct(3, 9);
    Rng d(7);
    auto s2 = d.sample_distinct(3, 9);
    CHECK(s1 == s2);
    CHECK(s1.size() == 3);
}
