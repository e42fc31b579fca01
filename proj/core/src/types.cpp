// SPDX-License-Identifier: Apache-2.0
#include "realign/types.hpp"

#include "realign/errors.hpp"

#include <set>

namespace realign {

namespace {
constexpr double kEdgeTolerance = 1e-9;
}

std::vector<std::string> validate_box(const NormalizedBox& box) {
    std::vector<std::string> issues;
    if (box.x < 0.0) issues.push_back("box left negative");
    if (box.y < 0.0) issues.push_back("box top negative");
    if (!(box.w > 0.0)) issues.push_back("box width not positive");
    if (!(box.h > 0.0)) issues.push_back("box height not positive");
    if (box.x + box.w > 1.0 + kEdgeTolerance) issues.push_back("box exceeds right edge");
    if (box.y + box.h > 1.0 + kEdgeTolerance) issues.push_back("box exceeds bottom edge");
    return issues;
}

ActionType action_for_state(WorkflowStateKind state) {
    switch (state) {
        case WorkflowStateKind::Right: return ActionType::Stop;
        case WorkflowStateKind::Wrong: return ActionType::RewriteWithLlm;
        case WorkflowStateKind::UncertainCategoryAttribute: return ActionType::VlmObjectCrop;
        case WorkflowStateKind::UncertainRelationAccessory: return ActionType::VlmExtendedCrop;
        case WorkflowStateKind::UncertainLocationBehavior: return ActionType::VlmHighlight;
    }
    throw UsageError("invalid state");
}

WorkflowStateKind state_for_action(ActionType action) {
    switch (action) {
        case ActionType::Stop: return WorkflowStateKind::Right;
        case ActionType::RewriteWithLlm: return WorkflowStateKind::Wrong;
        case ActionType::VlmObjectCrop: return WorkflowStateKind::UncertainCategoryAttribute;
        case ActionType::VlmExtendedCrop: return WorkflowStateKind::UncertainRelationAccessory;
        case ActionType::VlmHighlight: return WorkflowStateKind::UncertainLocationBehavior;
    }
    throw UsageError("invalid action");
}

const char* to_string(WorkflowStateKind state) {
    switch (state) {
        case WorkflowStateKind::Right: return "right";
        case WorkflowStateKind::Wrong: return "wrong";
        case WorkflowStateKind::UncertainCategoryAttribute: return "uncertain_category_attribute";
        case WorkflowStateKind::UncertainRelationAccessory: return "uncertain_relation_accessory";
        case WorkflowStateKind::UncertainLocationBehavior: return "uncertain_location_behavior";
    }
    return "?";
}

const char* to_string(ActionType action) {
    switch (action) {
        case ActionType::Stop: return "stop";
        case ActionType::RewriteWithLlm: return "rewrite_with_llm";
        case ActionType::VlmObjectCrop: return "vlm_object_crop";
        case ActionType::VlmExtendedCrop: return "vlm_extended_crop";
        case ActionType::VlmHighlight: return "vlm_highlight";
    }
    return "?";
}

const char* action_label(ActionType action) {
    switch (action) {
        case ActionType::Stop: return "stop";
        case ActionType::RewriteWithLlm: return "rewrite";
        case ActionType::VlmObjectCrop: return "object crop";
        case ActionType::VlmExtendedCrop: return "extended object crop";
        case ActionType::VlmHighlight: return "object highlight";
    }
    return "?";
}

WorkflowStateKind state_from_string(const std::string& s) {
    for (auto state : kAllStates)
        if (s == to_string(state)) return state;
    throw ParseError("unknown state: " + s);
}

ActionType action_from_string(const std::string& s) {
    for (auto action : kAllActions)
        if (s == to_string(action)) return action;
    throw ParseError("unknown action: " + s);
}

const char* to_string(ImageEditMode mode) {
    switch (mode) {
        case ImageEditMode::Crop: return "crop";
        case ImageEditMode::ExtendedCrop: return "extended_crop";
        case ImageEditMode::Highlight: return "highlight";
    }
    return "?";
}

ImageEditMode edit_mode_from_string(const std::string& s) {
    if (s == "crop") return ImageEditMode::Crop;
    if (s == "extended_crop") return ImageEditMode::ExtendedCrop;
    if (s == "highlight") return ImageEditMode::Highlight;
    throw ParseError("unknown edit mode: " + s);
}

const char* to_string(VerdictKind verdict) {
    switch (verdict) {
        case VerdictKind::Correct: return "correct";
        case VerdictKind::Uncertain: return "uncertain";
        case VerdictKind::Wrong: return "wrong";
    }
    return "?";
}

VerdictKind verdict_from_string(const std::string& s) {
    if (s == "correct") return VerdictKind::Correct;
    if (s == "uncertain") return VerdictKind::Uncertain;
    if (s == "wrong") return VerdictKind::Wrong;
    throw ParseError("unknown verdict: " + s);
}

const char* to_string(MisalignmentAspect aspect) {
    switch (aspect) {
        case MisalignmentAspect::Category: return "category";
        case MisalignmentAspect::Attribute: return "attribute";
        case MisalignmentAspect::Accessory: return "accessory";
        case MisalignmentAspect::Location: return "location";
        case MisalignmentAspect::Relation: return "relation";
        case MisalignmentAspect::Behavior: return "behavior";
    }
    return "?";
}

MisalignmentAspect aspect_from_string(const std::string& s) {
    for (auto aspect : kAllAspects)
        if (s == to_string(aspect)) return aspect;
    throw ParseError("unknown aspect: " + s);
}

ActionType matching_action_for_aspect(MisalignmentAspect aspect) {
    switch (aspect) {
        case MisalignmentAspect::Category:
        case MisalignmentAspect::Attribute: return ActionType::VlmObjectCrop;
        case MisalignmentAspect::Relation:
        case MisalignmentAspect::Accessory: return ActionType::VlmExtendedCrop;
        case MisalignmentAspect::Location:
        case MisalignmentAspect::Behavior: return ActionType::VlmHighlight;
    }
    throw UsageError("invalid aspect");
}

std::vector<std::string> validate_record(const ObjectRecord& record) {
    std::vector<std::string> issues;
    if (record.record_id.empty()) issues.push_back("record_id empty");
    if (record.image_width <= 0 || record.image_height <= 0)
        issues.push_back("image_size not positive");
    if (record.category.empty()) issues.push_back("category empty");
    for (auto& issue : validate_box(record.box)) issues.push_back(issue);
    if (record.raw_expressions.empty()) issues.push_back("raw_expressions empty");
    for (const auto& [category, box] : record.other_objects) {
        if (category.empty()) issues.push_back("other object category empty");
        for (auto& issue : validate_box(box)) issues.push_back("other object: " + issue);
    }

    std::set<int> seen_indices;
    for (const auto& refined : record.refined_expressions) {
        if (refined.expression_index < 0 ||
            refined.expression_index >= static_cast<int>(record.raw_expressions.size())) {
            issues.push_back("refined expression index out of range");
        } else if (!seen_indices.insert(refined.expression_index).second) {
            issues.push_back("refined expression index duplicated");
        }
    }
    return issues;
}

std::vector<std::string> validate_pool(const InfoPool& pool) {
    std::vector<std::string> issues;
    if (pool.expressions.empty()) issues.push_back("expressions empty");
    if (pool.iteration < 0) issues.push_back("iteration negative");
    if (pool.iteration == 0 && pool.feedback.has_value())
        issues.push_back("feedback present at iteration 0");
    if (pool.iteration > 0 && !pool.feedback.has_value())
        issues.push_back("feedback absent after iteration 0");
    for (auto& issue : validate_box(pool.box)) issues.push_back(issue);
    return issues;
}

std::vector<std::string> validate_config(const WorkflowConfig& config) {
    std::vector<std::string> issues;
    if (config.max_iter < 0) issues.push_back("max_iter negative");
    if (config.filter_threshold < 0.0 || config.filter_threshold > 1.0)
        issues.push_back("filter_threshold outside [0,1]");
    if (config.prompts_per_object < 1) issues.push_back("prompts_per_object < 1");
    if (config.synonym_rounds < 0) issues.push_back("synonym_rounds negative");
    if (config.extend_factor < 1.0) issues.push_back("extend_factor < 1");
    if (config.stroke_px < 1) issues.push_back("stroke_px < 1");
    if (config.retry_limit < 0) issues.push_back("retry_limit negative");
    return issues;
}

} // namespace realign
