// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace realign {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Axis-aligned box in normalized image coordinates. The image's top-left
/// corner is [0, 0] and its bottom-right corner is [1, 1]; (x, y) is the box's
/// top-left corner, (w, h) its extent. This is the canonical form everywhere;
/// pixel conversion happens only inside image_ops.
struct NormalizedBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const NormalizedBox&) const = default;
};

/// Violation messages, empty when the box is well-formed.
std::vector<std::string> validate_box(const NormalizedBox& box);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

// ---------------------------------------------------------------------------
// Workflow state machine
// ---------------------------------------------------------------------------

/// The five planner states. Closed set; parsing yields exactly one or fails.
enum class WorkflowStateKind {
    Right,
    Wrong,
    UncertainCategoryAttribute,
    UncertainRelationAccessory,
    UncertainLocationBehavior,
};

/// The five actions, one per state.
enum class ActionType {
    Stop,
    RewriteWithLlm,
    VlmObjectCrop,
    VlmExtendedCrop,
    VlmHighlight,
};

constexpr std::array<WorkflowStateKind, 5> kAllStates = {
    WorkflowStateKind::Right,
    WorkflowStateKind::Wrong,
    WorkflowStateKind::UncertainCategoryAttribute,
    WorkflowStateKind::UncertainRelationAccessory,
    WorkflowStateKind::UncertainLocationBehavior,
};

constexpr std::array<ActionType, 5> kAllActions = {
    ActionType::Stop,
    ActionType::RewriteWithLlm,
    ActionType::VlmObjectCrop,
    ActionType::VlmExtendedCrop,
    ActionType::VlmHighlight,
};

/// State -> action bijection (Right->Stop, Wrong->Rewrite, the three
/// uncertain states -> crop / extended crop / highlight).
ActionType action_for_state(WorkflowStateKind state);
WorkflowStateKind state_for_action(ActionType action);

const char* to_string(WorkflowStateKind state);
const char* to_string(ActionType action);
/// Short human label used in planner inputs and traces ("object crop", ...).
const char* action_label(ActionType action);

WorkflowStateKind state_from_string(const std::string& s);
ActionType action_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Image edits
// ---------------------------------------------------------------------------

enum class ImageEditMode { Crop, ExtendedCrop, Highlight };

const char* to_string(ImageEditMode mode);
ImageEditMode edit_mode_from_string(const std::string& s);

/// Parameters of one planned image edit. extend_factor applies to
/// ExtendedCrop only; stroke_px / stroke_color to Highlight only.
struct ImageEditSpec {
    ImageEditMode mode = ImageEditMode::Crop;
    NormalizedBox box;
    double extend_factor = 1.5;
    int stroke_px = 4;
    Rgb stroke_color{255, 0, 0};

    bool operator==(const ImageEditSpec&) const = default;
};

/// One planned action. Stop carries nothing; RewriteWithLlm carries a prompt
/// only; the three VLM actions carry prompt + image edit (the edit is
/// materialized from the pool's box and config when the action executes).
struct Action {
    ActionType type = ActionType::Stop;
    std::string prompt;
    std::optional<ImageEditSpec> image_edit;

    bool operator==(const Action&) const = default;
};

// ---------------------------------------------------------------------------
// Reflection
// ---------------------------------------------------------------------------

enum class VerdictKind { Correct, Uncertain, Wrong };

const char* to_string(VerdictKind verdict);
VerdictKind verdict_from_string(const std::string& s);

/// Parsed reflector output. The verdict is always derived from feedback_text
/// by the documented parse rule, never set independently.
struct ReflectionVerdict {
    VerdictKind verdict = VerdictKind::Uncertain;
    std::string feedback_text;
    std::optional<std::string> missing_aspects;

    bool operator==(const ReflectionVerdict&) const = default;
};

// ---------------------------------------------------------------------------
// Misalignment taxonomy
// ---------------------------------------------------------------------------

enum class MisalignmentAspect { Category, Attribute, Accessory, Location, Relation, Behavior };

constexpr std::array<MisalignmentAspect, 6> kAllAspects = {
    MisalignmentAspect::Category,  MisalignmentAspect::Attribute,
    MisalignmentAspect::Accessory, MisalignmentAspect::Location,
    MisalignmentAspect::Relation,  MisalignmentAspect::Behavior,
};

const char* to_string(MisalignmentAspect aspect);
MisalignmentAspect aspect_from_string(const std::string& s);

/// Which VLM action reveals ground truth for a given aspect:
/// category/attribute -> crop, relation/accessory -> extended crop,
/// location/behavior -> highlight.
ActionType matching_action_for_aspect(MisalignmentAspect aspect);

// ---------------------------------------------------------------------------
// Plans and traces
// ---------------------------------------------------------------------------

/// Parsed planner output for one cycle.
struct PlanOutcome {
    std::string reasoning;
    WorkflowStateKind state = WorkflowStateKind::Right;
    std::vector<Action> actions;                // empty exactly when state == Right
    std::map<std::string, std::string> values;  // tool parameters (questions, target area, ...)

    bool operator==(const PlanOutcome&) const = default;
};

struct ToolCallRecord {
    ActionType action = ActionType::Stop;
    std::string request_digest;
    std::string response;

    bool operator==(const ToolCallRecord&) const = default;
};

/// Audit record of one workflow cycle.
struct CycleTrace {
    int cycle_index = 0;
    std::string planner_raw;
    PlanOutcome plan;
    std::vector<ToolCallRecord> tool_calls;
    std::optional<std::string> reflection_raw;
    std::optional<ReflectionVerdict> verdict;
    std::string note;  // non-empty when something degraded or failed this cycle

    bool operator==(const CycleTrace&) const = default;
};

/// Outcome of refining one expression.
struct RefinementResult {
    std::string record_id;
    int expression_index = 0;
    std::string final_expression;
    bool solved = false;
    int cycles_used = 0;
    std::vector<CycleTrace> trace;

    bool operator==(const RefinementResult&) const = default;
};

// ---------------------------------------------------------------------------
// Work items
// ---------------------------------------------------------------------------

/// One image+object+expression work item flowing through every stage.
struct ObjectRecord {
    std::string record_id;
    std::string image_path;
    int image_width = 0;
    int image_height = 0;
    std::string category;
    NormalizedBox box;
    std::string caption;
    std::vector<std::string> raw_expressions;
    std::vector<RefinementResult> refined_expressions;
    std::vector<std::pair<std::string, NormalizedBox>> other_objects;
    std::vector<std::string> flags;  // per-record processing notes (stage failures etc.)

    bool operator==(const ObjectRecord&) const = default;
};

/// Returns violation descriptions; empty iff all invariants hold.
std::vector<std::string> validate_record(const ObjectRecord& record);

/// Per-expression mutable context threaded through the workflow loop.
/// expressions is append-only and starts with the raw expression; feedback is
/// absent exactly while iteration == 0.
struct InfoPool {
    std::string image_ref;
    std::string caption;
    std::string category;
    NormalizedBox box;
    std::vector<std::pair<std::string, NormalizedBox>> other_objects;
    std::vector<std::string> expressions;
    std::vector<std::pair<ActionType, std::string>> observations;
    std::optional<ReflectionVerdict> feedback;
    int iteration = 0;

    const std::string& latest_expression() const { return expressions.back(); }
};

std::vector<std::string> validate_pool(const InfoPool& pool);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct WorkflowConfig {
    int max_iter = 4;
    double filter_threshold = 0.5;  // pairs scoring below this are routed to refinement
    int prompts_per_object = 2;
    int synonym_rounds = 2;
    double extend_factor = 1.5;
    int stroke_px = 4;
    Rgb stroke_color{255, 0, 0};
    int retry_limit = 2;  // plan re-asks before a cycle is marked failed
    std::uint64_t rng_seed = 0;

    bool operator==(const WorkflowConfig&) const = default;
};

std::vector<std::string> validate_config(const WorkflowConfig& config);

} // namespace realign
