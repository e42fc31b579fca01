// SPDX-License-Identifier: Apache-2.0
#include "realign/serialization.hpp"

#include "realign/errors.hpp"
#include "realign/util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace realign {

using nlohmann::json;

nlohmann::json to_json(const NormalizedBox& box) {
    return json::array({box.x, box.y, box.w, box.h});
}

NormalizedBox box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("box must be [x, y, w, h]");
    return NormalizedBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                         j[3].get<double>()};
}

nlohmann::json to_json(const Rgb& color) {
    return json::array({color.r, color.g, color.b});
}

Rgb rgb_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("color must be [r, g, b]");
    return Rgb{j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

nlohmann::json to_json(const ImageEditSpec& spec) {
    json j{{"mode", to_string(spec.mode)}, {"box", to_json(spec.box)}};
    if (spec.mode == ImageEditMode::ExtendedCrop) j["extend_factor"] = spec.extend_factor;
    if (spec.mode == ImageEditMode::Highlight) {
        j["stroke_px"] = spec.stroke_px;
        j["stroke_color"] = to_json(spec.stroke_color);
    }
    return j;
}

ImageEditSpec edit_spec_from_json(const json& j) {
    ImageEditSpec spec;
    spec.mode = edit_mode_from_string(j.at("mode").get<std::string>());
    spec.box = box_from_json(j.at("box"));
    if (j.contains("extend_factor")) spec.extend_factor = j["extend_factor"].get<double>();
    if (j.contains("stroke_px")) spec.stroke_px = j["stroke_px"].get<int>();
    if (j.contains("stroke_color")) spec.stroke_color = rgb_from_json(j["stroke_color"]);
    return spec;
}

nlohmann::json to_json(const Action& action) {
    json j{{"type", to_string(action.type)}};
    if (!action.prompt.empty()) j["prompt"] = action.prompt;
    if (action.image_edit) j["image_edit"] = to_json(*action.image_edit);
    return j;
}

Action action_from_json(const json& j) {
    Action action;
    action.type = action_from_string(j.at("type").get<std::string>());
    if (j.contains("prompt")) action.prompt = j["prompt"].get<std::string>();
    if (j.contains("image_edit")) action.image_edit = edit_spec_from_json(j["image_edit"]);
    return action;
}

nlohmann::json to_json(const ReflectionVerdict& verdict) {
    json j{{"verdict", to_string(verdict.verdict)}, {"feedback_text", verdict.feedback_text}};
    if (verdict.missing_aspects) j["missing_aspects"] = *verdict.missing_aspects;
    return j;
}

ReflectionVerdict verdict_from_json(const json& j) {
    ReflectionVerdict verdict;
    verdict.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    verdict.feedback_text = j.at("feedback_text").get<std::string>();
    if (j.contains("missing_aspects"))
        verdict.missing_aspects = j["missing_aspects"].get<std::string>();
    return verdict;
}

nlohmann::json to_json(const PlanOutcome& plan) {
    json actions = json::array();
    for (const auto& action : plan.actions) actions.push_back(to_json(action));
    return json{{"reasoning", plan.reasoning},
                {"state", to_string(plan.state)},
                {"actions", actions},
                {"values", plan.values}};
}

PlanOutcome plan_from_json(const json& j) {
    PlanOutcome plan;
    plan.reasoning = j.at("reasoning").get<std::string>();
    plan.state = state_from_string(j.at("state").get<std::string>());
    for (const auto& a : j.at("actions")) plan.actions.push_back(action_from_json(a));
    if (j.contains("values"))
        plan.values = j["values"].get<std::map<std::string, std::string>>();
    return plan;
}

nlohmann::json to_json(const CycleTrace& trace) {
    json calls = json::array();
    for (const auto& call : trace.tool_calls) {
        calls.push_back(json{{"action", to_string(call.action)},
                             {"request_digest", call.request_digest},
                             {"response", call.response}});
    }
    json j{{"cycle_index", trace.cycle_index},
           {"planner_raw", trace.planner_raw},
           {"plan", to_json(trace.plan)},
           {"tool_calls", calls}};
    if (trace.reflection_raw) j["reflection_raw"] = *trace.reflection_raw;
    if (trace.verdict) j["verdict"] = to_json(*trace.verdict);
    if (!trace.note.empty()) j["note"] = trace.note;
    return j;
}

CycleTrace cycle_trace_from_json(const json& j) {
    CycleTrace trace;
    trace.cycle_index = j.at("cycle_index").get<int>();
    trace.planner_raw = j.at("planner_raw").get<std::string>();
    trace.plan = plan_from_json(j.at("plan"));
    for (const auto& c : j.at("tool_calls")) {
        trace.tool_calls.push_back(ToolCallRecord{
            action_from_string(c.at("action").get<std::string>()),
            c.at("request_digest").get<std::string>(),
            c.at("response").get<std::string>(),
        });
    }
    if (j.contains("reflection_raw")) trace.reflection_raw = j["reflection_raw"].get<std::string>();
    if (j.contains("verdict")) trace.verdict = verdict_from_json(j["verdict"]);
    if (j.contains("note")) trace.note = j["note"].get<std::string>();
    return trace;
}

nlohmann::json to_json(const RefinementResult& result) {
    json trace = json::array();
    for (const auto& cycle : result.trace) trace.push_back(to_json(cycle));
    return json{{"record_id", result.record_id},
                {"expression_index", result.expression_index},
                {"final_expression", result.final_expression},
                {"solved", result.solved},
                {"cycles_used", result.cycles_used},
                {"trace", trace}};
}

RefinementResult refinement_from_json(const json& j) {
    RefinementResult result;
    result.record_id = j.at("record_id").get<std::string>();
    result.expression_index = j.at("expression_index").get<int>();
    result.final_expression = j.at("final_expression").get<std::string>();
    result.solved = j.at("solved").get<bool>();
    result.cycles_used = j.at("cycles_used").get<int>();
    for (const auto& c : j.at("trace")) result.trace.push_back(cycle_trace_from_json(c));
    return result;
}

nlohmann::json to_json(const ObjectRecord& record) {
    json others = json::array();
    for (const auto& [category, box] : record.other_objects)
        others.push_back(json{{"category", category}, {"box", to_json(box)}});
    json refined = json::array();
    for (const auto& r : record.refined_expressions) refined.push_back(to_json(r));
    json j{{"record_id", record.record_id},
           {"image_path", record.image_path},
           {"image_size", json::array({record.image_width, record.image_height})},
           {"category", record.category},
           {"box", to_json(record.box)},
           {"caption", record.caption},
           {"raw_expressions", record.raw_expressions}};
    if (!record.refined_expressions.empty()) j["refined_expressions"] = refined;
    if (!record.other_objects.empty()) j["other_objects"] = others;
    if (!record.flags.empty()) j["flags"] = record.flags;
    return j;
}

ObjectRecord record_from_json(const json& j) {
    ObjectRecord record;
    record.record_id = j.at("record_id").get<std::string>();
    record.image_path = j.value("image_path", std::string{});
    if (j.contains("image_size")) {
        const auto& size = j["image_size"];
        if (!size.is_array() || size.size() != 2) throw ParseError("image_size must be [w, h]");
        record.image_width = size[0].get<int>();
        record.image_height = size[1].get<int>();
    }
    record.category = j.at("category").get<std::string>();
    if (j.contains("box")) {
        record.box = box_from_json(j["box"]);
    } else if (j.contains("box_pixels")) {
        // COCO-style [left, top, width, height] in pixels, normalized here.
        const auto& b = j["box_pixels"];
        if (!b.is_array() || b.size() != 4) throw ParseError("box_pixels must be [l, t, w, h]");
        if (record.image_width <= 0 || record.image_height <= 0)
            throw ParseError("box_pixels requires a positive image_size");
        record.box = NormalizedBox{
            b[0].get<double>() / record.image_width,
            b[1].get<double>() / record.image_height,
            b[2].get<double>() / record.image_width,
            b[3].get<double>() / record.image_height,
        };
    } else {
        throw ParseError("record has neither box nor box_pixels");
    }
    record.caption = j.value("caption", std::string{});
    if (j.contains("raw_expressions"))
        record.raw_expressions = j["raw_expressions"].get<std::vector<std::string>>();
    if (j.contains("refined_expressions"))
        for (const auto& r : j["refined_expressions"])
            record.refined_expressions.push_back(refinement_from_json(r));
    if (j.contains("other_objects")) {
        for (const auto& o : j["other_objects"])
            record.other_objects.emplace_back(o.at("category").get<std::string>(),
                                              box_from_json(o.at("box")));
    }
    if (j.contains("flags")) record.flags = j["flags"].get<std::vector<std::string>>();
    return record;
}

nlohmann::json to_json(const WorkflowConfig& config) {
    return json{{"max_iter", config.max_iter},
                {"filter_threshold", config.filter_threshold},
                {"prompts_per_object", config.prompts_per_object},
                {"synonym_rounds", config.synonym_rounds},
                {"extend_factor", config.extend_factor},
                {"stroke_px", config.stroke_px},
                {"stroke_color", to_json(config.stroke_color)},
                {"retry_limit", config.retry_limit},
                {"rng_seed", config.rng_seed}};
}

WorkflowConfig config_from_json(const json& j) {
    WorkflowConfig config;
    config.max_iter = j.value("max_iter", config.max_iter);
    config.filter_threshold = j.value("filter_threshold", config.filter_threshold);
    config.prompts_per_object = j.value("prompts_per_object", config.prompts_per_object);
    config.synonym_rounds = j.value("synonym_rounds", config.synonym_rounds);
    config.extend_factor = j.value("extend_factor", config.extend_factor);
    config.stroke_px = j.value("stroke_px", config.stroke_px);
    if (j.contains("stroke_color")) config.stroke_color = rgb_from_json(j["stroke_color"]);
    config.retry_limit = j.value("retry_limit", config.retry_limit);
    config.rng_seed = j.value("rng_seed", config.rng_seed);
    return config;
}

nlohmann::json trace_document(const RefinementResult& result) {
    return json{{"schema_version", kSchemaVersion}, {"result", to_json(result)}};
}

RefinementResult trace_document_parse(const json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion)
        throw ParseError("unsupported trace schema_version");
    return refinement_from_json(j.at("result"));
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<json> lines;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
        }
    }
    return lines;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& lines) {
    std::ostringstream out;
    for (const auto& line : lines) out << line.dump() << '\n';
    write_file_atomic(path, out.str());
}

void append_jsonl_line(const std::string& path, const nlohmann::json& line) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw ValidationError("cannot append to file: " + path);
    out << line.dump() << '\n';
    out.flush();
}

std::vector<ObjectRecord> read_records_jsonl(const std::string& path) {
    std::vector<ObjectRecord> records;
    long line_number = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line_number;
        try {
            records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_number);
        }
    }
    return records;
}

void write_records_jsonl(const std::string& path, const std::vector<ObjectRecord>& records) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& record : records) lines.push_back(to_json(record));
    write_jsonl(path, lines);
}

} // namespace realign
