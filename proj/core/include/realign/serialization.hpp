// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace realign {

// JSON shapes are stable and schema-versioned at the file level; arrays for
// boxes ([x, y, w, h]) and image sizes ([w, h]) keep JSONL lines compact.

constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const NormalizedBox& box);
NormalizedBox box_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Rgb& color);
Rgb rgb_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ImageEditSpec& spec);
ImageEditSpec edit_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Action& action);
Action action_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ReflectionVerdict& verdict);
ReflectionVerdict verdict_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PlanOutcome& plan);
PlanOutcome plan_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CycleTrace& trace);
CycleTrace cycle_trace_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RefinementResult& result);
RefinementResult refinement_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ObjectRecord& record);
ObjectRecord record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const WorkflowConfig& config);
WorkflowConfig config_from_json(const nlohmann::json& j);

/// Versioned trace document written to traces/<id>.json.
nlohmann::json trace_document(const RefinementResult& result);
RefinementResult trace_document_parse(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// JSONL files (one JSON object per line, UTF-8, LF)
// ---------------------------------------------------------------------------

std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& lines);
void append_jsonl_line(const std::string& path, const nlohmann::json& line);

std::vector<ObjectRecord> read_records_jsonl(const std::string& path);
void write_records_jsonl(const std::string& path, const std::vector<ObjectRecord>& records);

} // namespace realign
