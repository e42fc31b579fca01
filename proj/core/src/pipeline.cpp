// SPDX-License-Identifier: Apache-2.0
#include "realign/pipeline.hpp"

#include "realign/errors.hpp"
#include "realign/image.hpp"
#include "realign/prompts.hpp"
#include "realign/serialization.hpp"
#include "realign/util.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

namespace realign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kToolVersion = "realign 0.1.0";

std::string file_digest(const std::string& path) {
    return digest_hex(read_file(path));
}

std::string work_key(const std::string& record_id, int expression_index) {
    return record_id + "#" + std::to_string(expression_index);
}
} // namespace

// ---------------------------------------------------------------------------
// Pair serialization
// ---------------------------------------------------------------------------

json to_json(const ScoredPair& pair) {
    json j{{"record_id", pair.record_id},
           {"expression_index", pair.expression_index},
           {"expression", pair.expression},
           {"score", pair.score},
           {"kept", pair.kept}};
    if (!pair.flags.empty()) j["flags"] = pair.flags;
    return j;
}

ScoredPair pair_from_json(const json& j) {
    ScoredPair pair;
    pair.record_id = j.at("record_id").get<std::string>();
    pair.expression_index = j.at("expression_index").get<int>();
    pair.expression = j.at("expression").get<std::string>();
    pair.score = j.at("score").get<double>();
    pair.kept = j.at("kept").get<bool>();
    if (j.contains("flags")) pair.flags = j["flags"].get<std::vector<std::string>>();
    return pair;
}

std::vector<ScoredPair> read_pairs_jsonl(const std::string& path) {
    std::vector<ScoredPair> pairs;
    for (const auto& j : read_jsonl(path)) pairs.push_back(pair_from_json(j));
    return pairs;
}

void write_pairs_jsonl(const std::string& path, const std::vector<ScoredPair>& pairs) {
    std::vector<json> lines;
    lines.reserve(pairs.size());
    for (const auto& pair : pairs) lines.push_back(to_json(pair));
    write_jsonl(path, lines);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

json to_json(const DatasetManifest& manifest) {
    json counts = json::object();
    for (const auto& [stage, c] : manifest.counts)
        counts[stage] = json{{"input", c.input}, {"output", c.output}, {"flagged", c.flagged}};
    json markers = json::object();
    for (const auto& [stage, files] : manifest.stage_markers) {
        json m = json::object();
        for (const auto& [file, digest] : files) m[file] = digest;
        markers[stage] = m;
    }
    return json{{"schema_version", manifest.schema_version},
                {"tool_version", manifest.tool_version},
                {"created_at", manifest.created_at},
                {"updated_at", manifest.updated_at},
                {"stage", manifest.stage},
                {"config", manifest.config_snapshot},
                {"input_digests", manifest.input_digests},
                {"counts", counts},
                {"stage_markers", markers}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest manifest;
    manifest.schema_version = j.value("schema_version", 1);
    manifest.tool_version = j.value("tool_version", "");
    manifest.created_at = j.value("created_at", "");
    manifest.updated_at = j.value("updated_at", "");
    manifest.stage = j.value("stage", "");
    if (j.contains("config")) manifest.config_snapshot = j["config"];
    if (j.contains("input_digests"))
        manifest.input_digests = j["input_digests"].get<std::map<std::string, std::string>>();
    if (j.contains("counts")) {
        for (const auto& [stage, c] : j["counts"].items()) {
            manifest.counts[stage] = StageCounts{c.value("input", 0L), c.value("output", 0L),
                                                 c.value("flagged", 0L)};
        }
    }
    if (j.contains("stage_markers")) {
        for (const auto& [stage, files] : j["stage_markers"].items()) {
            std::map<std::string, std::string> m;
            for (const auto& [file, digest] : files.items())
                m[file] = digest.get<std::string>();
            manifest.stage_markers[stage] = std::move(m);
        }
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// StageCheckpoint
// ---------------------------------------------------------------------------

StageCheckpoint::StageCheckpoint(std::string path) : path_(std::move(path)) {
    if (!fs::exists(path_)) return;
    for (const auto& j : read_jsonl(path_))
        entries_[j.at("key").get<std::string>()] = j.at("value");
}

bool StageCheckpoint::contains(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.count(key) != 0;
}

std::optional<json> StageCheckpoint::find(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return std::make_optional(it->second);
}

void StageCheckpoint::record(const std::string& key, json value) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.count(key)) return;
    if (!path_.empty()) append_jsonl_line(path_, json{{"key", key}, {"value", value}});
    entries_[key] = std::move(value);
}

std::size_t StageCheckpoint::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

std::vector<ObjectRecord> ingest(const std::string& annotation_path) {
    std::vector<ObjectRecord> records;
    long line_number = 0;
    for (const auto& j : read_jsonl(annotation_path)) {
        ++line_number;
        try {
            records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_number);
        }
    }

    std::set<std::string> seen;
    std::vector<std::string> violations;
    for (const auto& record : records) {
        if (!seen.insert(record.record_id).second)
            throw ValidationError("duplicate record_id: " + record.record_id);
        for (const auto& issue : validate_record(record)) {
            // expressions may legitimately be generated later
            if (issue == "raw_expressions empty") continue;
            violations.push_back(record.record_id + ": " + issue);
        }
    }
    if (!violations.empty()) {
        std::string what = "validation failed:";
        for (std::size_t i = 0; i < violations.size() && i < 10; ++i)
            what += "\n  " + violations[i];
        if (violations.size() > 10)
            what += "\n  ... " + std::to_string(violations.size() - 10) + " more";
        throw ValidationError(what);
    }
    return records;
}

namespace {

void finish_stage_or_interrupt() {
    if (interrupt_requested()) throw Interrupted();
}

} // namespace

StageCounts caption_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                          const StageOptions& options) {
    StageCounts counts;
    counts.input = static_cast<long>(records.size());
    std::mutex flag_mutex;

    parallel_for(records.size(), options.workers, [&](std::size_t i) {
        if (interrupt_requested()) return;
        ObjectRecord& record = records[i];
        if (!record.caption.empty()) return;

        std::string image_digest;
        std::vector<std::uint8_t> image_bytes;
        try {
            image_bytes = read_file_bytes(record.image_path);
            image_digest = digest_hex(std::span<const std::uint8_t>(image_bytes));
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(flag_mutex);
            record.flags.push_back(std::string("caption: unreadable image: ") + e.what());
            return;
        }

        const std::string key = digest_hex("caption|" + record.record_id + "|" + image_digest);
        if (options.checkpoint) {
            if (auto cached = options.checkpoint->find(key)) {
                record.caption = cached->get<std::string>();
                return;
            }
        }
        try {
            ChatTurn turn = user_turn(kCaptionPrompt);
            turn.image = ImageAttachment{std::move(image_bytes), "image/png"};
            const std::string caption = gateways.gateway->vision_chat(
                gateways.vlm_for_generation(), {turn},
                CallContext{CallStep::Generation, record.record_id, 0});
            record.caption = caption;
            if (options.checkpoint) options.checkpoint->record(key, caption);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(flag_mutex);
            record.flags.push_back(std::string("caption failed: ") + e.what());
        }
    });
    finish_stage_or_interrupt();

    for (const auto& record : records)
        (record.caption.empty() ? counts.flagged : counts.output)++;
    return counts;
}

StageCounts generate_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                           const WorkflowConfig& config, const StageOptions& options) {
    StageCounts counts;
    counts.input = static_cast<long>(records.size());
    std::mutex mutex;

    parallel_for(records.size(), options.workers, [&](std::size_t i) {
        if (interrupt_requested()) return;
        ObjectRecord& record = records[i];
        if (!record.raw_expressions.empty()) return;

        Rng rng(mix_seed(config.rng_seed, "generate|" + record.record_id));
        std::vector<std::string> template_ids;
        try {
            template_ids = pick_generation_prompts(rng, config.prompts_per_object);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mutex);
            record.flags.push_back(std::string("generate: ") + e.what());
            return;
        }

        std::vector<std::string> expressions;
        try {
            const auto image_bytes = read_file_bytes(record.image_path);
            const std::string boxes = "[" + format_fraction(record.box.x) + ", " +
                                      format_fraction(record.box.y) + ", " +
                                      format_fraction(record.box.w) + ", " +
                                      format_fraction(record.box.h) + "]";
            for (const auto& template_id : template_ids) {
                const std::string key =
                    digest_hex("generate|" + record.record_id + "|" + template_id);
                if (options.checkpoint) {
                    if (auto cached = options.checkpoint->find(key)) {
                        expressions.push_back(cached->get<std::string>());
                        continue;
                    }
                }
                auto turns = gateways.prompts->render_chat(
                    template_id,
                    {{"image", "<image>"}, {"object", record.category}, {"boxes", boxes}});
                turns.back().image = ImageAttachment{image_bytes, "image/png"};
                const std::string response = gateways.gateway->vision_chat(
                    gateways.vlm_for_generation(), turns,
                    CallContext{CallStep::Generation, record.record_id, 0});
                expressions.push_back(trim(response));
                if (options.checkpoint) options.checkpoint->record(key, trim(response));
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mutex);
            record.flags.push_back(std::string("generate failed: ") + e.what());
            return;  // a failed object contributes no expressions
        }
        record.raw_expressions = std::move(expressions);
    });
    finish_stage_or_interrupt();

    for (const auto& record : records) {
        if (record.raw_expressions.empty()) ++counts.flagged;
        counts.output += static_cast<long>(record.raw_expressions.size());
    }
    return counts;
}

StageCounts expand_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                         const WorkflowConfig& config, const StageOptions& options) {
    StageCounts counts;
    for (const auto& record : records)
        counts.input += static_cast<long>(record.raw_expressions.size());
    if (config.synonym_rounds == 0) {
        counts.output = 0;
        return counts;
    }
    std::mutex mutex;

    parallel_for(records.size(), options.workers, [&](std::size_t i) {
        if (interrupt_requested()) return;
        ObjectRecord& record = records[i];
        const std::size_t originals = record.raw_expressions.size();
        std::vector<std::string> synonyms;
        for (std::size_t e = 0; e < originals; ++e) {
            const std::string& original = record.raw_expressions[e];
            const std::string key = digest_hex("expand|" + record.record_id + "|" +
                                               std::to_string(e) + "|" + original);
            if (options.checkpoint) {
                if (auto cached = options.checkpoint->find(key)) {
                    synonyms.push_back(cached->get<std::string>());
                    continue;
                }
            }
            // synonym_rounds chained paraphrases; the final output is kept as
            // the one synonym of this original, doubling the list
            std::string current = original;
            bool failed = false;
            for (int round = 0; round < config.synonym_rounds; ++round) {
                try {
                    const auto turns =
                        gateways.prompts->render_chat("Synonym", {{"expression", current}});
                    const std::string response = gateways.gateway->chat(
                        gateways.llm_for_generation(), turns,
                        CallContext{CallStep::Generation, record.record_id, round});
                    current = trim(response);
                } catch (const std::exception& ex) {
                    std::lock_guard<std::mutex> lock(mutex);
                    record.flags.push_back("synonym failed for expression " + std::to_string(e) +
                                           ": " + ex.what());
                    failed = true;
                    break;
                }
                if (current.empty()) {
                    std::lock_guard<std::mutex> lock(mutex);
                    record.flags.push_back("empty synonym for expression " + std::to_string(e));
                    failed = true;
                    break;
                }
            }
            if (failed) {
                synonyms.push_back("");  // placeholder, dropped below
                continue;
            }
            if (current == original) {
                std::lock_guard<std::mutex> lock(mutex);
                record.flags.push_back("degenerate synonym for expression " + std::to_string(e));
            }
            if (options.checkpoint) options.checkpoint->record(key, current);
            synonyms.push_back(current);
        }
        for (const auto& synonym : synonyms)
            if (!synonym.empty()) record.raw_expressions.push_back(synonym);
    });
    finish_stage_or_interrupt();

    long total = 0;
    for (const auto& record : records) total += static_cast<long>(record.raw_expressions.size());
    counts.output = total - counts.input;
    counts.flagged = counts.input - counts.output;  // originals whose synonym was dropped
    if (counts.flagged < 0) counts.flagged = 0;
    return counts;
}

FilterOutcome score_filter_stage(const std::vector<ObjectRecord>& records,
                                 const Gateways& gateways, const WorkflowConfig& config,
                                 const StageOptions& options) {
    FilterOutcome outcome;
    std::vector<std::vector<ScoredPair>> per_record(records.size());

    parallel_for(records.size(), options.workers, [&](std::size_t i) {
        if (interrupt_requested()) return;
        const ObjectRecord& record = records[i];
        std::vector<std::uint8_t> image_bytes;
        std::string image_error;
        try {
            image_bytes = read_file_bytes(record.image_path);
        } catch (const std::exception& e) {
            image_error = e.what();
        }
        for (std::size_t e = 0; e < record.raw_expressions.size(); ++e) {
            ScoredPair pair;
            pair.record_id = record.record_id;
            pair.expression_index = static_cast<int>(e);
            pair.expression = record.raw_expressions[e];

            const std::string key =
                digest_hex("score|" + work_key(record.record_id, pair.expression_index) + "|" +
                           pair.expression);
            if (options.checkpoint) {
                if (auto cached = options.checkpoint->find(key)) {
                    pair = pair_from_json(*cached);
                    per_record[i].push_back(std::move(pair));
                    continue;
                }
            }

            if (!image_error.empty()) {
                pair.score = 0.0;
                pair.kept = false;
                pair.flags.push_back("scoring skipped, unreadable image: " + image_error);
            } else {
                try {
                    pair.score = gateways.gateway->score_pair(
                        gateways.scorer, image_bytes, pair.expression,
                        CallContext{CallStep::Scoring, record.record_id, 0});
                    pair.kept = pair.score >= config.filter_threshold;
                } catch (const std::exception& ex) {
                    // conservative routing: give the workflow a chance to fix it
                    pair.score = 0.0;
                    pair.kept = false;
                    pair.flags.push_back(std::string("scoring failed: ") + ex.what());
                }
            }
            if (options.checkpoint) options.checkpoint->record(key, to_json(pair));
            per_record[i].push_back(std::move(pair));
        }
    });
    finish_stage_or_interrupt();

    for (auto& pairs : per_record) {
        for (auto& pair : pairs) {
            ++outcome.counts.input;
            if (pair.kept) {
                ++outcome.counts.output;
                outcome.kept.push_back(std::move(pair));
            } else {
                ++outcome.counts.flagged;
                outcome.filtered.push_back(std::move(pair));
            }
        }
    }
    return outcome;
}

RefineStageOutcome refine_stage(const std::vector<ObjectRecord>& records,
                                const std::vector<ScoredPair>& filtered,
                                const Gateways& gateways, const WorkflowConfig& config,
                                const StageOptions& options, const std::string& trace_dir,
                                bool random_baseline) {
    std::map<std::string, const ObjectRecord*> by_id;
    for (const auto& record : records) by_id[record.record_id] = &record;

    RefineStageOutcome outcome;
    outcome.counts.input = static_cast<long>(filtered.size());
    outcome.results.resize(filtered.size());
    const std::string config_digest = digest_hex(to_json(config).dump());
    if (!trace_dir.empty()) fs::create_directories(trace_dir);

    parallel_for(filtered.size(), options.workers, [&](std::size_t i) {
        if (interrupt_requested()) return;
        const ScoredPair& pair = filtered[i];
        const std::string id = work_key(pair.record_id, pair.expression_index);
        const std::string key = digest_hex("refine|" + id + "|" + pair.expression + "|" +
                                           config_digest + (random_baseline ? "|random" : ""));

        if (options.checkpoint) {
            if (auto cached = options.checkpoint->find(key)) {
                outcome.results[i] = refinement_from_json(*cached);
                return;
            }
        }

        RefinementResult result;
        auto record_it = by_id.find(pair.record_id);
        if (record_it == by_id.end()) {
            result.record_id = pair.record_id;
            result.expression_index = pair.expression_index;
            result.final_expression = pair.expression;
            result.solved = false;
            CycleTrace trace;
            trace.note = "record not found for pair";
            result.trace.push_back(std::move(trace));
        } else {
            result = random_baseline
                         ? refine_random_baseline(*record_it->second, pair.expression_index,
                                                  gateways, config)
                         : refine(*record_it->second, pair.expression_index, gateways, config);
        }
        if (!trace_dir.empty()) {
            const std::string path = (fs::path(trace_dir) / (id + ".json")).string();
            write_file_atomic(path, trace_document(result).dump(2) + "\n");
        }
        if (options.checkpoint) options.checkpoint->record(key, to_json(result));
        outcome.results[i] = std::move(result);
    });
    finish_stage_or_interrupt();

    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const RefinementResult& result = outcome.results[i];
        if (result.solved) {
            ScoredPair realigned = filtered[i];
            realigned.expression = result.final_expression;
            realigned.kept = true;
            realigned.flags.push_back("realigned");
            outcome.realigned.push_back(std::move(realigned));
            ++outcome.counts.output;
        } else {
            ++outcome.counts.flagged;  // retained in the audit set only
        }
    }
    return outcome;
}

AssembleOutcome assemble_final(const std::vector<ScoredPair>& kept,
                               const std::vector<ScoredPair>& realigned) {
    AssembleOutcome outcome;
    std::set<std::pair<std::string, int>> seen;
    std::vector<std::string> overlaps;

    auto add_all = [&](const std::vector<ScoredPair>& pairs) {
        for (const auto& pair : pairs) {
            if (!seen.insert({pair.record_id, pair.expression_index}).second)
                overlaps.push_back(work_key(pair.record_id, pair.expression_index));
            outcome.final_pairs.push_back(pair);
        }
    };
    add_all(kept);
    add_all(realigned);

    if (!overlaps.empty()) {
        std::string what = "assemble_final: overlapping pairs between kept and realigned:";
        for (std::size_t i = 0; i < overlaps.size() && i < 10; ++i) what += " " + overlaps[i];
        throw ValidationError(what);
    }

    std::sort(outcome.final_pairs.begin(), outcome.final_pairs.end(),
              [](const ScoredPair& a, const ScoredPair& b) {
                  return std::tie(a.record_id, a.expression_index) <
                         std::tie(b.record_id, b.expression_index);
              });

    outcome.counts.input = static_cast<long>(kept.size() + realigned.size());
    outcome.counts.output = static_cast<long>(outcome.final_pairs.size());
    if (outcome.counts.output !=
        static_cast<long>(kept.size()) + static_cast<long>(realigned.size())) {
        throw ValidationError("assemble_final: count identity violated: " +
                              std::to_string(outcome.counts.output) + " != " +
                              std::to_string(kept.size()) + " + " +
                              std::to_string(realigned.size()));
    }
    return outcome;
}

FinetuneOutcome prepare_agent_finetune_records(
    const std::vector<ObjectRecord>& records,
    const std::map<std::string, WorkflowStateKind>& labels, const Gateways& gateways) {
    FinetuneOutcome outcome;
    for (const auto& record : records) {
        auto label_it = labels.find(record.record_id);
        if (label_it == labels.end()) {
            outcome.warnings.push_back("no state label for record " + record.record_id +
                                       ", skipped");
            continue;
        }
        if (record.raw_expressions.empty()) {
            outcome.warnings.push_back("record " + record.record_id + " has no expressions");
            continue;
        }
        const WorkflowStateKind label = label_it->second;
        const std::string& phrase = record.raw_expressions[0];

        try {
            // reflector reasoning over the raw expression
            const auto reflect_turns = gateways.prompts->render_chat(
                "Reflection", {{"category", record.category},
                               {"caption", record.caption},
                               {"phrase", "'" + phrase + "'"}});
            const std::string feedback = gateways.gateway->chat(
                gateways.llm, reflect_turns,
                CallContext{CallStep::Reflection, record.record_id, 0});
            std::string reasoning = trim(feedback);
            if (reasoning.rfind("Feedback:", 0) == 0)
                reasoning = trim(reasoning.substr(std::string("Feedback:").size()));

            std::string conclusion;
            switch (label) {
                case WorkflowStateKind::Right: conclusion = "The phrase is correct."; break;
                case WorkflowStateKind::Wrong: conclusion = "The phrase is wrong."; break;
                default: conclusion = "The phrase is uncertain."; break;
            }

            json out{{"record_id", record.record_id},
                     {"state", to_string(label)},
                     {"reasoning", reasoning}};

            InfoPool pool;
            pool.image_ref = record.image_path;
            pool.caption = record.caption;
            pool.category = record.category;
            pool.box = record.box;
            pool.other_objects = record.other_objects;
            pool.expressions = {phrase};
            out["input"] = build_planner_input(pool).back().content;

            std::string response_text = "Reasoning: " + reasoning + "\nConclusion: " + conclusion;
            std::vector<std::string> actions;

            if (label == WorkflowStateKind::Wrong) {
                actions.push_back(to_string(ActionType::RewriteWithLlm));
            } else if (label != WorkflowStateKind::Right) {
                // uncertain states: generate questions, then a target area
                const auto qg_turns = gateways.prompts->render_chat(
                    "FinetuneQuestionGen", {{"phrase", "'" + phrase + "'"},
                                            {"reasoning", reasoning},
                                            {"conclusion", conclusion}});
                const std::string qg_response = gateways.gateway->chat(
                    gateways.llm, qg_turns,
                    CallContext{CallStep::LlmTool, record.record_id, 0});
                std::string questions = trim(qg_response);
                if (questions.rfind("Questions:", 0) == 0)
                    questions = trim(questions.substr(std::string("Questions:").size()));

                const auto ta_turns = gateways.prompts->render_chat(
                    "FinetuneTargetArea", {{"phrase", "'" + phrase + "'"},
                                           {"reasoning", reasoning},
                                           {"conclusion", conclusion},
                                           {"questions", questions}});
                const std::string ta_response = gateways.gateway->chat(
                    gateways.llm, ta_turns,
                    CallContext{CallStep::LlmTool, record.record_id, 0});

                // first 1)/2)/3) marker wins; the manual label is the fallback
                ActionType action = action_for_state(label);
                const std::pair<const char*, ActionType> kMarkers[] = {
                    {"1)", ActionType::VlmObjectCrop},
                    {"2)", ActionType::VlmExtendedCrop},
                    {"3)", ActionType::VlmHighlight},
                };
                std::size_t best = std::string::npos;
                for (const auto& [token, candidate] : kMarkers) {
                    const std::size_t pos = ta_response.find(token);
                    if (pos != std::string::npos && pos < best) {
                        best = pos;
                        action = candidate;
                    }
                }
                actions.push_back(to_string(action));
                std::string target_area = trim(ta_response);
                if (target_area.rfind("Target area:", 0) == 0)
                    target_area = trim(target_area.substr(std::string("Target area:").size()));
                response_text +=
                    "\nQuestions: " + questions + "\nTarget area: " + target_area;
            }

            out["response"] = response_text;
            out["actions"] = actions;
            outcome.records.push_back(std::move(out));
        } catch (const std::exception& e) {
            outcome.warnings.push_back("record " + record.record_id + " failed: " + e.what());
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// PipelineRunner
// ---------------------------------------------------------------------------

PipelineRunner::PipelineRunner(std::string out_dir, WorkflowConfig config, Gateways gateways,
                               int workers)
    : out_dir_(std::move(out_dir)), config_(config), gateways_(gateways), workers_(workers) {
    fs::create_directories(out_dir_);
    fs::create_directories(path("checkpoints"));
    load_manifest();
}

std::string PipelineRunner::path(const std::string& file) const {
    return (fs::path(out_dir_) / file).string();
}

void PipelineRunner::load_manifest() {
    const std::string manifest_path = path("manifest.json");
    if (fs::exists(manifest_path)) {
        manifest_ = manifest_from_json(json::parse(read_file(manifest_path)));
        // a marker only stands while its outputs verify by digest
        for (auto it = manifest_.stage_markers.begin(); it != manifest_.stage_markers.end();) {
            bool valid = true;
            for (const auto& [file, digest] : it->second) {
                const std::string p = path(file);
                if (!fs::exists(p) || file_digest(p) != digest) {
                    valid = false;
                    break;
                }
            }
            it = valid ? std::next(it) : manifest_.stage_markers.erase(it);
        }
    } else {
        manifest_.tool_version = kToolVersion;
        manifest_.created_at = iso8601_now();
        manifest_.stage = "empty";
    }
    manifest_.config_snapshot = to_json(config_);
    manifest_.config_snapshot["workers"] = workers_;
    save_manifest();
}

void PipelineRunner::save_manifest() {
    manifest_.updated_at = iso8601_now();
    write_file_atomic(path("manifest.json"), to_json(manifest_).dump(2) + "\n");
}

bool PipelineRunner::stage_complete(const std::string& stage) const {
    return manifest_.stage_markers.count(stage) != 0;
}

void PipelineRunner::mark_stage(const std::string& stage, const std::vector<std::string>& files,
                                StageCounts counts) {
    std::map<std::string, std::string> digests;
    for (const auto& file : files) digests[file] = file_digest(path(file));
    manifest_.stage_markers[stage] = std::move(digests);
    manifest_.counts[stage] = counts;
    manifest_.stage = stage;
    persist_calls();
    save_manifest();
}

void PipelineRunner::persist_calls() {
    if (!gateways_.gateway) return;
    for (const auto& entry : gateways_.gateway->drain_call_log()) {
        append_jsonl_line(path("calls.jsonl"),
                          json{{"step", to_string(entry.step)},
                               {"wall_ms", entry.wall_time_ms},
                               {"success", entry.success},
                               {"retry_count", entry.retry_count},
                               {"record_id", entry.record_id},
                               {"cycle_index", entry.cycle_index}});
    }
}

std::vector<ObjectRecord> PipelineRunner::load_stage_records(const std::string& stage) const {
    static const std::map<std::string, std::string> kStageFiles = {
        {"ingested", "records.jsonl"},     {"captioned", "captioned.jsonl"},
        {"generated", "generated.jsonl"},  {"expanded", "expanded.jsonl"},
    };
    return read_records_jsonl(path(kStageFiles.at(stage)));
}

void PipelineRunner::run_ingest(const std::string& annotation_path) {
    if (stage_complete("ingested")) return;
    auto records = ingest(annotation_path);
    manifest_.input_digests["annotations"] = file_digest(annotation_path);
    write_records_jsonl(path("records.jsonl"), records);
    mark_stage("ingested", {"records.jsonl"},
               StageCounts{static_cast<long>(records.size()),
                           static_cast<long>(records.size()), 0});
}

void PipelineRunner::run_caption() {
    if (stage_complete("captioned")) return;
    auto records = load_stage_records("ingested");
    StageCheckpoint checkpoint(path("checkpoints/caption.jsonl"));
    const StageCounts counts =
        caption_stage(records, gateways_, StageOptions{workers_, &checkpoint});
    write_records_jsonl(path("captioned.jsonl"), records);
    mark_stage("captioned", {"captioned.jsonl"}, counts);
}

void PipelineRunner::run_generate() {
    if (stage_complete("generated")) return;
    auto records = load_stage_records("captioned");
    StageCheckpoint checkpoint(path("checkpoints/generate.jsonl"));
    const StageCounts counts =
        generate_stage(records, gateways_, config_, StageOptions{workers_, &checkpoint});
    write_records_jsonl(path("generated.jsonl"), records);
    mark_stage("generated", {"generated.jsonl"}, counts);
}

void PipelineRunner::run_expand() {
    if (stage_complete("expanded")) return;
    auto records = load_stage_records("generated");
    StageCheckpoint checkpoint(path("checkpoints/expand.jsonl"));
    const StageCounts counts =
        expand_stage(records, gateways_, config_, StageOptions{workers_, &checkpoint});
    write_records_jsonl(path("expanded.jsonl"), records);
    mark_stage("expanded", {"expanded.jsonl"}, counts);
}

void PipelineRunner::run_filter() {
    if (stage_complete("scored")) return;
    auto records = load_stage_records("expanded");
    StageCheckpoint checkpoint(path("checkpoints/score.jsonl"));
    FilterOutcome outcome =
        score_filter_stage(records, gateways_, config_, StageOptions{workers_, &checkpoint});
    write_pairs_jsonl(path("kept.jsonl"), outcome.kept);
    write_pairs_jsonl(path("filtered.jsonl"), outcome.filtered);
    std::vector<ScoredPair> all = outcome.kept;
    all.insert(all.end(), outcome.filtered.begin(), outcome.filtered.end());
    std::sort(all.begin(), all.end(), [](const ScoredPair& a, const ScoredPair& b) {
        return std::tie(a.record_id, a.expression_index) <
               std::tie(b.record_id, b.expression_index);
    });
    write_pairs_jsonl(path("scored.jsonl"), all);
    mark_stage("scored", {"kept.jsonl", "filtered.jsonl", "scored.jsonl"}, outcome.counts);
}

void PipelineRunner::run_refine(bool random_baseline) {
    if (stage_complete("refined")) return;
    auto records = load_stage_records("expanded");
    auto filtered = read_pairs_jsonl(path("filtered.jsonl"));
    StageCheckpoint checkpoint(path("checkpoints/refine.jsonl"));
    RefineStageOutcome outcome =
        refine_stage(records, filtered, gateways_, config_,
                     StageOptions{workers_, &checkpoint}, path("traces"), random_baseline);
    write_pairs_jsonl(path("realigned.jsonl"), outcome.realigned);
    std::vector<json> audit;
    for (const auto& result : outcome.results)
        if (!result.solved) audit.push_back(to_json(result));
    write_jsonl(path("audit.jsonl"), audit);
    mark_stage("refined", {"realigned.jsonl", "audit.jsonl"}, outcome.counts);
}

void PipelineRunner::run_assemble() {
    if (stage_complete("final")) return;
    const auto kept = read_pairs_jsonl(path("kept.jsonl"));
    const auto realigned = read_pairs_jsonl(path("realigned.jsonl"));
    AssembleOutcome outcome = assemble_final(kept, realigned);
    write_pairs_jsonl(path("final.jsonl"), outcome.final_pairs);
    mark_stage("final", {"final.jsonl"}, outcome.counts);
}

void PipelineRunner::run_all(const std::string& annotation_path) {
    run_ingest(annotation_path);
    run_caption();
    run_generate();
    run_expand();
    run_filter();
    run_refine();
    run_assemble();
    write_report();
}

RunReport PipelineRunner::stats() const {
    RunReport report;
    report.profile = "pipeline";

    std::vector<RefinementResult> results;
    const std::string traces = path("traces");
    if (fs::exists(traces)) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(traces))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& file : files)
            results.push_back(trace_document_parse(json::parse(read_file(file))));
    }

    report.total = static_cast<long>(results.size());
    for (const auto& result : results)
        if (result.solved) ++report.solved;
    if (!results.empty()) {
        report.success_rate = success_rate(results);
        report.iteration_histogram = iteration_distribution(results);
    }

    if (fs::exists(path("calls.jsonl")) && !results.empty()) {
        std::vector<CallLogEntry> calls;
        for (const auto& j : read_jsonl(path("calls.jsonl"))) {
            CallLogEntry entry;
            entry.step = step_from_string(j.at("step").get<std::string>());
            entry.wall_time_ms = j.at("wall_ms").get<double>();
            entry.success = j.at("success").get<bool>();
            entry.retry_count = j.at("retry_count").get<int>();
            entry.record_id = j.at("record_id").get<std::string>();
            entry.cycle_index = j.at("cycle_index").get<int>();
            calls.push_back(std::move(entry));
        }
        report.per_step_calls = step_cost_report(calls, report.total);
    }

    if (fs::exists(path("filtered.jsonl"))) {
        const auto filtered = read_pairs_jsonl(path("filtered.jsonl"));
        if (!filtered.empty()) {
            double sum = 0.0;
            for (const auto& pair : filtered) sum += pair.score;
            report.mean_score_before = sum / static_cast<double>(filtered.size());
        }
    }

    for (const auto& result : results) {
        for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
            if (it->verdict) {
                if (auto aspect = classify_aspect(it->verdict->feedback_text)) {
                    auto& stat = report.aspect_breakdown[to_string(*aspect)];
                    ++stat.count;
                    if (result.solved) stat.success_rate += 1.0;
                }
                break;
            }
        }
    }
    for (auto& [aspect, stat] : report.aspect_breakdown)
        if (stat.count > 0) stat.success_rate /= static_cast<double>(stat.count);

    return report;
}

void PipelineRunner::write_report() const {
    const RunReport report = stats();
    write_file_atomic(path("report.json"), to_json(report).dump(2) + "\n");
    write_file_atomic(path("report.txt"), format_report_text(report));
}

} // namespace realign
