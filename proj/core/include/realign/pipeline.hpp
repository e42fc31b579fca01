// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/analytics.hpp"
#include "realign/gateway.hpp"
#include "realign/types.hpp"
#include "realign/workflow.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace realign {

constexpr const char* kCaptionPrompt =
    "Describe this image in detail, covering every visible object and where it is.";

// ---------------------------------------------------------------------------
// Pair records
// ---------------------------------------------------------------------------

/// One (record, expression) pair with its matching score and routing.
struct ScoredPair {
    std::string record_id;
    int expression_index = 0;
    std::string expression;
    double score = 0.0;
    bool kept = false;  // kept <=> score >= filter_threshold
    std::vector<std::string> flags;

    bool operator==(const ScoredPair&) const = default;
};

nlohmann::json to_json(const ScoredPair& pair);
ScoredPair pair_from_json(const nlohmann::json& j);
std::vector<ScoredPair> read_pairs_jsonl(const std::string& path);
void write_pairs_jsonl(const std::string& path, const std::vector<ScoredPair>& pairs);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct StageCounts {
    long input = 0;
    long output = 0;
    long flagged = 0;  // flagged or dropped items, itemized per stage
};

/// Run manifest: effective config, per-stage counts, and completion markers.
/// A marker exists iff the stage's output files verify by digest at load time.
struct DatasetManifest {
    int schema_version = 1;
    std::string tool_version;
    std::string created_at;
    std::string updated_at;
    std::string stage;  // last completed stage
    nlohmann::json config_snapshot;
    std::map<std::string, std::string> input_digests;
    std::map<std::string, StageCounts> counts;
    std::map<std::string, std::map<std::string, std::string>> stage_markers;  // stage -> file -> digest
};

nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Resume ledger
// ---------------------------------------------------------------------------

/// Append-only JSONL ledger keyed by content digest. A key present in the
/// ledger means the item's work is done and its cached result can be reused,
/// so resumed runs issue zero duplicate gateway calls.
class StageCheckpoint {
public:
    StageCheckpoint() = default;
    explicit StageCheckpoint(std::string path);

    bool contains(const std::string& key) const;
    std::optional<nlohmann::json> find(const std::string& key) const;
    void record(const std::string& key, nlohmann::json value);
    std::size_t size() const;

private:
    std::string path_;
    std::map<std::string, nlohmann::json> entries_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct StageOptions {
    int workers = 1;
    StageCheckpoint* checkpoint = nullptr;
};

/// Parses and validates an annotations file. Rejects duplicate record ids.
std::vector<ObjectRecord> ingest(const std::string& annotation_path);

/// Fills missing captions via vision chat. Failures flag the record and the
/// stage continues.
StageCounts caption_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                          const StageOptions& options = {});

/// Generates prompts_per_object raw expressions per object that has none,
/// using randomly picked generation prompts (seeded per record).
StageCounts generate_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                           const WorkflowConfig& config, const StageOptions& options = {});

/// Appends one synonym per original expression (the result of
/// synonym_rounds chained paraphrase calls), doubling each record's list.
StageCounts expand_stage(std::vector<ObjectRecord>& records, const Gateways& gateways,
                         const WorkflowConfig& config, const StageOptions& options = {});

struct FilterOutcome {
    std::vector<ScoredPair> kept;
    std::vector<ScoredPair> filtered;
    StageCounts counts;  // input pairs = kept + filtered
};

/// Scores every (record, expression) pair and partitions by the strict
/// threshold: score < threshold is filtered, score == threshold is kept.
/// Scoring failures route to filtered (so the workflow can try to fix them)
/// and are flagged.
FilterOutcome score_filter_stage(const std::vector<ObjectRecord>& records,
                                 const Gateways& gateways, const WorkflowConfig& config,
                                 const StageOptions& options = {});

struct RefineStageOutcome {
    std::vector<ScoredPair> realigned;          // solved pairs with final expressions
    std::vector<RefinementResult> results;      // every result, audit included
    StageCounts counts;                          // input = realigned + unsolved
};

/// Runs the workflow over every filtered pair. Solved pairs join the final
/// set; unsolved pairs stay in the audit set only.
RefineStageOutcome refine_stage(const std::vector<ObjectRecord>& records,
                                const std::vector<ScoredPair>& filtered,
                                const Gateways& gateways, const WorkflowConfig& config,
                                const StageOptions& options = {},
                                const std::string& trace_dir = "",
                                bool random_baseline = false);

struct AssembleOutcome {
    std::vector<ScoredPair> final_pairs;
    StageCounts counts;  // output == |kept| + |realigned|
};

/// Merges kept and realigned pairs, sorted by (record_id, expression_index).
/// Overlapping pair keys abort with a diff report.
AssembleOutcome assemble_final(const std::vector<ScoredPair>& kept,
                               const std::vector<ScoredPair>& realigned);

struct FinetuneOutcome {
    std::vector<nlohmann::json> records;
    std::vector<std::string> warnings;
};

/// Builds planner fine-tuning records from manually labeled states: reflector
/// reasoning, generated questions and a target-area choice for the uncertain
/// states, emitted in the planner-input format.
FinetuneOutcome prepare_agent_finetune_records(
    const std::vector<ObjectRecord>& records,
    const std::map<std::string, WorkflowStateKind>& labels, const Gateways& gateways);

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Drives the stages over an output directory with manifest, checkpoints and
/// a persisted call ledger. Completed stages (digest-verified markers) are
/// skipped entirely on rerun.
class PipelineRunner {
public:
    PipelineRunner(std::string out_dir, WorkflowConfig config, Gateways gateways,
                   int workers = 1);

    void run_ingest(const std::string& annotation_path);
    void run_caption();
    void run_generate();
    void run_expand();
    void run_filter();
    void run_refine(bool random_baseline = false);
    void run_assemble();
    void run_all(const std::string& annotation_path);

    /// Recomputes the run report from the persisted ledgers only.
    RunReport stats() const;
    /// Writes report.json (deterministic) and report.txt.
    void write_report() const;

    const DatasetManifest& manifest() const { return manifest_; }
    bool stage_complete(const std::string& stage) const;

    std::string path(const std::string& file) const;

private:
    void load_manifest();
    void save_manifest();
    void mark_stage(const std::string& stage, const std::vector<std::string>& files,
                    StageCounts counts);
    void persist_calls();
    std::vector<ObjectRecord> load_stage_records(const std::string& stage) const;

    std::string out_dir_;
    WorkflowConfig config_;
    Gateways gateways_;
    int workers_ = 1;
    DatasetManifest manifest_;
};

} // namespace realign
