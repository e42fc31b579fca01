// SPDX-License-Identifier: Apache-2.0
//
// realign CLI: every batch stage and experiment as a subcommand over one
// JSON config file. Flags override the config; the effective values land in
// the run manifest.

#include "realign/analytics.hpp"
#include "realign/errors.hpp"
#include "realign/gateway.hpp"
#include "realign/pipeline.hpp"
#include "realign/prompts.hpp"
#include "realign/serialization.hpp"
#include "realign/sim.hpp"
#include "realign/util.hpp"
#include "realign/workflow.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace realign;

namespace {

constexpr const char* kAuthTokenEnv = "REALIGN_API_TOKEN";

void handle_sigint(int) {
    request_interrupt(true);
}

struct CliSettings {
    std::string config_path;
    std::string out_dir = "out";
    int workers = 1;
    std::string mock_scripts;
    std::string endpoint_llm;
    std::string endpoint_vlm;
    std::string endpoint_scorer;
    WorkflowConfig workflow;

    // flag presence trackers (flags override the config file)
    bool out_set = false, workers_set = false, seed_set = false, max_iter_set = false,
         threshold_set = false, mock_set = false;
    std::uint64_t seed = 0;
    int max_iter = 4;
    double threshold = 0.5;

    json effective;  // echoed into the manifest
};

EndpointConfig endpoint_from_json(const json& j) {
    EndpointConfig endpoint;
    endpoint.base_url = j.value("base_url", "");
    endpoint.model_name = j.value("model_name", "");
    endpoint.timeout_ms = j.value("timeout_ms", endpoint.timeout_ms);
    endpoint.max_retries = j.value("max_retries", endpoint.max_retries);
    endpoint.temperature = j.value("temperature", endpoint.temperature);
    if (j.contains("auth_token")) {
        const std::string token = interpolate_env(j["auth_token"].get<std::string>());
        if (!token.empty()) endpoint.auth_token = token;
    }
    return endpoint;
}

json endpoint_to_json(const EndpointConfig& endpoint) {
    // auth token deliberately not echoed
    return json{{"base_url", endpoint.base_url},
                {"model_name", endpoint.model_name},
                {"timeout_ms", endpoint.timeout_ms},
                {"max_retries", endpoint.max_retries},
                {"temperature", endpoint.temperature}};
}

struct Runtime {
    std::unique_ptr<ModelGateway> gateway;
    Gateways gateways;
    PromptLibrary prompts;
};

std::unique_ptr<Runtime> build_runtime(CliSettings& s) {
    json config = json::object();
    if (!s.config_path.empty()) config = json::parse(read_file(s.config_path));

    if (!s.out_set && config.contains("out_dir")) s.out_dir = config["out_dir"].get<std::string>();
    if (!s.workers_set && config.contains("workers")) s.workers = config["workers"].get<int>();
    if (config.contains("workflow")) s.workflow = config_from_json(config["workflow"]);
    if (s.seed_set) s.workflow.rng_seed = s.seed;
    if (s.max_iter_set) s.workflow.max_iter = s.max_iter;
    if (s.threshold_set) s.workflow.filter_threshold = s.threshold;
    if (!s.mock_set && config.contains("mock_scripts"))
        s.mock_scripts = config["mock_scripts"].get<std::string>();

    const auto issues = validate_config(s.workflow);
    if (!issues.empty()) throw ValidationError("bad config: " + issues.front());

    auto runtime = std::make_unique<Runtime>();
    runtime->prompts = config.contains("prompts_dir")
                           ? PromptLibrary::from_dir(config["prompts_dir"].get<std::string>())
                           : PromptLibrary::builtin();

    EndpointConfig llm, vlm, scorer;
    if (config.contains("endpoints")) {
        const auto& e = config["endpoints"];
        if (e.contains("llm")) llm = endpoint_from_json(e["llm"]);
        if (e.contains("vlm")) vlm = endpoint_from_json(e["vlm"]);
        if (e.contains("scorer")) scorer = endpoint_from_json(e["scorer"]);
    }
    if (!s.endpoint_llm.empty()) llm.base_url = s.endpoint_llm;
    if (!s.endpoint_vlm.empty()) vlm.base_url = s.endpoint_vlm;
    if (!s.endpoint_scorer.empty()) scorer.base_url = s.endpoint_scorer;
    llm.max_retries = vlm.max_retries = scorer.max_retries = s.workflow.retry_limit;

    // tokens fall back to the environment when the config names none
    const char* env_token = std::getenv(kAuthTokenEnv);
    if (env_token && *env_token) {
        for (EndpointConfig* endpoint : {&llm, &vlm, &scorer})
            if (!endpoint->auth_token) endpoint->auth_token = std::string(env_token);
    }

    if (!s.mock_scripts.empty()) {
        auto mock = std::make_unique<MockGateway>();
        if (fs::is_directory(s.mock_scripts)) mock->load_script_dir(s.mock_scripts);
        else mock->load_script_file(s.mock_scripts);
        runtime->gateway = std::move(mock);
    } else {
        runtime->gateway = std::make_unique<HttpGateway>();
    }

    runtime->gateways.gateway = runtime->gateway.get();
    runtime->gateways.llm = llm;
    runtime->gateways.vlm = vlm;
    runtime->gateways.scorer = scorer;
    runtime->gateways.prompts = &runtime->prompts;
    if (config.contains("generation_temperature"))
        runtime->gateways.generation_temperature = config["generation_temperature"].get<double>();

    s.effective = json{{"out_dir", s.out_dir},
                       {"workers", s.workers},
                       {"workflow", to_json(s.workflow)},
                       {"mock_scripts", s.mock_scripts},
                       {"endpoints",
                        json{{"llm", endpoint_to_json(llm)},
                             {"vlm", endpoint_to_json(vlm)},
                             {"scorer", endpoint_to_json(scorer)}}}};
    return runtime;
}

long count_expressions(const std::vector<ObjectRecord>& records) {
    long n = 0;
    for (const auto& record : records) n += static_cast<long>(record.raw_expressions.size());
    return n;
}

int run_simulate(CliSettings& settings, const std::string& profile, std::uint64_t seed, int n) {
    fs::create_directories(settings.out_dir);
    const std::string sim_dir = (fs::path(settings.out_dir) / "sim").string();

    if (profile == "paper-experiment") {
        const RunReport report = run_paper_experiment(seed, sim_dir, n);
        write_file_atomic((fs::path(settings.out_dir) / "experiment_report.json").string(),
                          to_json(report).dump(2) + "\n");
        write_file_atomic((fs::path(settings.out_dir) / "experiment_report.txt").string(),
                          format_report_text(report));
        std::cout << format_report_text(report);
        return 0;
    }
    if (profile == "ablation") {
        const SyntheticWorld world = generate_world(seed, n, default_aspect_mix(),
                                                    (fs::path(sim_dir) / "images").string(), 0.70);
        const std::vector<std::string> profiles = {"full",        "no-planning", "no-action-2",
                                                   "no-action-3", "no-action-4", "no-action-5",
                                                   "single-cycle"};
        const auto table = ablation_harness(world, profiles);
        json out = json::array();
        std::cout << "profile           success rate\n";
        for (const auto& [name, rate] : table) {
            out.push_back(json{{"profile", name}, {"success_rate", rate}});
            std::printf("%-18s %6.2f%%\n", name.c_str(), round_pct2(rate * 100.0));
        }
        write_file_atomic((fs::path(settings.out_dir) / "ablation_report.json").string(),
                          out.dump(2) + "\n");
        return 0;
    }
    if (profile == "iteration-profile") {
        // investigation profile: cap raised to 10
        const SyntheticWorld world = generate_world(seed, n, default_aspect_mix(),
                                                    (fs::path(sim_dir) / "images").string(), 0.70);
        WorkflowConfig config = settings.workflow;
        config.max_iter = 10;
        config.rng_seed = seed;
        const RunReport report = run_world_rule_profile(world, config);
        write_file_atomic((fs::path(settings.out_dir) / "iteration_report.json").string(),
                          to_json(report).dump(2) + "\n");
        std::cout << format_report_text(report);
        return 0;
    }
    std::cerr << "unknown simulate profile: " << profile << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);

    CLI::App app{"language-object re-alignment pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    CliSettings settings;
    app.add_option("--config", settings.config_path, "JSON config file");
    app.add_option("--out", settings.out_dir, "output directory")
        ->each([&](const std::string&) { settings.out_set = true; });
    app.add_option("--workers", settings.workers, "worker threads per stage")
        ->each([&](const std::string&) { settings.workers_set = true; });
    app.add_option("--seed", settings.seed, "workflow RNG seed")
        ->each([&](const std::string&) { settings.seed_set = true; });
    app.add_option("--max-iter", settings.max_iter, "maximum workflow cycles")
        ->each([&](const std::string&) { settings.max_iter_set = true; });
    app.add_option("--threshold", settings.threshold, "score filter threshold")
        ->each([&](const std::string&) { settings.threshold_set = true; });
    app.add_option("--mock-scripts", settings.mock_scripts,
                   "mock script file or directory (enables the offline backend)")
        ->each([&](const std::string&) { settings.mock_set = true; });
    app.add_option("--endpoint-llm", settings.endpoint_llm, "LLM chat endpoint base URL");
    app.add_option("--endpoint-vlm", settings.endpoint_vlm, "VLM chat endpoint base URL");
    app.add_option("--endpoint-scorer", settings.endpoint_scorer, "scorer endpoint base URL");

    std::string annotations;
    std::string labels_path;
    std::string records_path;
    std::string sim_profile = "paper-experiment";
    std::uint64_t sim_seed = 11;
    int sim_n = 400;
    bool refine_random = false;

    auto* cmd_ingest = app.add_subcommand("ingest", "validate and import annotations");
    cmd_ingest->add_option("--annotations", annotations, "annotation JSONL file")->required();
    auto* cmd_caption = app.add_subcommand("caption", "fill missing image captions");
    auto* cmd_generate = app.add_subcommand("generate", "generate raw expressions per object");
    auto* cmd_expand = app.add_subcommand("expand", "append synonym expressions");
    auto* cmd_filter = app.add_subcommand("filter", "score pairs and split kept/filtered");
    auto* cmd_refine = app.add_subcommand("refine", "run the re-alignment workflow");
    cmd_refine->add_flag("--random", refine_random, "random-planning baseline profile");
    auto* cmd_assemble = app.add_subcommand("assemble", "assemble the final dataset");
    auto* cmd_stats = app.add_subcommand("stats", "recompute reports from the run ledgers");
    auto* cmd_simulate = app.add_subcommand("simulate", "synthetic-world experiments");
    cmd_simulate->add_option("--profile", sim_profile,
                             "paper-experiment | ablation | iteration-profile");
    cmd_simulate->add_option("--sim-seed", sim_seed, "world seed");
    cmd_simulate->add_option("--n", sim_n, "expressions in the world");
    auto* cmd_finetune = app.add_subcommand("finetune-data", "build planner fine-tuning records");
    cmd_finetune->add_option("--labels", labels_path, "JSON map record_id -> state")->required();
    cmd_finetune->add_option("--records", records_path, "records JSONL (default captioned.jsonl)");
    auto* cmd_all = app.add_subcommand("run-all", "all stages in order");
    cmd_all->add_option("--annotations", annotations, "annotation JSONL file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    try {
        auto runtime = build_runtime(settings);
        PipelineRunner runner(settings.out_dir, settings.workflow, runtime->gateways,
                              settings.workers);

        if (cmd_simulate->parsed()) {
            if (settings.seed_set) sim_seed = settings.seed;
            return run_simulate(settings, sim_profile, sim_seed, sim_n);
        }
        if (cmd_ingest->parsed()) {
            runner.run_ingest(annotations);
            std::cout << "ingested " << runner.manifest().counts.at("ingested").output
                      << " records -> " << runner.path("records.jsonl") << "\n";
            return 0;
        }
        if (cmd_caption->parsed()) {
            runner.run_caption();
            return 0;
        }
        if (cmd_generate->parsed()) {
            runner.run_generate();
            return 0;
        }
        if (cmd_expand->parsed()) {
            runner.run_expand();
            return 0;
        }
        if (cmd_filter->parsed()) {
            const auto records = read_records_jsonl(runner.path("expanded.jsonl"));
            if (count_expressions(records) == 0) {
                std::cerr << "no expressions to score\n";
                return 1;
            }
            runner.run_filter();
            const auto& counts = runner.manifest().counts.at("scored");
            std::cout << "scored " << counts.input << " pairs: " << counts.output << " kept, "
                      << counts.flagged << " filtered\n";
            return 0;
        }
        if (cmd_refine->parsed()) {
            runner.run_refine(refine_random);
            const auto& counts = runner.manifest().counts.at("refined");
            std::cout << "refined " << counts.input << " pairs: " << counts.output
                      << " re-aligned, " << counts.flagged << " unsolved (audit)\n";
            return 0;
        }
        if (cmd_assemble->parsed()) {
            runner.run_assemble();
            const auto& counts = runner.manifest().counts.at("final");
            std::cout << "final dataset: " << counts.output << " pairs -> "
                      << runner.path("final.jsonl") << "\n";
            return 0;
        }
        if (cmd_stats->parsed()) {
            runner.write_report();
            std::cout << format_report_text(runner.stats());
            return 0;
        }
        if (cmd_finetune->parsed()) {
            const std::string source =
                records_path.empty() ? runner.path("captioned.jsonl") : records_path;
            const auto records = read_records_jsonl(source);
            std::map<std::string, WorkflowStateKind> labels;
            for (const auto& [id, state] : json::parse(read_file(labels_path)).items())
                labels[id] = state_from_string(state.get<std::string>());
            const auto outcome =
                prepare_agent_finetune_records(records, labels, runtime->gateways);
            std::vector<json> lines(outcome.records.begin(), outcome.records.end());
            write_jsonl(runner.path("finetune.jsonl"), lines);
            for (const auto& warning : outcome.warnings) std::cerr << "warning: " << warning << "\n";
            std::cout << "wrote " << lines.size() << " fine-tuning records -> "
                      << runner.path("finetune.jsonl") << "\n";
            return 0;
        }
        if (cmd_all->parsed()) {
            runner.run_all(annotations);
            const auto& counts = runner.manifest().counts.at("final");
            std::cout << "final dataset: " << counts.output << " pairs -> "
                      << runner.path("final.jsonl") << "\n";
            return 0;
        }
        std::cerr << "no subcommand\n";
        return 64;
    } catch (const Interrupted&) {
        std::cerr << "interrupted; progress checkpointed, rerun to resume\n";
        return 130;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
