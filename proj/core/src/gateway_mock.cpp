// SPDX-License-Identifier: Apache-2.0
#include "realign/gateway.hpp"

#include "realign/errors.hpp"
#include "realign/serialization.hpp"
#include "realign/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>

namespace realign {

using nlohmann::json;

namespace {

std::string flatten_prompt(const std::vector<ChatTurn>& turns) {
    std::string flat;
    for (const auto& turn : turns) {
        flat += turn.content;
        flat += '\n';
    }
    return flat;
}

void require_valid_chat(const std::vector<ChatTurn>& turns, bool vision) {
    const auto issues = validate_turns(turns);
    if (!issues.empty()) throw UsageError("invalid chat turns: " + issues.front());
    int image_count = 0;
    for (const auto& turn : turns) {
        if (!turn.image) continue;
        ++image_count;
        if (turn.image->bytes.empty()) throw ImageEncodingError("empty image attachment");
    }
    if (!vision && image_count != 0) throw UsageError("chat does not accept image attachments");
    if (vision && image_count != 1)
        throw UsageError("vision_chat requires exactly one image attachment, got " +
                         std::to_string(image_count));
}

} // namespace

void MockGateway::add_rule(MockRule rule) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back(std::move(rule));
}

void MockGateway::add_rules(std::vector<MockRule> rules) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto& rule : rules) rules_.push_back(std::move(rule));
}

void MockGateway::load_script_file(const std::string& path) {
    auto rules = load_mock_rules(path);
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto& rule : rules) rules_.push_back(std::move(rule));
}

void MockGateway::load_script_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) load_script_file(file);
}

MockRule* MockGateway::find_rule(const Lookup& lookup) {
    for (auto& rule : rules_) {
        if (rule.step && *rule.step != to_string(lookup.context->step)) continue;
        if (rule.record_id && *rule.record_id != lookup.context->record_id) continue;
        if (rule.cycle && *rule.cycle != lookup.context->cycle_index) continue;
        if (rule.prompt_digest && *rule.prompt_digest != lookup.prompt_digest) continue;
        if (rule.prompt_contains &&
            lookup.prompt_text.find(*rule.prompt_contains) == std::string::npos)
            continue;
        if (rule.image_digest && (!lookup.image_digest || *rule.image_digest != *lookup.image_digest))
            continue;
        if (rule.text_contains &&
            (!lookup.score_text || lookup.score_text->find(*rule.text_contains) == std::string::npos))
            continue;
        return &rule;
    }
    return nullptr;
}

std::string MockGateway::respond_chat(const std::vector<ChatTurn>& turns,
                                      const CallContext& context,
                                      std::optional<std::string> image_digest) {
    Lookup lookup{&context, turns_digest(turns), flatten_prompt(turns), std::move(image_digest),
                  std::nullopt};

    std::lock_guard<std::mutex> lock(mutex_);
    MockRule* rule = find_rule(lookup);
    if (!rule)
        throw ProtocolError("no mock rule matched (step=" + std::string(to_string(context.step)) +
                            ", record=" + context.record_id +
                            ", cycle=" + std::to_string(context.cycle_index) + ")");
    const double wall = rule->wall_ms;
    if (rule->fail_always || rule->fail_times > 0) {
        if (rule->fail_times > 0) --rule->fail_times;
        call_log_.append(CallLogEntry{context.step, wall, false, 0, context.record_id,
                                      context.cycle_index});
        throw TransportError("scripted failure (record=" + context.record_id + ")");
    }
    call_log_.append(
        CallLogEntry{context.step, wall, true, 0, context.record_id, context.cycle_index});
    return rule->response;
}

std::string MockGateway::chat(const EndpointConfig&, const std::vector<ChatTurn>& turns,
                              const CallContext& context) {
    require_valid_chat(turns, false);
    return respond_chat(turns, context, std::nullopt);
}

std::string MockGateway::vision_chat(const EndpointConfig&, const std::vector<ChatTurn>& turns,
                                     const CallContext& context) {
    require_valid_chat(turns, true);
    std::optional<std::string> image_digest;
    for (const auto& turn : turns)
        if (turn.image) image_digest = digest_hex(std::span<const std::uint8_t>(turn.image->bytes));
    return respond_chat(turns, context, std::move(image_digest));
}

double MockGateway::score_pair(const EndpointConfig&, std::span<const std::uint8_t> image,
                               const std::string& text, const CallContext& context) {
    if (image.empty()) throw UsageError("score_pair requires a non-empty image");
    if (text.empty()) throw UsageError("score_pair requires non-empty text");

    const std::string image_digest = digest_hex(image);
    Lookup lookup{&context, "", "", image_digest, text};

    std::lock_guard<std::mutex> lock(mutex_);
    MockRule* rule = find_rule(lookup);
    double score;
    if (rule) {
        const double wall = rule->wall_ms;
        if (rule->fail_always || rule->fail_times > 0) {
            if (rule->fail_times > 0) --rule->fail_times;
            call_log_.append(CallLogEntry{context.step, wall, false, 0, context.record_id,
                                          context.cycle_index});
            throw TransportError("scripted scoring failure (record=" + context.record_id + ")");
        }
        score = rule->score.value_or(0.5);
        call_log_.append(
            CallLogEntry{context.step, wall, true, 0, context.record_id, context.cycle_index});
    } else {
        // Deterministic fallback keyed by (image digest, text).
        score = static_cast<double>(fnv1a64(image_digest + "|" + text) % 10000u) / 9999.0;
        call_log_.append(
            CallLogEntry{context.step, 0.0, true, 0, context.record_id, context.cycle_index});
    }
    return score;
}

std::vector<MockRule> load_mock_rules(const std::string& path) {
    std::vector<MockRule> rules;
    long line_number = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line_number;
        try {
            MockRule rule;
            if (j.contains("match")) {
                const auto& m = j["match"];
                if (m.contains("step")) rule.step = m["step"].get<std::string>();
                if (m.contains("record_id")) rule.record_id = m["record_id"].get<std::string>();
                if (m.contains("cycle")) rule.cycle = m["cycle"].get<int>();
                if (m.contains("prompt_digest"))
                    rule.prompt_digest = m["prompt_digest"].get<std::string>();
                if (m.contains("prompt_contains"))
                    rule.prompt_contains = m["prompt_contains"].get<std::string>();
                if (m.contains("image_digest"))
                    rule.image_digest = m["image_digest"].get<std::string>();
                if (m.contains("text_contains"))
                    rule.text_contains = m["text_contains"].get<std::string>();
            }
            rule.response = j.value("response", std::string{});
            if (j.contains("score")) rule.score = j["score"].get<double>();
            rule.fail_times = j.value("fail_times", 0);
            rule.fail_always = j.value("fail_always", false);
            rule.wall_ms = j.value("wall_ms", 0.0);
            rules.push_back(std::move(rule));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad mock rule: ") + e.what(), line_number);
        }
    }
    return rules;
}

void save_mock_rules(const std::string& path, const std::vector<MockRule>& rules) {
    std::vector<json> lines;
    lines.reserve(rules.size());
    for (const auto& rule : rules) {
        json match = json::object();
        if (rule.step) match["step"] = *rule.step;
        if (rule.record_id) match["record_id"] = *rule.record_id;
        if (rule.cycle) match["cycle"] = *rule.cycle;
        if (rule.prompt_digest) match["prompt_digest"] = *rule.prompt_digest;
        if (rule.prompt_contains) match["prompt_contains"] = *rule.prompt_contains;
        if (rule.image_digest) match["image_digest"] = *rule.image_digest;
        if (rule.text_contains) match["text_contains"] = *rule.text_contains;
        json j{{"match", match}};
        if (!rule.response.empty()) j["response"] = rule.response;
        if (rule.score) j["score"] = *rule.score;
        if (rule.fail_times != 0) j["fail_times"] = rule.fail_times;
        if (rule.fail_always) j["fail_always"] = rule.fail_always;
        if (rule.wall_ms != 0.0) j["wall_ms"] = rule.wall_ms;
        lines.push_back(std::move(j));
    }
    write_jsonl(path, lines);
}

} // namespace realign
