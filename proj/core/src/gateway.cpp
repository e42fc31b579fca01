// SPDX-License-Identifier: Apache-2.0
#include "realign/gateway.hpp"

#include "realign/errors.hpp"
#include "realign/util.hpp"

namespace realign {

const char* to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

ChatTurn system_turn(std::string content) { return ChatTurn{Role::System, std::move(content), {}}; }
ChatTurn user_turn(std::string content) { return ChatTurn{Role::User, std::move(content), {}}; }
ChatTurn assistant_turn(std::string content) {
    return ChatTurn{Role::Assistant, std::move(content), {}};
}

std::vector<std::string> validate_turns(const std::vector<ChatTurn>& turns) {
    std::vector<std::string> issues;
    if (turns.empty()) {
        issues.push_back("no turns");
        return issues;
    }
    std::size_t start = 0;
    if (turns[0].role == Role::System) start = 1;
    Role expected = Role::User;
    for (std::size_t i = start; i < turns.size(); ++i) {
        if (turns[i].role == Role::System) {
            issues.push_back("system turn not first");
            break;
        }
        if (turns[i].role != expected) {
            issues.push_back("roles do not alternate user/assistant");
            break;
        }
        expected = expected == Role::User ? Role::Assistant : Role::User;
    }
    if (turns.back().role != Role::User) issues.push_back("last turn must be user");
    for (const auto& turn : turns) {
        if (turn.image && turn.role != Role::User)
            issues.push_back("image attachment on non-user turn");
    }
    return issues;
}

std::string turns_digest(const std::vector<ChatTurn>& turns) {
    std::string flat;
    for (const auto& turn : turns) {
        flat += to_string(turn.role);
        flat += '\x1f';
        flat += turn.content;
        flat += '\x1f';
        if (turn.image) {
            flat += digest_hex(std::span<const std::uint8_t>(turn.image->bytes));
            flat += '\x1f';
        }
    }
    return digest_hex(flat);
}

const char* to_string(CallStep step) {
    switch (step) {
        case CallStep::Planning: return "planning";
        case CallStep::LlmTool: return "llm_tool";
        case CallStep::VlmTool: return "vlm_tool";
        case CallStep::Reflection: return "reflection";
        case CallStep::Scoring: return "scoring";
        case CallStep::Generation: return "generation";
    }
    return "?";
}

CallStep step_from_string(const std::string& s) {
    if (s == "planning") return CallStep::Planning;
    if (s == "llm_tool") return CallStep::LlmTool;
    if (s == "vlm_tool") return CallStep::VlmTool;
    if (s == "reflection") return CallStep::Reflection;
    if (s == "scoring") return CallStep::Scoring;
    if (s == "generation") return CallStep::Generation;
    throw ParseError("unknown call step: " + s);
}

void CallLog::append(CallLogEntry entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<CallLogEntry> CallLog::drain() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<CallLogEntry> out;
    out.swap(entries_);
    return out;
}

std::vector<CallLogEntry> CallLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

std::size_t CallLog::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

} // namespace realign
