// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/types.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace realign {

// ---------------------------------------------------------------------------
// Chat turns
// ---------------------------------------------------------------------------

enum class Role { System, User, Assistant };

const char* to_string(Role role);

struct ImageAttachment {
    std::vector<std::uint8_t> bytes;
    std::string media_type = "image/png";

    bool operator==(const ImageAttachment&) const = default;
};

/// One message of a chat exchange. A system turn may appear at most once and
/// only first; afterwards roles alternate user/assistant. Only user turns may
/// carry an image attachment.
struct ChatTurn {
    Role role = Role::User;
    std::string content;
    std::optional<ImageAttachment> image;

    bool operator==(const ChatTurn&) const = default;
};

ChatTurn system_turn(std::string content);
ChatTurn user_turn(std::string content);
ChatTurn assistant_turn(std::string content);

/// Violation messages for the turn-sequence invariants above.
std::vector<std::string> validate_turns(const std::vector<ChatTurn>& turns);

/// Stable digest of a turn sequence: role/content pairs plus attachment
/// digests. Keys mock scripts and trace entries.
std::string turns_digest(const std::vector<ChatTurn>& turns);

// ---------------------------------------------------------------------------
// Endpoints and call accounting
// ---------------------------------------------------------------------------

struct EndpointConfig {
    std::string base_url;       // e.g. "http://127.0.0.1:8080"
    std::string model_name;
    int timeout_ms = 30000;
    int max_retries = 2;        // total attempts <= 1 + max_retries
    double temperature = 0.0;
    std::optional<std::string> auth_token;  // sent as "Authorization: Bearer <token>"
};

/// Workflow step a gateway call belongs to, for cost accounting.
enum class CallStep { Planning, LlmTool, VlmTool, Reflection, Scoring, Generation };

const char* to_string(CallStep step);
CallStep step_from_string(const std::string& s);

/// Caller-supplied tag identifying which work item and cycle a call serves.
struct CallContext {
    CallStep step = CallStep::LlmTool;
    std::string record_id;
    int cycle_index = 0;
};

struct CallLogEntry {
    CallStep step = CallStep::LlmTool;
    double wall_time_ms = 0.0;
    bool success = true;
    int retry_count = 0;
    std::string record_id;
    int cycle_index = 0;
};

/// Thread-safe append log. One entry per gateway invocation, including failed
/// ones; insertion order is preserved, which keeps per-record entries ordered.
class CallLog {
public:
    void append(CallLogEntry entry);
    /// Returns and clears the accumulated entries.
    std::vector<CallLogEntry> drain();
    std::vector<CallLogEntry> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<CallLogEntry> entries_;
};

// ---------------------------------------------------------------------------
// Gateway interface
// ---------------------------------------------------------------------------

/// Uniform access to the three remote capabilities: text chat (LLM), vision
/// chat (VLM) and image-text scoring. Implementations are shareable across
/// workers; each call is independent.
class ModelGateway {
public:
    virtual ~ModelGateway() = default;

    /// Text-only chat. Precondition: valid turn sequence, no attachments.
    virtual std::string chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                             const CallContext& context) = 0;

    /// Vision chat. Precondition: exactly one user turn carries an image.
    virtual std::string vision_chat(const EndpointConfig& endpoint,
                                    const std::vector<ChatTurn>& turns,
                                    const CallContext& context) = 0;

    /// Image-text matching score in [0, 1].
    virtual double score_pair(const EndpointConfig& endpoint,
                              std::span<const std::uint8_t> image, const std::string& text,
                              const CallContext& context) = 0;

    CallLog& call_log() { return call_log_; }
    std::vector<CallLogEntry> drain_call_log() { return call_log_.drain(); }

protected:
    CallLog call_log_;
};

// ---------------------------------------------------------------------------
// Real HTTP backend
//
// Wire protocol (chat + vision chat), the de-facto chat-completions shape:
//
//   POST {base_url}/v1/chat/completions
//   request body:
//     {
//       "model":       string,          // EndpointConfig::model_name
//       "temperature": number,          // EndpointConfig::temperature
//       "messages": [
//         {"role": "system"|"user"|"assistant", "content": string},
//         // a user turn with an image uses the content-parts form:
//         {"role": "user", "content": [
//            {"type": "text", "text": string},
//            {"type": "image_url",
//             "image_url": {"url": "data:<media_type>;base64,<base64 bytes>"}}
//         ]}
//       ]
//     }
//   response body:  {"choices": [{"message": {"content": string}}]}
//
// Scorer:
//
//   POST {base_url}/v1/score
//   request body:   {"text": string, "image": "<base64 bytes>"}
//   response body:  {"score": number in [0, 1]}
//
// Auth: when EndpointConfig::auth_token is set, every request carries
// "Authorization: Bearer <token>". The CLI sources the token from the
// REALIGN_API_TOKEN environment variable.
//
// Retries: connection failures and HTTP 5xx are retried up to max_retries
// with linear backoff; other non-2xx statuses fail immediately. A 2xx body
// that does not match the shapes above raises ProtocolError without retry.
// ---------------------------------------------------------------------------

class HttpGateway : public ModelGateway {
public:
    std::string chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                     const CallContext& context) override;
    std::string vision_chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                            const CallContext& context) override;
    double score_pair(const EndpointConfig& endpoint, std::span<const std::uint8_t> image,
                      const std::string& text, const CallContext& context) override;
};

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

/// One scripted rule. All present match keys must hold (AND); the first
/// matching rule in file order wins. A rule with no match keys is a fallback.
struct MockRule {
    // match keys
    std::optional<std::string> step;
    std::optional<std::string> record_id;
    std::optional<int> cycle;
    std::optional<std::string> prompt_digest;   // turns_digest of the request
    std::optional<std::string> prompt_contains; // substring of the flattened prompt text
    std::optional<std::string> image_digest;    // digest of the attached image bytes
    std::optional<std::string> text_contains;   // scorer: substring of the text side
    // response
    std::string response;
    std::optional<double> score;
    int fail_times = 0;      // fail this many matching calls, then behave normally
    bool fail_always = false;
    double wall_ms = 0.0;    // deterministic wall time recorded in the call log
};

/// Deterministic scripted backend. Scripts load from JSONL files whose lines
/// are {"match": {...}, "response": ..., "score": ..., ...}; see MockRule.
/// Unmatched chat calls raise ProtocolError (ship a fallback rule instead);
/// unmatched score calls fall back to a deterministic hash of
/// (image digest, text), so scoring never needs exhaustive scripting.
class MockGateway : public ModelGateway {
public:
    MockGateway() = default;
    explicit MockGateway(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

    void add_rule(MockRule rule);
    void add_rules(std::vector<MockRule> rules);
    void load_script_file(const std::string& path);
    /// Loads every *.jsonl file in the directory, sorted by file name.
    void load_script_dir(const std::string& dir);
    std::size_t rule_count() const { return rules_.size(); }

    std::string chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                     const CallContext& context) override;
    std::string vision_chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                            const CallContext& context) override;
    double score_pair(const EndpointConfig& endpoint, std::span<const std::uint8_t> image,
                      const std::string& text, const CallContext& context) override;

private:
    struct Lookup {
        const CallContext* context;
        std::string prompt_digest;
        std::string prompt_text;
        std::optional<std::string> image_digest;
        std::optional<std::string> score_text;
    };

    MockRule* find_rule(const Lookup& lookup);
    std::string respond_chat(const std::vector<ChatTurn>& turns, const CallContext& context,
                             std::optional<std::string> image_digest);

    std::mutex mutex_;
    std::vector<MockRule> rules_;
};

std::vector<MockRule> load_mock_rules(const std::string& path);
void save_mock_rules(const std::string& path, const std::vector<MockRule>& rules);

} // namespace realign
