// SPDX-License-Identifier: Apache-2.0
#include "realign/gateway.hpp"

#include "realign/errors.hpp"
#include "realign/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <thread>

namespace realign {

using nlohmann::json;

namespace {

constexpr const char* kChatPath = "/v1/chat/completions";
constexpr const char* kScorePath = "/v1/score";

const char kBase64Table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += kBase64Table[(v >> 18) & 63];
        out += kBase64Table[(v >> 12) & 63];
        out += kBase64Table[(v >> 6) & 63];
        out += kBase64Table[v & 63];
        i += 3;
    }
    const std::size_t rest = data.size() - i;
    if (rest == 1) {
        const std::uint32_t v = data[i] << 16;
        out += kBase64Table[(v >> 18) & 63];
        out += kBase64Table[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += kBase64Table[(v >> 18) & 63];
        out += kBase64Table[(v >> 12) & 63];
        out += kBase64Table[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

json turn_to_message(const ChatTurn& turn) {
    if (!turn.image) return json{{"role", to_string(turn.role)}, {"content", turn.content}};
    if (turn.image->bytes.empty()) throw ImageEncodingError("empty image attachment");
    const std::string data_url = "data:" + turn.image->media_type + ";base64," +
                                 base64_encode(std::span<const std::uint8_t>(turn.image->bytes));
    json parts = json::array();
    parts.push_back(json{{"type", "text"}, {"text", turn.content}});
    parts.push_back(json{{"type", "image_url"}, {"image_url", json{{"url", data_url}}}});
    return json{{"role", to_string(turn.role)}, {"content", parts}};
}

struct PostOutcome {
    std::string body;
    int attempts = 0;
};

/// POSTs with retry on transport failures and 5xx. Throws TransportError when
/// attempts are exhausted or on a non-retryable status.
PostOutcome post_with_retries(const EndpointConfig& endpoint, const std::string& path,
                              const std::string& body) {
    const int max_attempts = 1 + std::max(0, endpoint.max_retries);
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client client(endpoint.base_url);
        client.set_connection_timeout(0, endpoint.timeout_ms * 1000LL);
        client.set_read_timeout(0, endpoint.timeout_ms * 1000LL);
        client.set_write_timeout(0, endpoint.timeout_ms * 1000LL);
        httplib::Headers headers;
        if (endpoint.auth_token && !endpoint.auth_token->empty())
            headers.emplace("Authorization", "Bearer " + *endpoint.auth_token);

        auto result = client.Post(path, headers, body, "application/json");
        if (!result) {
            last_error = "connection failure: " + httplib::to_string(result.error());
        } else if (result->status >= 200 && result->status < 300) {
            return PostOutcome{result->body, attempt};
        } else if (result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
        } else {
            throw TransportError("HTTP " + std::to_string(result->status) + " from " +
                                 endpoint.base_url + path);
        }
        if (attempt < max_attempts)
            std::this_thread::sleep_for(std::chrono::milliseconds(50L * attempt));
    }
    throw TransportError(last_error + " after " + std::to_string(max_attempts) + " attempts (" +
                         endpoint.base_url + path + ")");
}

class CallTimer {
public:
    CallTimer(CallLog& log, const CallContext& context)
        : log_(log), context_(context), start_(std::chrono::steady_clock::now()) {}

    void finish(bool success, int retry_count) {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        const double ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
        log_.append(CallLogEntry{context_.step, ms, success, retry_count, context_.record_id,
                                 context_.cycle_index});
    }

private:
    CallLog& log_;
    CallContext context_;
    std::chrono::steady_clock::time_point start_;
};

std::string extract_chat_content(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chat response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw ProtocolError("chat response has no choices");
    const auto& message = j["choices"][0];
    if (!message.contains("message") || !message["message"].contains("content") ||
        !message["message"]["content"].is_string())
        throw ProtocolError("chat response has no message content");
    return message["message"]["content"].get<std::string>();
}

json build_chat_body(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns) {
    json messages = json::array();
    for (const auto& turn : turns) messages.push_back(turn_to_message(turn));
    return json{{"model", endpoint.model_name},
                {"temperature", endpoint.temperature},
                {"messages", messages}};
}

void require_valid(const std::vector<ChatTurn>& turns) {
    const auto issues = validate_turns(turns);
    if (!issues.empty()) throw UsageError("invalid chat turns: " + issues.front());
}

} // namespace

std::string HttpGateway::chat(const EndpointConfig& endpoint, const std::vector<ChatTurn>& turns,
                              const CallContext& context) {
    require_valid(turns);
    for (const auto& turn : turns)
        if (turn.image) throw UsageError("chat does not accept image attachments");

    CallTimer timer(call_log_, context);
    try {
        const auto outcome =
            post_with_retries(endpoint, kChatPath, build_chat_body(endpoint, turns).dump());
        timer.finish(true, outcome.attempts - 1);
        return extract_chat_content(outcome.body);
    } catch (...) {
        timer.finish(false, endpoint.max_retries);
        throw;
    }
}

std::string HttpGateway::vision_chat(const EndpointConfig& endpoint,
                                     const std::vector<ChatTurn>& turns,
                                     const CallContext& context) {
    require_valid(turns);
    int image_count = 0;
    for (const auto& turn : turns)
        if (turn.image) ++image_count;
    if (image_count != 1)
        throw UsageError("vision_chat requires exactly one image attachment, got " +
                         std::to_string(image_count));

    CallTimer timer(call_log_, context);
    try {
        const auto outcome =
            post_with_retries(endpoint, kChatPath, build_chat_body(endpoint, turns).dump());
        timer.finish(true, outcome.attempts - 1);
        return extract_chat_content(outcome.body);
    } catch (...) {
        timer.finish(false, endpoint.max_retries);
        throw;
    }
}

double HttpGateway::score_pair(const EndpointConfig& endpoint,
                               std::span<const std::uint8_t> image, const std::string& text,
                               const CallContext& context) {
    if (image.empty()) throw UsageError("score_pair requires a non-empty image");
    if (text.empty()) throw UsageError("score_pair requires non-empty text");

    CallTimer timer(call_log_, context);
    try {
        const json body{{"text", text}, {"image", base64_encode(image)}};
        const auto outcome = post_with_retries(endpoint, kScorePath, body.dump());
        json j;
        try {
            j = json::parse(outcome.body);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("score response is not JSON: ") + e.what());
        }
        if (!j.contains("score") || !j["score"].is_number())
            throw ProtocolError("score response has no numeric score");
        const double score = j["score"].get<double>();
        if (score < 0.0 || score > 1.0)
            throw ProtocolError("score outside [0, 1]: " + std::to_string(score));
        timer.finish(true, outcome.attempts - 1);
        return score;
    } catch (...) {
        timer.finish(false, endpoint.max_retries);
        throw;
    }
}

} // namespace realign
