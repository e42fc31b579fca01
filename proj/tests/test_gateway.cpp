// SPDX-License-Identifier: Apache-2.0
#include "realign/errors.hpp"
#include "realign/gateway.hpp"
#include "realign/serialization.hpp"
#include "realign/util.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace realign;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> tiny_image_bytes() {
    return encode_png(Image::filled(4, 4, Rgb{10, 20, 30}));
}

MockRule canned(const std::string& step, const std::string& response) {
    MockRule rule;
    rule.step = step;
    rule.response = response;
    return rule;
}

} // namespace

TEST_CASE("chat turn validation") {
    std::vector<ChatTurn> turns = {system_turn("s"), user_turn("u")};
    CHECK(validate_turns(turns).empty());

    turns = {system_turn("s"), user_turn("u"), assistant_turn("a"), user_turn("u2")};
    CHECK(validate_turns(turns).empty());

    turns = {user_turn("u"), user_turn("u2")};
    CHECK_FALSE(validate_turns(turns).empty());

    turns = {system_turn("s"), user_turn("u"), system_turn("again")};
    CHECK_FALSE(validate_turns(turns).empty());

    turns = {system_turn("s"), user_turn("u"), assistant_turn("a")};
    CHECK_FALSE(validate_turns(turns).empty());  // must end on a user turn
}

TEST_CASE("mock chat: scripted response, determinism, and fallbacks") {
    MockGateway mock;
    MockRule specific;
    specific.step = "llm_tool";
    specific.record_id = "r1";
    specific.prompt_contains = "dishwasher";
    specific.response =
        "home appliances of refrigerator, sink, stove, dishwasher and washing machine";
    mock.add_rule(specific);
    mock.add_rule(canned("llm_tool", "generic"));

    const std::vector<ChatTurn> turns = {system_turn("sys"),
                                         user_turn("please fix: dishwasher appliance")};
    const CallContext context{CallStep::LlmTool, "r1", 0};
    CHECK(mock.chat({}, turns, context) ==
          "home appliances of refrigerator, sink, stove, dishwasher and washing machine");
    // same script, same input, byte-identical output
    CHECK(mock.chat({}, turns, context) == mock.chat({}, turns, context));
    // a non-matching record falls through to the canned fallback
    CHECK(mock.chat({}, turns, CallContext{CallStep::LlmTool, "r2", 0}) == "generic");
    // no rule at all for this step -> ProtocolError
    CHECK_THROWS_AS(mock.chat({}, turns, CallContext{CallStep::Planning, "r1", 0}),
                    ProtocolError);
}

TEST_CASE("mock vision chat: image preconditions") {
    MockGateway mock;
    mock.add_rule(canned("vlm_tool", "observation"));
    const CallContext context{CallStep::VlmTool, "r1", 0};

    ChatTurn with_image = user_turn("look");
    with_image.image = ImageAttachment{tiny_image_bytes(), "image/png"};
    CHECK(mock.vision_chat({}, {with_image}, context) == "observation");

    // zero-byte attachment
    ChatTurn empty_image = user_turn("look");
    empty_image.image = ImageAttachment{{}, "image/png"};
    CHECK_THROWS_AS(mock.vision_chat({}, {empty_image}, context), ImageEncodingError);

    // two attachments
    std::vector<ChatTurn> two = {with_image, assistant_turn("a"), with_image};
    CHECK_THROWS_AS(mock.vision_chat({}, two, context), UsageError);

    // chat() rejects attachments outright
    CHECK_THROWS_AS(mock.chat({}, {with_image}, context), UsageError);
}

TEST_CASE("mock scoring: keyed values, determinism, hash fallback") {
    MockGateway mock;
    MockRule fixture;
    fixture.step = "scoring";
    fixture.text_contains = "small dog next to the fence";
    fixture.score = 0.0673;
    mock.add_rule(fixture);

    const auto image = tiny_image_bytes();
    const CallContext context{CallStep::Scoring, "r1", 0};
    CHECK(mock.score_pair({}, image, "a small dog next to the fence", context) == 0.0673);

    // unscripted pairs get a deterministic value in [0, 1]
    const double a = mock.score_pair({}, image, "anything else", context);
    const double b = mock.score_pair({}, image, "anything else", context);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    const double c = mock.score_pair({}, image, "different text", context);
    CHECK(a != c);  // keyed by (image digest, text)

    CHECK_THROWS_AS(mock.score_pair({}, {}, "text", context), UsageError);
    CHECK_THROWS_AS(mock.score_pair({}, image, "", context), UsageError);
}

TEST_CASE("call log: conservation, drain semantics, concurrent workers") {
    MockGateway mock;
    mock.add_rule(canned("llm_tool", "ok"));
    MockRule failing;
    failing.step = "reflection";
    failing.fail_always = true;
    mock.add_rule(failing);

    const std::vector<ChatTurn> turns = {user_turn("hello")};
    CHECK(mock.chat({}, turns, {CallStep::LlmTool, "a", 0}) == "ok");
    CHECK_THROWS_AS(mock.chat({}, turns, {CallStep::Reflection, "a", 1}), TransportError);

    // one entry per invocation, including the failed one
    auto entries = mock.drain_call_log();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].success);
    CHECK_FALSE(entries[1].success);
    CHECK(entries[1].cycle_index == 1);
    CHECK(mock.drain_call_log().empty());  // drained

    // two workers: union of both, each record's entries in its own order
    const int per_worker = 50;
    auto worker = [&](const std::string& id) {
        for (int i = 0; i < per_worker; ++i)
            mock.chat({}, turns, {CallStep::LlmTool, id, i});
    };
    std::thread t1(worker, "w1");
    std::thread t2(worker, "w2");
    t1.join();
    t2.join();
    entries = mock.drain_call_log();
    REQUIRE(entries.size() == 2 * per_worker);
    int last_w1 = -1, last_w2 = -1;
    for (const auto& entry : entries) {
        if (entry.record_id == "w1") {
            CHECK(entry.cycle_index == last_w1 + 1);
            last_w1 = entry.cycle_index;
        } else {
            CHECK(entry.cycle_index == last_w2 + 1);
            last_w2 = entry.cycle_index;
        }
    }
    CHECK(last_w1 == per_worker - 1);
    CHECK(last_w2 == per_worker - 1);
}

TEST_CASE("mock scripts: jsonl round-trip and first-match-wins ordering") {
    std::vector<MockRule> rules;
    MockRule first;
    first.step = "planning";
    first.record_id = "r";
    first.prompt_contains = "specific";
    first.response = "first";
    first.wall_ms = 1.5;
    rules.push_back(first);
    MockRule second = canned("planning", "fallback");
    second.fail_times = 2;
    rules.push_back(second);

    const std::string dir = realign::test::scratch_dir("mockscripts");
    const std::string path = dir + "/rules.jsonl";
    save_mock_rules(path, rules);
    const auto loaded = load_mock_rules(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].prompt_contains == std::string("specific"));
    CHECK(loaded[0].wall_ms == 1.5);
    CHECK(loaded[1].fail_times == 2);

    MockGateway mock;
    mock.load_script_file(path);
    const CallContext planning{CallStep::Planning, "r", 0};
    CHECK(mock.chat({}, {user_turn("something specific here")}, planning) == "first");
    // fallback fails twice, then answers
    CHECK_THROWS_AS(mock.chat({}, {user_turn("other")}, planning), TransportError);
    CHECK_THROWS_AS(mock.chat({}, {user_turn("other")}, planning), TransportError);
    CHECK(mock.chat({}, {user_turn("other")}, planning) == "fallback");
    // scripted wall time lands in the log
    const auto entries = mock.drain_call_log();
    CHECK(entries.front().wall_time_ms == 1.5);
}

// ---------------------------------------------------------------------------
// Real HTTP backend against a local server
// ---------------------------------------------------------------------------

namespace {

struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    // register routes first, then start()
    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

} // namespace

TEST_CASE("http gateway: happy path, auth header, image payloads") {
    LocalServer local;
    std::atomic<int> hits{0};
    std::string seen_auth;
    json seen_body;
    local.server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                                  httplib::Response& res) {
        ++hits;
        seen_auth = req.get_header_value("Authorization");
        seen_body = json::parse(req.body);
        res.set_content(json{{"choices", {{{"message", {{"content", "pong"}}}}}}}.dump(),
                        "application/json");
    });
    local.server.Post("/v1/score", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        CHECK(body.contains("image"));
        CHECK(body.at("text") == "a mug");
        res.set_content(json{{"score", 0.42}}.dump(), "application/json");
    });
    local.start();

    HttpGateway gateway;
    EndpointConfig endpoint;
    endpoint.base_url = local.url();
    endpoint.model_name = "test-model";
    endpoint.temperature = 0.0;
    endpoint.auth_token = "sekrit";

    const std::string reply =
        gateway.chat(endpoint, {system_turn("s"), user_turn("ping")}, {CallStep::LlmTool, "r", 0});
    CHECK(reply == "pong");
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_body["model"] == "test-model");
    REQUIRE(seen_body["messages"].size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");

    ChatTurn with_image = user_turn("describe");
    with_image.image = ImageAttachment{tiny_image_bytes(), "image/png"};
    CHECK(gateway.vision_chat(endpoint, {with_image}, {CallStep::VlmTool, "r", 0}) == "pong");
    const auto& content = seen_body["messages"][0]["content"];
    REQUIRE(content.is_array());
    CHECK(content[1]["type"] == "image_url");
    const std::string url = content[1]["image_url"]["url"].get<std::string>();
    CHECK(url.rfind("data:image/png;base64,", 0) == 0);

    CHECK(gateway.score_pair(endpoint, tiny_image_bytes(), "a mug", {CallStep::Scoring, "r", 0}) ==
          0.42);

    const auto entries = gateway.drain_call_log();
    REQUIRE(entries.size() == 3);
    for (const auto& entry : entries) {
        CHECK(entry.success);
        CHECK(entry.retry_count == 0);
        CHECK(entry.wall_time_ms >= 0.0);
    }
}

TEST_CASE("http gateway: retry budget on 500s, no retry on 4xx, protocol errors") {
    LocalServer local;
    std::atomic<int> hits{0};
    local.server.Post("/v1/chat/completions",
                      [&](const httplib::Request&, httplib::Response& res) {
                          ++hits;
                          res.status = 500;
                          res.set_content("boom", "text/plain");
                      });
    local.server.Post("/v1/score", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    local.start();

    HttpGateway gateway;
    EndpointConfig endpoint;
    endpoint.base_url = local.url();
    endpoint.max_retries = 2;

    const std::vector<ChatTurn> turns = {user_turn("hi")};
    CHECK_THROWS_AS(gateway.chat(endpoint, turns, {CallStep::LlmTool, "r", 0}), TransportError);
    CHECK(hits == 3);  // 1 + max_retries attempts

    CHECK_THROWS_AS(
        gateway.score_pair(endpoint, tiny_image_bytes(), "t", {CallStep::Scoring, "r", 0}),
        ProtocolError);

    // connection refused also surfaces as TransportError after retries
    EndpointConfig dead;
    dead.base_url = "http://127.0.0.1:1";
    dead.max_retries = 0;
    dead.timeout_ms = 500;
    CHECK_THROWS_AS(gateway.chat(dead, turns, {CallStep::LlmTool, "r", 0}), TransportError);

    const auto entries = gateway.drain_call_log();
    REQUIRE(entries.size() == 3);
    for (const auto& entry : entries) CHECK_FALSE(entry.success);
}

TEST_CASE("http gateway: 404 fails fast without retries") {
    LocalServer local;
    std::atomic<int> hits{0};
    local.server.Post("/v1/chat/completions",
                      [&](const httplib::Request&, httplib::Response& res) {
                          ++hits;
                          res.status = 404;
                      });
    local.start();
    HttpGateway gateway;
    EndpointConfig endpoint;
    endpoint.base_url = local.url();
    endpoint.max_retries = 5;
    CHECK_THROWS_AS(gateway.chat(endpoint, {user_turn("x")}, {CallStep::LlmTool, "r", 0}),
                    TransportError);
    CHECK(hits == 1);
}
