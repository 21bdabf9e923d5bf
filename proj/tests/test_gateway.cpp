// Endpoint client behavior (request shape, credential handling, retry and
// error policy) against scripted transports plus one real loopback server,
// and the scripted oracle models used for closed-loop evaluation.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <thread>

#include "stads/stads.hpp"
#include "support.hpp"

using namespace stads;
using json = nlohmann::json;
using Catch::Matchers::ContainsSubstring;

namespace {

// RAII environment variable so credential state cannot leak between tests
struct env_guard {
    std::string name;
    env_guard(const std::string& n, const std::string& v) : name(n) {
        setenv(name.c_str(), v.c_str(), 1);
    }
    ~env_guard() { unsetenv(name.c_str()); }
};

// transport that replays a fixed result sequence (last one repeats) and
// records what the client sent
struct scripted_transport {
    std::vector<gateway::HttpResult> results;
    std::size_t calls = 0;
    std::string last_path, last_body, last_bearer;

    explicit scripted_transport(std::vector<gateway::HttpResult> r)
        : results(std::move(r)) {}

    gateway::transport_fn fn() {
        return [this](const gateway::EndpointDescriptor&, const std::string& path,
                      const std::string& body, const std::string& bearer) {
            last_path = path;
            last_body = body;
            last_bearer = bearer;
            const auto r = results[std::min(calls, results.size() - 1)];
            ++calls;
            return r;
        };
    }
};

std::string ok_body(const std::string& content, const std::string& finish = "stop") {
    json msg{{"role", "assistant"}, {"content", content}};
    json choice{{"message", msg}, {"finish_reason", finish}};
    return json{{"choices", json::array({choice})}}.dump();
}

gateway::EndpointDescriptor test_endpoint() {
    gateway::EndpointDescriptor e;
    e.base_url = "http://unit.test/v1";
    e.model_id = "test-model";
    e.credential_env = "STADS_TEST_KEY";
    e.retry_cap = 3;
    e.initial_backoff_ms = 1;  // keep retry tests fast
    return e;
}

prompt::PromptBundle tiny_bundle() {
    prompt::PromptBundle b;
    b.instruction = "instr";
    b.table_block = "Row 1: f1 = 0, class = ?";
    b.question = "q";
    b.response_format = "fmt";
    b.expected_predictions = 1;
    return b;
}

}  // namespace

TEST_CASE("request fingerprints are stable and sensitive") {
    gateway::DecodingConfig c;
    const auto f1 = gateway::request_fingerprint("m", c, "prompt");
    CHECK(f1 == gateway::request_fingerprint("m", c, "prompt"));
    CHECK(f1.size() == 16);
    CHECK(f1.find_first_not_of("0123456789abcdef") == std::string::npos);

    CHECK(f1 != gateway::request_fingerprint("m2", c, "prompt"));
    CHECK(f1 != gateway::request_fingerprint("m", c, "prompt+"));
    auto warm = c;
    warm.temperature = 0.7;
    CHECK(f1 != gateway::request_fingerprint("m", warm, "prompt"));
}

TEST_CASE("endpoint descriptors round trip and validate") {
    auto e = test_endpoint();
    e.timeout_ms = 1234;
    e.parallelism = 2;
    e.min_interval_ms = 10;
    const auto back = gateway::EndpointDescriptor::from_json(e.to_json());
    CHECK(back.base_url == e.base_url);
    CHECK(back.model_id == e.model_id);
    CHECK(back.credential_env == e.credential_env);
    CHECK(back.timeout_ms == 1234);
    CHECK(back.retry_cap == 3);
    CHECK(back.parallelism == 2);
    CHECK(back.min_interval_ms == 10);
    CHECK(back.initial_backoff_ms == 1);

    SECTION("defaults fill in") {
        const auto d = gateway::EndpointDescriptor::from_json(
            json{{"base_url", "https://x/v1"}, {"model_id", "m"}});
        CHECK(d.credential_env == "STADS_API_KEY");
        CHECK(d.retry_cap == 3);
        CHECK(d.parallelism == 4);
    }
    SECTION("invalid limits are rejected") {
        json bad = e.to_json();
        bad["retry_cap"] = -1;
        CHECK_THROWS_AS(gateway::EndpointDescriptor::from_json(bad), config_error);
        bad = e.to_json();
        bad["parallelism"] = 0;
        CHECK_THROWS_AS(gateway::EndpointDescriptor::from_json(bad), config_error);
    }
}

TEST_CASE("base url splitting") {
    using gateway::detail::split_base_url;
    CHECK(split_base_url("https://api.example.com/v1") ==
          std::make_pair(std::string("https://api.example.com"), std::string("/v1")));
    CHECK(split_base_url("http://host:8000") ==
          std::make_pair(std::string("http://host:8000"), std::string("")));
    CHECK(split_base_url("http://h/v1/") ==
          std::make_pair(std::string("http://h"), std::string("/v1")));
    CHECK_THROWS_AS(split_base_url("api.example.com"), config_error);
}

TEST_CASE("complete sends an OpenAI-style chat request") {
    env_guard key("STADS_TEST_KEY", "secret-token");
    scripted_transport t({{200, ok_body("[0, 1]"), ""}});
    const auto bundle = tiny_bundle();

    json recorded;
    const auto r = gateway::complete(test_endpoint(), bundle, {}, t.fn(),
                                     [&](const json& j) { recorded = j; });

    CHECK(r.text == "[0, 1]");
    CHECK(r.model_id == "test-model");
    CHECK(r.retries == 0);
    CHECK_FALSE(r.truncated);
    CHECK(r.request_fingerprint ==
          gateway::request_fingerprint("test-model", {}, bundle.full_text()));

    CHECK(t.calls == 1);
    CHECK(t.last_path == "/chat/completions");
    CHECK(t.last_bearer == "secret-token");
    const json body = json::parse(t.last_body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == 0.2);
    CHECK(body.at("top_p") == 1.0);
    CHECK(body.at("max_tokens") == 8192);
    REQUIRE(body.at("messages").size() == 1);
    CHECK(body["messages"][0].at("role") == "user");
    CHECK(body["messages"][0].at("content") == bundle.full_text());

    CHECK(recorded.at("text") == "[0, 1]");
    CHECK(recorded.at("fingerprint") == r.request_fingerprint);
}

TEST_CASE("decoding parameters are validated before any traffic") {
    scripted_transport t({{200, ok_body("x"), ""}});
    gateway::DecodingConfig bad;
    bad.temperature = -0.1;
    CHECK_THROWS_AS(gateway::complete(test_endpoint(), tiny_bundle(), bad, t.fn()),
                    config_error);
    bad = {};
    bad.top_p = 0.0;
    CHECK_THROWS_AS(gateway::complete(test_endpoint(), tiny_bundle(), bad, t.fn()),
                    config_error);
    bad = {};
    bad.max_new_tokens = 0;
    CHECK_THROWS_AS(gateway::complete(test_endpoint(), tiny_bundle(), bad, t.fn()),
                    config_error);
    CHECK(t.calls == 0);
}

TEST_CASE("missing credential stops the request before the transport") {
    unsetenv("STADS_TEST_KEY");
    scripted_transport t({{200, ok_body("x"), ""}});
    CHECK_THROWS_WITH(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                      ContainsSubstring("STADS_TEST_KEY"));
    CHECK(t.calls == 0);
}

TEST_CASE("credential rejection is terminal") {
    env_guard key("STADS_TEST_KEY", "bad");
    for (int status : {401, 403}) {
        scripted_transport t({{status, "denied", ""}});
        CHECK_THROWS_AS(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                        credential_error);
        CHECK(t.calls == 1);  // no retry on an auth failure
    }
}

TEST_CASE("transient statuses are retried with backoff") {
    env_guard key("STADS_TEST_KEY", "k");

    SECTION("429 then success") {
        scripted_transport t({{429, "slow down", ""},
                              {429, "slow down", ""},
                              {200, ok_body("[1]"), ""}});
        const auto r = gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn());
        CHECK(r.text == "[1]");
        CHECK(r.retries == 2);
        CHECK(t.calls == 3);
    }
    SECTION("persistent 500 exhausts the cap") {
        auto e = test_endpoint();
        e.retry_cap = 2;
        scripted_transport t({{500, "boom", ""}});
        CHECK_THROWS_WITH(gateway::complete(e, tiny_bundle(), {}, t.fn()),
                          ContainsSubstring("retry cap exhausted after 3 attempts"));
        CHECK(t.calls == 3);
    }
    SECTION("connection failures surface the network error") {
        auto e = test_endpoint();
        e.retry_cap = 1;
        scripted_transport t({{0, "", "connection refused"}});
        CHECK_THROWS_WITH(gateway::complete(e, tiny_bundle(), {}, t.fn()),
                          ContainsSubstring("connection refused"));
        CHECK(t.calls == 2);
    }
}

TEST_CASE("permanent client errors and malformed payloads fail fast") {
    env_guard key("STADS_TEST_KEY", "k");

    SECTION("404 is not retried") {
        scripted_transport t({{404, "missing", ""}});
        CHECK_THROWS_AS(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                        transport_error);
        CHECK(t.calls == 1);
    }
    SECTION("non-JSON 200 body") {
        scripted_transport t({{200, "<html>oops</html>", ""}});
        CHECK_THROWS_WITH(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                          ContainsSubstring("unparseable"));
        CHECK(t.calls == 1);
    }
    SECTION("missing choices") {
        scripted_transport t({{200, json{{"choices", json::array()}}.dump(), ""}});
        CHECK_THROWS_WITH(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                          ContainsSubstring("no choices"));
    }
    SECTION("missing message content") {
        json choice{{"finish_reason", "stop"}};
        scripted_transport t(
            {{200, json{{"choices", json::array({choice})}}.dump(), ""}});
        CHECK_THROWS_WITH(gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn()),
                          ContainsSubstring("no message content"));
    }
}

TEST_CASE("a length stop marks the response truncated") {
    env_guard key("STADS_TEST_KEY", "k");
    scripted_transport t({{200, ok_body("[0, 1", "length"), ""}});
    const auto r = gateway::complete(test_endpoint(), tiny_bundle(), {}, t.fn());
    CHECK(r.truncated);
}

TEST_CASE("rate gate spaces request starts") {
    gateway::rate_gate gate;
    const auto t0 = std::chrono::steady_clock::now();
    gate.pace(50);
    gate.pace(50);
    gate.pace(50);
    const auto elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    CHECK(elapsed >= 100.0);  // first start free, next two each wait 50ms

    gateway::rate_gate idle;
    const auto t1 = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i) idle.pace(0);
    const auto quick = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t1)
                           .count();
    CHECK(quick < 50.0);  // disabled gate must not sleep
}

TEST_CASE("default transport talks to a real loopback server") {
    httplib::Server srv;
    std::string seen_auth, seen_model;
    srv.Post("/v1/chat/completions",
             [&](const httplib::Request& req, httplib::Response& res) {
                 seen_auth = req.get_header_value("Authorization");
                 seen_model = json::parse(req.body).at("model").get<std::string>();
                 res.set_content(ok_body("[0, 0, 1]"), "application/json");
             });
    const int port = srv.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    env_guard key("STADS_TEST_KEY", "loopback-secret");
    auto e = test_endpoint();
    e.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";

    const auto r = gateway::complete(e, tiny_bundle(), {});
    CHECK(r.text == "[0, 0, 1]");
    CHECK(seen_auth == "Bearer loopback-secret");
    CHECK(seen_model == "test-model");

    srv.stop();
    server.join();
}

// ---------------------------------------------------------------------------
// scripted oracles
// ---------------------------------------------------------------------------

TEST_CASE("oracle reliance orders") {
    const std::vector<std::string> schema = {"a", "b", "c"};

    gateway::OracleRule stump;
    stump.kind = gateway::oracle_kind::stump;
    stump.feature = "b";
    CHECK(stump.reliance_order(schema) == std::vector<std::string>{"b", "a", "c"});

    gateway::OracleRule lin;
    lin.kind = gateway::oracle_kind::linear;
    lin.weights = {{"a", 1.0}, {"c", -3.0}};
    CHECK(lin.reliance_order(schema) == std::vector<std::string>{"c", "a", "b"});

    gateway::OracleRule flat;  // constant: nothing read, schema order kept
    CHECK(flat.reliance_order(schema) == schema);
}

TEST_CASE("stated rankings follow the policy") {
    const std::vector<std::string> schema = {"a", "b", "c"};
    gateway::OracleRule r;
    r.kind = gateway::oracle_kind::stump;
    r.feature = "b";  // truth: b, a, c

    r.policy = gateway::ranking_policy::honest;
    CHECK(r.stated_ranking(schema) == std::vector<std::string>{"b", "a", "c"});

    r.policy = gateway::ranking_policy::deceptive;  // default: reversal
    CHECK(r.stated_ranking(schema) == std::vector<std::string>{"c", "a", "b"});

    r.deception = {2, 0, 1};  // out[i] = truth[perm[i]]
    CHECK(r.stated_ranking(schema) == std::vector<std::string>{"c", "b", "a"});

    r.policy = gateway::ranking_policy::silent;
    CHECK(r.stated_ranking(schema).empty());

    SECTION("broken permutations are rejected") {
        r.policy = gateway::ranking_policy::deceptive;
        r.deception = {0, 1};
        CHECK_THROWS_AS(r.stated_ranking(schema), config_error);
        r.deception = {0, 0, 1};
        CHECK_THROWS_AS(r.stated_ranking(schema), config_error);
        r.deception = {0, 1, 5};
        CHECK_THROWS_AS(r.stated_ranking(schema), config_error);
    }
}

TEST_CASE("oracle rules validate against the schema and round trip") {
    const auto toy = support::toy_dataset();

    gateway::OracleRule stump;
    stump.kind = gateway::oracle_kind::stump;
    stump.feature = "nope";
    CHECK_THROWS_WITH(stump.validate_for(toy),
                      ContainsSubstring("stump feature not in schema: nope"));
    stump.feature = "f2";
    CHECK_NOTHROW(stump.validate_for(toy));

    gateway::OracleRule lin;
    lin.kind = gateway::oracle_kind::linear;
    lin.weights = {{"ghost", 1.0}};
    CHECK_THROWS_AS(lin.validate_for(toy), config_error);

    stump.threshold = 1.25;
    stump.policy = gateway::ranking_policy::deceptive;
    stump.deception = {1, 0};
    const auto back = gateway::OracleRule::from_json(stump.to_json());
    CHECK(back.kind == gateway::oracle_kind::stump);
    CHECK(back.feature == "f2");
    CHECK(back.threshold == 1.25);
    CHECK(back.policy == gateway::ranking_policy::deceptive);
    CHECK(back.deception == std::vector<std::size_t>{1, 0});
    CHECK(back.model_id() == "oracle:stump");

    CHECK_THROWS_AS(gateway::OracleRule::from_json(json{{"kind", "tarot"}}),
                    config_error);
}

TEST_CASE("stump oracle answers masked rows from the rendered table") {
    const auto toy = support::toy_dataset();
    const auto bundle = prompt::build_prediction_prompt(toy, toy, {0, 1}, {});

    gateway::OracleRule rule;
    rule.kind = gateway::oracle_kind::stump;
    rule.feature = "f2";
    rule.threshold = 1.0;

    const auto r = gateway::oracle_complete(rule, bundle, toy);
    CHECK(r.model_id == "oracle:stump");

    const auto parsed = parse::parse_predictions(r.text, toy.labels);
    CHECK(parsed.note == parse::extraction_note::clean);
    CHECK(parsed.unknown_positions.empty());
    // f2 column: 1.5 2.0 0.5 0.1 1.1 0.2 1.9 0.3 1.2 0.4 against threshold 1.0
    CHECK(parsed.values == std::vector<long long>{1, 1, 0, 0, 1, 0, 1, 0, 1, 0});
}

TEST_CASE("oracles skip demonstration rows") {
    const auto toy = support::toy_dataset();
    const auto bundle = prompt::build_prediction_prompt(toy, toy, {4, 1}, {});
    REQUIRE(bundle.shots == 4);

    gateway::OracleRule rule;
    rule.kind = gateway::oracle_kind::constant;
    rule.constant_label = 1;
    const auto r = gateway::oracle_complete(rule, bundle, toy);
    const auto parsed = parse::parse_predictions(r.text, toy.labels);
    CHECK(parsed.values == std::vector<long long>(10, 1));  // only the masked rows
}

TEST_CASE("ablating the stump's feature forces the majority fallback") {
    const auto toy = support::toy_dataset();
    const auto bundle = prompt::build_prediction_prompt(toy, toy, {0, 1}, {"f2"});

    gateway::OracleRule rule;
    rule.kind = gateway::oracle_kind::stump;
    rule.feature = "f2";
    rule.threshold = 1.0;

    const auto r = gateway::oracle_complete(rule, bundle, toy);
    const auto parsed = parse::parse_predictions(r.text, toy.labels);
    // toy is balanced 5/5, so the majority tie breaks to the smaller code
    CHECK(parsed.values == std::vector<long long>(10, 0));
}

TEST_CASE("linear oracle drops ablated terms") {
    const auto toy = support::toy_dataset();
    gateway::OracleRule rule;
    rule.kind = gateway::oracle_kind::linear;
    rule.weights = {{"f2", 1.0}};
    rule.threshold = 1.0;

    const auto full = gateway::oracle_complete(
        rule, prompt::build_prediction_prompt(toy, toy, {0, 1}, {}), toy);
    CHECK(parse::parse_predictions(full.text, toy.labels).values ==
          std::vector<long long>{1, 1, 0, 0, 1, 0, 1, 0, 1, 0});

    // with f2 gone the score is identically 0, below the threshold
    const auto ablated = gateway::oracle_complete(
        rule, prompt::build_prediction_prompt(toy, toy, {0, 1}, {"f2"}), toy);
    CHECK(parse::parse_predictions(ablated.text, toy.labels).values ==
          std::vector<long long>(10, 0));
}

TEST_CASE("oracle self-attribution responses") {
    const auto toy = support::toy_dataset();
    const auto bundle = prompt::build_self_attribution_prompt(toy);

    gateway::OracleRule rule;
    rule.kind = gateway::oracle_kind::stump;
    rule.feature = "f2";

    rule.policy = gateway::ranking_policy::honest;
    CHECK(gateway::oracle_complete(rule, bundle, toy).text == "[f2, f1]");

    rule.policy = gateway::ranking_policy::deceptive;
    CHECK(gateway::oracle_complete(rule, bundle, toy).text == "[f1, f2]");

    rule.policy = gateway::ranking_policy::silent;
    CHECK(gateway::oracle_complete(rule, bundle, toy).text.empty());

    // the honest response must survive the ranking parser intact
    rule.policy = gateway::ranking_policy::honest;
    const auto parsed = parse::parse_feature_ranking(
        gateway::oracle_complete(rule, bundle, toy).text, toy.features);
    CHECK(parsed.names == std::vector<std::string>{"f2", "f1"});
    CHECK(parsed.dropped.empty());
}
