#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "core/error.hpp"
#include "core/gateway.hpp"
#include "core/prompts.hpp"
#include "core/text.hpp"
#include "core/types.hpp"
#include "doctest.h"

using namespace creastress;
using json = nlohmann::json;

namespace {

Errc thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error to be thrown");
    return Errc::io;
}

std::vector<std::string> ws_words(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

gateway::PromptRequest req_for(const std::string& prompt) {
    gateway::PromptRequest r;
    r.model_id = "mock";
    r.prompt = prompt;
    return r;
}

const std::string kTwenty =
    "one two three four five six seven eight nine ten eleven twelve thirteen fourteen "
    "fifteen sixteen seventeen eighteen nineteen twenty";

// Local chat-completions stand-in covering every failure mode the client
// distinguishes. One route per scenario; flaky counters live for the whole
// binary and each flaky route is hit by exactly one test case.
struct TestServer {
    httplib::Server svr;
    int port = 0;
    std::thread thread;

    std::mutex capture_mutex;
    std::string last_auth;
    std::string last_body;

    std::atomic<int> flaky_calls{0};
    std::atomic<int> ratelimited_calls{0};
    std::atomic<int> auth_calls{0};
    std::atomic<int> always500_calls{0};

    static std::string ok_body(const std::string& content) {
        json j;
        j["choices"] = json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
        j["model"] = "srv-model";
        j["usage"] = {{"total_tokens", 42}};
        return j.dump();
    }

    TestServer() {
        svr.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(capture_mutex);
                last_auth = req.get_header_value("Authorization");
                last_body = req.body;
            }
            res.set_content(ok_body("hello from test"), "application/json");
        });
        svr.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
            if (++flaky_calls == 1) {
                res.status = 500;
                res.set_content("boom", "text/plain");
            } else {
                res.set_content(ok_body("recovered"), "application/json");
            }
        });
        svr.Post("/ratelimited", [this](const httplib::Request&, httplib::Response& res) {
            if (++ratelimited_calls == 1) {
                res.status = 429;
                res.set_content("slow down", "text/plain");
            } else {
                res.set_content(ok_body("after backoff"), "application/json");
            }
        });
        svr.Post("/auth", [this](const httplib::Request&, httplib::Response& res) {
            ++auth_calls;
            res.status = 401;
            res.set_content("who are you", "text/plain");
        });
        svr.Post("/badshape", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"choices":[]})", "application/json");
        });
        svr.Post("/badshape2", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"choices":[{"message":{"role":"assistant"}}]})",
                            "application/json");
        });
        svr.Post("/notjson", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("certainly not json", "text/plain");
        });
        svr.Post("/notfound", [](const httplib::Request&, httplib::Response& res) {
            res.status = 404;
        });
        svr.Post("/always500", [this](const httplib::Request&, httplib::Response& res) {
            ++always500_calls;
            res.status = 500;
        });
        port = svr.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
        setenv("CS_TEST_API_KEY", "test-key-123", 1);
    }

    ~TestServer() {
        svr.stop();
        if (thread.joinable()) thread.join();
    }

    gateway::HttpBackendConfig config(const std::string& path) const {
        gateway::HttpBackendConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
        cfg.path = path;
        cfg.model = "provider-model";
        cfg.api_key_env = "CS_TEST_API_KEY";
        cfg.retry.max_attempts = 3;
        cfg.retry.initial_delay_ms = 1.0;
        cfg.retry.multiplier = 1.0;
        cfg.retry.jitter = 0.0;
        cfg.timeout_s = 5.0;
        return cfg;
    }
};

TestServer& server() {
    static TestServer instance;
    return instance;
}

}  // namespace

TEST_CASE("mock contraction keeps a ceil-based prefix of the concept") {
    gateway::MockBackend mock;
    // 20 words: mild keeps ceil(0.65*20)=13, moderate ceil(0.30*20)=6,
    // extreme ceil(0.05*20)=1.
    const auto mild =
        mock.complete(req_for(prompts::contraction_prompt(kTwenty, Level::mild))).text;
    CHECK(ws_words(mild).size() == 13);
    CHECK(mild ==
          "one two three four five six seven eight nine ten eleven twelve thirteen");

    const auto moderate =
        mock.complete(req_for(prompts::contraction_prompt(kTwenty, Level::moderate))).text;
    CHECK(moderate == "one two three four five six");

    const auto extreme =
        mock.complete(req_for(prompts::contraction_prompt(kTwenty, Level::extreme))).text;
    CHECK(extreme == "one");

    // A one-word concept survives even extreme contraction.
    const auto tiny =
        mock.complete(req_for(prompts::contraction_prompt("solo", Level::extreme))).text;
    CHECK(tiny == "solo");
}

TEST_CASE("mock expansion pads the input to the word target with the filler cycle") {
    gateway::MockBackend mock;
    const auto p = prompts::plain_expansion_prompt("alpha beta gamma", Level::mild, 100);
    const auto out = mock.complete(req_for(p)).text;
    const auto words = ws_words(out);
    REQUIRE(words.size() == 30);  // floor(0.30 * 100)
    CHECK(words[0] == "alpha");
    CHECK(words[1] == "beta");
    CHECK(words[2] == "gamma");
    CHECK(words[3] == "vivid");   // filler cycle starts
    CHECK(words[4] == "sparks");
    CHECK(words[15] == "vivid");  // cycle wraps after 12 filler words
    CHECK(words[29] == "of");     // 27th filler word = cycle position 2

    // Inputs already at or past the target are left untouched.
    const auto long_input = "a b c d e f g h i j";
    const auto p2 = prompts::plain_expansion_prompt(long_input, Level::mild, 10);
    CHECK(mock.complete(req_for(p2)).text == long_input);
}

TEST_CASE("mock expansion appends marker bullets verbatim") {
    gateway::MockBackend mock;
    std::vector<corpus::Marker> markers;
    corpus::Marker a;
    a.ad_id = "ad-001";
    a.text = "neon rain on glass";
    a.category = MarkerCategory::visual;
    corpus::Marker b = a;
    b.text = "Breathe the city out";
    b.category = MarkerCategory::slogan_like;
    markers = {a, b};

    const auto p = prompts::marker_expansion_prompt("seed words here", markers, Level::mild, 10);
    const auto out = mock.complete(req_for(p)).text;
    // target floor(0.3*10)=3; input already has 3 words, so output is input + markers.
    CHECK(out == "seed words here neon rain on glass Breathe the city out");
}

TEST_CASE("mock judgment distinguishes contiguous, partial, and absent markers") {
    gateway::MockBackend mock;
    const auto present = mock.complete(req_for(prompts::marker_judgment_prompt(
        "golden retriever puppies", "the park is full of golden retriever puppies today")));
    CHECK(prompts::parse_verdict_reply(present.text).verdict == Verdict::present);
    CHECK(present.text.find("token overlap") != std::string::npos);

    const auto partly = mock.complete(req_for(prompts::marker_judgment_prompt(
        "golden retriever puppies", "golden images of many puppies")));
    CHECK(prompts::parse_verdict_reply(partly.text).verdict == Verdict::partly);

    const auto absent = mock.complete(req_for(prompts::marker_judgment_prompt(
        "completely different phrase", "nothing matches here at all")));
    CHECK(prompts::parse_verdict_reply(absent.text).verdict == Verdict::absent);

    // Punctuation and case differences are tokenized away.
    const auto fuzzy = mock.complete(req_for(prompts::marker_judgment_prompt(
        "Breathe the city out", "you breathe, the CITY out!")));
    CHECK(prompts::parse_verdict_reply(fuzzy.text).verdict == Verdict::present);
}

TEST_CASE("mock extraction emits 4/3/n markers by concept length") {
    gateway::MockBackend mock;
    const auto big = mock.complete(req_for(prompts::marker_extraction_prompt(kTwenty)));
    const auto big_parsed = prompts::parse_marker_reply(big.text);
    REQUIRE(big_parsed.markers.size() == 4);
    CHECK(big_parsed.warnings.empty());
    CHECK(big_parsed.markers[0].text == "one two three");
    CHECK(big_parsed.markers[0].category == MarkerCategory::metaphorical);
    CHECK(big_parsed.markers[1].category == MarkerCategory::emotional);
    CHECK(big_parsed.markers[2].category == MarkerCategory::visual);
    CHECK(big_parsed.markers[3].category == MarkerCategory::slogan_like);

    const auto mid =
        mock.complete(req_for(prompts::marker_extraction_prompt("alpha beta gamma delta epsilon")));
    CHECK(prompts::parse_marker_reply(mid.text).markers.size() == 3);

    const auto two = mock.complete(req_for(prompts::marker_extraction_prompt("alpha beta")));
    CHECK(prompts::parse_marker_reply(two.text).markers.size() == 2);

    const auto one = mock.complete(req_for(prompts::marker_extraction_prompt("alpha")));
    CHECK(prompts::parse_marker_reply(one.text).markers.size() == 1);
}

TEST_CASE("mock emergent coding lists runs of novel tokens and NONE when nothing is new") {
    gateway::MockBackend mock;
    const auto out = mock.complete(req_for(prompts::emergent_idea_prompt(
        "the cat sat on the mat", "the cat sat on a glowing crystal mat under moonlight")));
    const auto parsed = prompts::parse_emergent_reply(out.text);
    REQUIRE(parsed.ideas.size() == 2);
    CHECK(parsed.ideas[0].text == "a glowing crystal");
    CHECK(parsed.ideas[0].category == MarkerCategory::metaphorical);
    CHECK(parsed.ideas[1].text == "under moonlight");
    CHECK(parsed.ideas[1].category == MarkerCategory::emotional);

    const auto none = mock.complete(
        req_for(prompts::emergent_idea_prompt("the cat sat", "the cat sat")));
    CHECK(none.text == "NONE");
    CHECK(prompts::parse_emergent_reply(none.text).ideas.empty());
}

TEST_CASE("mock backend validates requests and rejects unknown prompt shapes") {
    gateway::MockBackend mock;
    CHECK(thrown_code([&] { mock.complete(req_for("")); }) == Errc::invalid_argument);

    auto bad_temp = req_for("anything\nContracted version:");
    bad_temp.temperature = -0.5;
    CHECK(thrown_code([&] { mock.complete(bad_temp); }) == Errc::invalid_argument);

    CHECK(thrown_code([&] { mock.complete(req_for("free-form question?")); }) ==
          Errc::protocol);

    const auto resp =
        mock.complete(req_for(prompts::contraction_prompt("hello world", Level::mild)));
    CHECK(resp.attempt_count == 1);
    CHECK(resp.provider_metadata.at("backend") == "mock");
    CHECK(mock.name() == "mock");
}

TEST_CASE("admission gate bounds concurrent passes") {
    CHECK(thrown_code([] { gateway::AdmissionGate gate(0); }) == Errc::invalid_argument);

    gateway::AdmissionGate gate(3);
    std::atomic<int> active{0};
    std::atomic<int> max_active{0};
    std::vector<std::thread> workers;
    for (int i = 0; i < 12; ++i) {
        workers.emplace_back([&] {
            gateway::AdmissionGate::Pass pass(gate);
            const int now = ++active;
            int seen = max_active.load();
            while (seen < now && !max_active.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
            --active;
        });
    }
    for (auto& w : workers) w.join();
    CHECK(active.load() == 0);
    CHECK(max_active.load() <= 3);
    CHECK(max_active.load() >= 1);
}

TEST_CASE("make_backend returns the mock for any model id starting with 'mock'") {
    CHECK(gateway::make_backend("mock", json::object())->name() == "mock");
    CHECK(gateway::make_backend("mock-judge", json::object())->name() == "mock");
    CHECK(gateway::make_backend("mockingbird", json::object())->name() == "mock");
}

TEST_CASE("http backend round-trips a successful completion") {
    auto& srv = server();
    gateway::HttpBackend be("remote-a", srv.config("/ok"));
    CHECK(be.name() == "remote-a");

    gateway::PromptRequest req;
    req.model_id = "remote-a";
    req.prompt = "say hello";
    req.temperature = 0.4;
    req.max_tokens = 128;
    req.seed_hint = 77;
    const auto resp = be.complete(req);
    CHECK(resp.text == "hello from test");
    CHECK(resp.attempt_count == 1);
    CHECK(resp.provider_metadata.at("status") == "200");
    CHECK(resp.provider_metadata.at("response_model") == "srv-model");
    CHECK(resp.provider_metadata.at("total_tokens") == "42");
    CHECK(resp.latency_ms >= 0.0);

    std::lock_guard lock(srv.capture_mutex);
    CHECK(srv.last_auth == "Bearer test-key-123");
    const json body = json::parse(srv.last_body);
    CHECK(body.at("model") == "provider-model");
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") == "say hello");
    CHECK(body.at("temperature").get<double>() == doctest::Approx(0.4));
    CHECK(body.at("max_tokens") == 128);
    CHECK(body.at("seed") == 77);
}

TEST_CASE("http backend omits the seed field when no hint is set") {
    auto& srv = server();
    gateway::HttpBackend be("remote-a", srv.config("/ok"));
    gateway::PromptRequest req;
    req.prompt = "no seed please";
    req.seed_hint = -1;
    be.complete(req);
    std::lock_guard lock(srv.capture_mutex);
    CHECK_FALSE(json::parse(srv.last_body).contains("seed"));
}

TEST_CASE("http backend retries 5xx and 429 then succeeds") {
    auto& srv = server();
    gateway::HttpBackend flaky("remote-a", srv.config("/flaky"));
    gateway::PromptRequest req;
    req.prompt = "please retry";
    const auto resp = flaky.complete(req);
    CHECK(resp.text == "recovered");
    CHECK(resp.attempt_count == 2);
    CHECK(srv.flaky_calls.load() == 2);

    gateway::HttpBackend limited("remote-a", srv.config("/ratelimited"));
    const auto resp2 = limited.complete(req);
    CHECK(resp2.text == "after backoff");
    CHECK(resp2.attempt_count == 2);
}

TEST_CASE("http backend raises credential on 401 without retrying") {
    auto& srv = server();
    gateway::HttpBackend be("remote-a", srv.config("/auth"));
    gateway::PromptRequest req;
    req.prompt = "let me in";
    CHECK(thrown_code([&] { be.complete(req); }) == Errc::credential);
    CHECK(srv.auth_calls.load() == 1);
}

TEST_CASE("http backend raises transport after exhausting retries") {
    auto& srv = server();
    gateway::HttpBackend be("remote-a", srv.config("/always500"));
    gateway::PromptRequest req;
    req.prompt = "doomed";
    CHECK(thrown_code([&] { be.complete(req); }) == Errc::transport);
    CHECK(srv.always500_calls.load() == 3);  // max_attempts
}

TEST_CASE("http backend raises protocol on unusable response bodies") {
    auto& srv = server();
    gateway::PromptRequest req;
    req.prompt = "shape check";

    gateway::HttpBackend empty_choices("remote-a", srv.config("/badshape"));
    CHECK(thrown_code([&] { empty_choices.complete(req); }) == Errc::protocol);

    gateway::HttpBackend no_content("remote-a", srv.config("/badshape2"));
    CHECK(thrown_code([&] { no_content.complete(req); }) == Errc::protocol);

    gateway::HttpBackend not_json("remote-a", srv.config("/notjson"));
    CHECK(thrown_code([&] { not_json.complete(req); }) == Errc::protocol);

    gateway::HttpBackend not_found("remote-a", srv.config("/notfound"));
    CHECK(thrown_code([&] { not_found.complete(req); }) == Errc::protocol);
}

TEST_CASE("http backend requires its key environment variable at construction") {
    auto& srv = server();
    unsetenv("CS_TEST_MISSING_ENV_VAR");
    auto cfg = srv.config("/ok");
    cfg.api_key_env = "CS_TEST_MISSING_ENV_VAR";
    CHECK(thrown_code([&] { gateway::HttpBackend be("remote-a", cfg); }) == Errc::credential);

    setenv("CS_TEST_MISSING_ENV_VAR", "", 1);  // present but empty is still missing
    CHECK(thrown_code([&] { gateway::HttpBackend be("remote-a", cfg); }) == Errc::credential);
    unsetenv("CS_TEST_MISSING_ENV_VAR");
}

TEST_CASE("an explicit Authorization header overrides the env key") {
    auto& srv = server();
    auto cfg = srv.config("/ok");
    cfg.headers["Authorization"] = "Bearer custom-override";
    gateway::HttpBackend be("remote-a", cfg);
    gateway::PromptRequest req;
    req.prompt = "custom auth";
    be.complete(req);
    std::lock_guard lock(srv.capture_mutex);
    CHECK(srv.last_auth == "Bearer custom-override");
}

TEST_CASE("make_backend builds remote clients from the models config") {
    auto& srv = server();
    json models_config = {
        {"remote-a",
         {{"base_url", "http://127.0.0.1:" + std::to_string(srv.port)},
          {"path", "/ok"},
          {"model", "provider-model-a"},
          {"api_key_env", "CS_TEST_API_KEY"},
          {"retry",
           {{"max_attempts", 2}, {"initial_delay_ms", 1.0}, {"multiplier", 1.0}, {"jitter", 0.0}}}}}};
    auto be = gateway::make_backend("remote-a", models_config);
    CHECK(be->name() == "remote-a");
    gateway::PromptRequest req;
    req.prompt = "via factory";
    CHECK(be->complete(req).text == "hello from test");
    {
        std::lock_guard lock(srv.capture_mutex);
        CHECK(json::parse(srv.last_body).at("model") == "provider-model-a");
    }

    // Unknown ids fall back to the default endpoint and its key variable.
    unsetenv("OPENAI_API_KEY");
    CHECK(thrown_code([&] { gateway::make_backend("gpt-test", json::object()); }) ==
          Errc::credential);

    json bad = {{"remote-b", json::array()}};
    setenv("OPENAI_API_KEY", "irrelevant", 1);
    CHECK(thrown_code([&] { gateway::make_backend("remote-b", bad); }) == Errc::parse);
    unsetenv("OPENAI_API_KEY");
}

TEST_CASE("http backend cooperates with an admission gate") {
    auto& srv = server();
    auto gate = std::make_shared<gateway::AdmissionGate>(1);
    gateway::HttpBackend be("remote-a", srv.config("/ok"), gate);
    gateway::PromptRequest req;
    req.prompt = "gated";
    CHECK(be.complete(req).text == "hello from test");
}
