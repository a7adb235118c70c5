#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "annoret/backend.hpp"
#include "annoret/util.hpp"

using namespace annoret;

namespace {

struct EnvVar {
    std::string name;
    EnvVar(const std::string& n, const std::string& value) : name(n) {
        setenv(name.c_str(), value.c_str(), 1);
    }
    ~EnvVar() { unsetenv(name.c_str()); }
};

// Loopback completion endpoint covering the response shapes the client
// accepts, plus the failure modes it must surface.
struct TestServer {
    httplib::Server svr;
    int port = 0;
    std::thread thread;
    nlohmann::json last_body;
    std::string last_auth;

    TestServer() {
        svr.Post("/complete", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = nlohmann::json::parse(req.body);
            last_auth = req.get_header_value("Authorization");
            res.set_content("{\"completion\": \"ok\"}", "application/json");
        });
        svr.Post("/text", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"text\": \"plain\"}", "application/json");
        });
        svr.Post("/chat", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"choices\": [{\"message\": {\"content\": \"chatty\"}}]}",
                            "application/json");
        });
        svr.Post("/legacy", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"choices\": [{\"text\": \"old style\"}]}", "application/json");
        });
        svr.Post("/empty", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"unexpected\": true}", "application/json");
        });
        svr.Post("/notjson", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<html>oops</html>", "text/html");
        });
        svr.Post("/boom", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("backend on fire", "text/plain");
        });
        port = svr.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }
    ~TestServer() {
        svr.stop();
        thread.join();
    }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

}  // namespace

TEST_CASE("backend specs parse into the right implementations") {
    CHECK(make_backend("mock")->name() == "mock:lexical:0");
    CHECK(make_backend("mock:lexical:7")->name() == "mock:lexical:7");
    CHECK(make_backend("mock:lexical-fp20:3")->name() == "mock:lexical-fp20:3");
    CHECK(make_backend("mock:refuse:0")->name() == "mock:refuse:0");

    SUBCASE("bad mock specs") {
        CHECK_THROWS_AS(make_backend("mock:lexical:7:extra"), config_error);
        CHECK_THROWS_AS(make_backend("mock:lexical:notanumber"), config_error);
        CHECK_THROWS_AS(make_backend("mock:telepathy:0"), config_error);
        CHECK_THROWS_AS(make_backend("mock:lexical-fp200:0"), config_error);
        CHECK_THROWS_AS(make_backend("mock:lexical-fpxx:0"), config_error);
    }
    SUBCASE("raw URLs are rejected to keep endpoints out of config files") {
        try {
            make_backend("https://api.example.com/v1/complete");
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(std::string(e.what()).find("ANNOTATOR_API_URL") != std::string::npos);
        }
    }
    SUBCASE("http spec requires the endpoint env var") {
        unsetenv("ANNOTATOR_API_URL");
        try {
            make_backend("http");
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(std::string(e.what()).find("requires ANNOTATOR_API_URL") != std::string::npos);
        }
    }
    SUBCASE("http spec with env vars set") {
        EnvVar url("ANNOTATOR_API_URL", "http://127.0.0.1:9/v1");
        auto b = make_backend("http:big-model");
        CHECK(b->name() == "http:big-model");
        CHECK_FALSE(b->supports_likelihood());
        CHECK(make_backend("http")->name() == "http");
    }
    SUBCASE("unknown spec") {
        CHECK_THROWS_AS(make_backend("grpc://somewhere"), config_error);
    }
}

TEST_CASE("the lexical mock answers each prompt family") {
    MockBackend mock("lexical", 0);

    SUBCASE("selection prompts get bracketed ids by token overlap") {
        std::string prompt =
            "Select the passages that are topically relevant to the question.\n"
            "Question: red fox\n"
            "[1] the red fox\n[2] tax law\n[3] fox only\n";
        CHECK(mock.complete(prompt, 64) == "[1], [3]");
    }
    SUBCASE("utility prompts check answer containment") {
        std::string prompt =
            "Select the passages that are useful for producing the\nreference answer.\n"
            "Question: capital\nReference answer: Paris\n"
            "[1] Paris is lovely\n[2] Berlin is too\n";
        CHECK(mock.complete(prompt, 64) == "[1]");
    }
    SUBCASE("nothing matching yields the none sentinel") {
        std::string prompt =
            "Select the passages that are topically relevant to the question.\n"
            "Question: red fox\n[1] tax law\n";
        CHECK(mock.complete(prompt, 64) == "none");
    }
    SUBCASE("ranking prompts order by answer overlap with stable ties") {
        std::string prompt =
            "Rank all passages from the most useful to the least useful\n"
            "Question: capital\nReference answer: paris france\n"
            "[1] nothing\n[2] paris france here\n[3] paris only\n";
        CHECK(mock.complete(prompt, 64) == "[2] > [3] > [1]");
    }
    SUBCASE("answer prompts return the first sentence of the first passage") {
        std::string prompt =
            "Write a short answer to the question below.\n"
            "Question: capital\n[1] Paris. And more.\n[2] other\n";
        CHECK(mock.complete(prompt, 64) == "Paris.");
    }
    SUBCASE("answer prompt with no passages returns UNKNOWN") {
        std::string prompt = "Write a short answer to the question below.\nQuestion: x\n";
        CHECK(mock.complete(prompt, 64) == "UNKNOWN");
    }
    SUBCASE("refuse policy never cooperates") {
        MockBackend refuse("refuse", 0);
        CHECK(refuse.complete("Select the passages...", 64) ==
              "I cannot determine the answer to this request.");
    }
}

TEST_CASE("mock likelihoods rank answer-bearing passages highest") {
    MockBackend mock("lexical", 0);
    CHECK(mock.supports_likelihood());
    double full = mock.answer_loglikelihood("q", "the answer paris france", "paris france");
    double half = mock.answer_loglikelihood("q", "only paris here", "paris france");
    double none = mock.answer_loglikelihood("q", "nothing relevant", "paris france");
    CHECK(full > half);
    CHECK(half > none);
    CHECK(full == doctest::Approx(0.0));            // log((1+2)/(1+2))
    CHECK(none == doctest::Approx(std::log(1.0 / 3.0)));

    // identical inputs give identical utilities, so targets degrade to uniform
    double a = mock.answer_loglikelihood("q", "same text", "ans");
    double b = mock.answer_loglikelihood("q", "same text", "ans");
    CHECK(a == b);
}

TEST_CASE("false-positive flip rates are monotone in the policy") {
    std::string prompt =
        "Select the passages that are topically relevant to the question.\n"
        "Question: zebra\n";
    for (int i = 1; i <= 40; ++i) prompt += "[" + std::to_string(i) + "] filler " +
                                            std::to_string(i) + "\n";
    auto count_selected = [&](const std::string& policy) {
        MockBackend mock(policy, 5);
        auto out = mock.complete(prompt, 64);
        if (out == "none") return 0;
        return (int)std::count(out.begin(), out.end(), '[');
    };
    int none = count_selected("lexical");
    int some = count_selected("lexical-fp30");
    int all = count_selected("lexical-fp100");
    CHECK(none == 0);
    CHECK(some > 0);
    CHECK(some < 40);
    CHECK(all == 40);
}

TEST_CASE("http backend speaks the completion protocol") {
    TestServer server;

    SUBCASE("request carries model, prompt, token limit and bearer token") {
        HttpBackend backend(server.url("/complete"), "sekret", "tiny-model");
        CHECK(backend.name() == "http:tiny-model");
        CHECK(backend.complete("say ok", 77) == "ok");
        CHECK(server.last_body["model"] == "tiny-model");
        CHECK(server.last_body["prompt"] == "say ok");
        CHECK(server.last_body["max_tokens"] == 77);
        CHECK(server.last_auth == "Bearer sekret");
    }
    SUBCASE("no api key means no auth header") {
        HttpBackend backend(server.url("/complete"), "", "m");
        backend.complete("x", 1);
        CHECK(server.last_auth.empty());
    }
    SUBCASE("alternative response shapes") {
        CHECK(HttpBackend(server.url("/text"), "", "m").complete("x", 1) == "plain");
        CHECK(HttpBackend(server.url("/chat"), "", "m").complete("x", 1) == "chatty");
        CHECK(HttpBackend(server.url("/legacy"), "", "m").complete("x", 1) == "old style");
    }
    SUBCASE("missing completion field") {
        HttpBackend backend(server.url("/empty"), "", "m");
        try {
            backend.complete("x", 1);
            FAIL("expected backend_error");
        } catch (const backend_error& e) {
            CHECK(std::string(e.what()).find("no completion field") != std::string::npos);
        }
    }
    SUBCASE("non-JSON body") {
        HttpBackend backend(server.url("/notjson"), "", "m");
        try {
            backend.complete("x", 1);
            FAIL("expected backend_error");
        } catch (const backend_error& e) {
            CHECK(std::string(e.what()).find("non-JSON body") != std::string::npos);
        }
    }
    SUBCASE("http error status") {
        HttpBackend backend(server.url("/boom"), "", "m");
        try {
            backend.complete("x", 1);
            FAIL("expected backend_error");
        } catch (const backend_error& e) {
            CHECK(std::string(e.what()).find("HTTP 500") != std::string::npos);
            CHECK(std::string(e.what()).find("backend on fire") != std::string::npos);
        }
    }
    SUBCASE("likelihood scoring is a declared capability") {
        HttpBackend backend(server.url("/complete"), "", "m");
        CHECK_FALSE(backend.supports_likelihood());
        CHECK_THROWS_AS(backend.answer_loglikelihood("q", "p", "a"), backend_error);
    }
    SUBCASE("the env-driven factory reaches the same server") {
        EnvVar url("ANNOTATOR_API_URL", server.url("/complete"));
        EnvVar key("ANNOTATOR_API_KEY", "envtoken");
        auto backend = make_backend("http:envmodel");
        CHECK(backend->complete("via env", 5) == "ok");
        CHECK(server.last_body["model"] == "envmodel");
        CHECK(server.last_auth == "Bearer envtoken");
    }
}

TEST_CASE("urls without a scheme are rejected at construction") {
    CHECK_THROWS_AS(HttpBackend("localhost:8080/v1", "", "m"), config_error);
}

TEST_CASE("an unreachable endpoint is a backend error") {
    // Port 1 is reserved and nothing listens there.
    HttpBackend backend("http://127.0.0.1:1/v1", "", "m");
    try {
        backend.complete("x", 1);
        FAIL("expected backend_error");
    } catch (const backend_error& e) {
        CHECK(std::string(e.what()).find("failed") != std::string::npos);
    }
}
