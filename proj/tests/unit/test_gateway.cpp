#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "tempora/error.hpp"
#include "tempora/model_gateway.hpp"
#include "tempora/text.hpp"

#include <doctest.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

using namespace tempora;
using namespace tempora::gateway;
using nlohmann::json;

namespace {

corpus::Document make_doc(std::string body) {
    corpus::Document d;
    d.doc_id = "d";
    d.source_id = "s";
    d.char_len = text::utf8_length(body);
    d.byte_len = body.size();
    d.body = std::move(body);
    return d;
}

Model model_of(std::shared_ptr<Backend> b, std::size_t ctx = 2048) {
    ModelSpec spec;
    spec.name = "m";
    spec.max_context_tokens = ctx;
    return Model(spec, std::move(b));
}

} // namespace

TEST_CASE("segment splits greedily at token boundaries") {
    const std::string text(5000, 'x');
    const auto segs = segment(text, 2048, char_tokenize);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].size() == 2048);
    CHECK(segs[1].size() == 2048);
    CHECK(segs[2].size() == 904);
    CHECK(segment("0123456789", 2048, char_tokenize).size() == 1);
    CHECK_THROWS_AS(segment("", 2048, char_tokenize), Error);
    try {
        segment("", 2048, char_tokenize);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyText);
    }
}

TEST_CASE("segments reproduce the text byte-exactly (property)") {
    std::mt19937 rng(17);
    const std::vector<std::string> pieces{"a", "é", "漢", "😀", " ", "zz"};
    for (int trial = 0; trial < 100; ++trial) {
        std::string t;
        const int n = 1 + static_cast<int>(rng() % 400);
        for (int i = 0; i < n; ++i)
            t += pieces[rng() % pieces.size()];
        const std::size_t max_tokens = 2 + rng() % 50;
        std::string joined;
        for (auto s : segment(t, max_tokens, char_tokenize)) {
            CHECK(text::utf8_length(s) <= max_tokens);
            CHECK(text::utf8_sanitize(s) == std::string(s)); // never splits a scalar value
            joined += s;
        }
        CHECK(joined == t);
    }
}

TEST_CASE("uniform mock scores token count times ln vocab") {
    const auto m = model_of(make_mock_uniform(256));
    const auto s = score_text(m, make_doc(std::string(100, 'a')));
    CHECK(s.total_nll_nats == doctest::Approx(100 * std::log(256.0)).epsilon(1e-15));
    CHECK(s.missing_tokens == 0);
    CHECK(s.char_len == 100);
    CHECK(s.byte_len == 100);

    std::mt19937 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t vocab = 2 + rng() % 60000;
        const std::size_t len = 1 + rng() % 5000;
        const std::size_t ctx = 2 + rng() % 3000;
        const auto mm = model_of(make_mock_uniform(vocab), ctx);
        const auto r = score_text(mm, make_doc(std::string(len, 'q')));
        double expected = 0.0;
        for (std::size_t i = 0; i < len; ++i)
            expected += std::log(static_cast<double>(vocab));
        CHECK(std::abs(r.total_nll_nats - expected) <= 1e-9 * expected);
        for (const auto& seg : r.segments)
            CHECK(seg.tokens.size() <= ctx);
    }
}

TEST_CASE("delta mock scores zero") {
    MockTableConfig c;
    c.default_logprob = 0.0;
    const auto s = score_text(model_of(make_mock_table(c)), make_doc("any text at all, with ünïcode"));
    CHECK(s.total_nll_nats == 0.0);
}

TEST_CASE("omitted first-token logprobs are counted per segment") {
    const auto m = model_of(make_mock_uniform(256, char_tokenize, true), 2048);
    const auto s = score_text(m, make_doc(std::string(3000, 'a')));
    REQUIRE(s.segments.size() == 2);
    CHECK(s.missing_tokens == 2);
    CHECK(s.total_nll_nats == doctest::Approx(2998 * std::log(256.0)));
    CHECK(s.segments[0].tokens[0].missing);
    CHECK(s.segments[1].tokens[0].missing);
    CHECK(s.char_len == 3000);
}

TEST_CASE("rescoring is deterministic and concurrent scoring preserves order") {
    MockTableConfig c;
    c.token_logprobs = {{"a", -0.5}, {"b", -1.5}};
    c.default_logprob = -3.0;
    const auto m = model_of(make_mock_table(c), 7);
    std::vector<corpus::Document> docs;
    for (int i = 0; i < 40; ++i) {
        auto d = make_doc(std::string(static_cast<std::size_t>(10 + i), i % 2 ? 'a' : 'b') + "xyz");
        d.doc_id = std::to_string(i);
        docs.push_back(d);
    }
    const auto one = score_documents(m, docs, 1);
    const auto many = score_documents(m, docs, 8);
    REQUIRE(one.size() == many.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].doc_id == docs[i].doc_id);
        CHECK(many[i].doc_id == docs[i].doc_id);
        CHECK(one[i].total_nll_nats == many[i].total_nll_nats);
    }
}

TEST_CASE("mock table completions") {
    MockTableConfig c;
    c.responses = {{"exact prompt", "Answer: B"}, {"needle", "C"}};
    const auto m = model_of(make_mock_table(c));
    CHECK(complete(m, "exact prompt") == "Answer: B");
    CHECK(complete(m, "hay needle hay") == "C");
    CHECK(complete(m, "nothing") == "");
}

TEST_CASE("unigram table is add-one smoothed") {
    const auto t = unigram_table({"aab"}, {"a", "b", "c"});
    CHECK(t.token_logprobs.at("a") == doctest::Approx(std::log(3.0 / 6.0)));
    CHECK(t.token_logprobs.at("b") == doctest::Approx(std::log(2.0 / 6.0)));
    CHECK(t.token_logprobs.at("c") == doctest::Approx(std::log(1.0 / 6.0)));
}

TEST_CASE("echo logprob parsing") {
    const json res = {{"choices",
                       {{{"text", "héllo"},
                         {"logprobs",
                          {{"tokens", {"h", "él", "lo"}},
                           {"token_logprobs", {nullptr, -1.0, -2.0}},
                           {"text_offset", {0, 1, 3}}}}}}}};
    const auto toks = parse_echo_logprobs(res, "héllo");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].missing);
    CHECK(toks[1].byte_begin == 1);
    CHECK(toks[1].byte_end == 4);
    CHECK(toks[2].byte_end == 6);

    // Byte-level token strings that do not concatenate: falls back to offsets.
    const json res2 = {{"choices",
                        {{{"text", "héllo"},
                          {"logprobs",
                           {{"tokens", {"h", "bytes:\\xc3", "llo"}},
                            {"token_logprobs", {nullptr, -1.0, -2.0}},
                            {"text_offset", {0, 1, 2}}}}}}}};
    const auto toks2 = parse_echo_logprobs(res2, "héllo");
    REQUIRE(toks2.size() == 3);
    CHECK(toks2[1].token_text == "é");
    CHECK(toks2[2].byte_begin == 3);

    const json bad = {{"choices", {{{"logprobs", {{"tokens", {"x"}}, {"token_logprobs", {-1.0, -2.0}}}}}}}};
    try {
        parse_echo_logprobs(bad, "x");
        FAIL("expected ProtocolMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ProtocolMismatch);
    }
}

TEST_CASE("missing credentials raise AuthMissing") {
    ModelSpec spec;
    spec.name = "remote";
    spec.backend_kind = BackendKind::logprob_http;
    spec.endpoint = "http://127.0.0.1:9/v1/completions";
    spec.auth_ref = "TEMPORA_TEST_UNSET_KEY";
    ::unsetenv("TEMPORA_TEST_UNSET_KEY");
    try {
        make_backend(spec, json::object());
        FAIL("expected AuthMissing");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::AuthMissing);
    }
}

TEST_CASE("unreachable endpoint raises a transport error naming it") {
    ModelSpec spec;
    spec.name = "remote";
    spec.backend_kind = BackendKind::chat_http;
    spec.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    const Model m(spec, make_backend(spec, json::object()));
    try {
        complete(m, "hello");
        FAIL("expected Transport");
    } catch (const TransportError& e) {
        CHECK(e.code() == Errc::Transport);
        CHECK(std::string(e.what()).find(spec.endpoint) != std::string::npos);
    }
}

namespace {

// A local completions endpoint: one token per character, uniform over 256,
// no first-token logprob, and HTTP 400 for prompts over `limit` characters.
struct EchoServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> rejected{0};
    std::string last_auth;

    explicit EchoServer(std::size_t limit) {
        server.Post("/v1/completions", [this, limit](const httplib::Request& req, httplib::Response& res) {
            last_auth = req.get_header_value("Authorization");
            const auto body = json::parse(req.body);
            const std::string prompt = body.at("prompt");
            if (text::utf8_length(prompt) > limit) {
                ++rejected;
                res.status = 400;
                res.set_content(R"({"error":"context too long"})", "application/json");
                return;
            }
            json tokens = json::array(), lps = json::array(), offs = json::array();
            std::size_t prev = 0, idx = 0;
            for (auto end : text::utf8_boundaries(prompt)) {
                tokens.push_back(prompt.substr(prev, end - prev));
                lps.push_back(idx == 0 ? json(nullptr) : json(-std::log(256.0)));
                offs.push_back(idx);
                prev = end;
                ++idx;
            }
            const json out = {{"choices",
                               {{{"text", prompt},
                                 {"logprobs",
                                  {{"tokens", tokens}, {"token_logprobs", lps}, {"text_offset", offs}}}}}}};
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"The answer is C."}}]})",
                            "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~EchoServer() {
        server.stop();
        thread.join();
    }
};

} // namespace

TEST_CASE("logprob_http scores through windows and shrinks on HTTP 400") {
    EchoServer srv(300);
    ::setenv("TEMPORA_TEST_KEY", "secret", 1);
    ModelSpec spec;
    spec.name = "remote";
    spec.backend_kind = BackendKind::logprob_http;
    spec.endpoint = fmt::format("http://127.0.0.1:{}/v1/completions", srv.port);
    spec.auth_ref = "TEMPORA_TEST_KEY";
    spec.max_context_tokens = 100;
    const Model m(spec, make_backend(spec, json::object()));

    std::string body;
    for (int i = 0; i < 500; ++i)
        body += i % 3 ? "a" : "é";
    const auto s = score_text(m, make_doc(body));
    CHECK(srv.rejected > 0);
    CHECK(srv.last_auth == "Bearer secret");
    CHECK(s.segments.size() == 5);
    CHECK(s.missing_tokens == 5);
    CHECK(s.total_nll_nats == doctest::Approx(495 * std::log(256.0)));
    std::string joined;
    for (const auto& seg : s.segments) {
        CHECK(seg.tokens.size() <= 100);
        for (const auto& t : seg.tokens)
            joined += t.token_text;
    }
    CHECK(joined == body);
}

TEST_CASE("chat_http returns the message text verbatim") {
    EchoServer srv(1000);
    ModelSpec spec;
    spec.name = "chat";
    spec.backend_kind = BackendKind::chat_http;
    spec.endpoint = fmt::format("http://127.0.0.1:{}/v1/chat/completions", srv.port);
    const Model m(spec, make_backend(spec, json::object()));
    CHECK(complete(m, "question") == "The answer is C.");
    CHECK_THROWS_AS(score_text(m, make_doc("abc")), Error);
}
