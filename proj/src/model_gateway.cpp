#include "tempora/model_gateway.hpp"

#include "tempora/error.hpp"
#include "tempora/http.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

namespace tempora::gateway {

using nlohmann::json;

std::string_view to_string(BackendKind k) noexcept {
    switch (k) {
    case BackendKind::logprob_http: return "logprob_http";
    case BackendKind::chat_http: return "chat_http";
    case BackendKind::mock_uniform: return "mock_uniform";
    case BackendKind::mock_table: return "mock_table";
    }
    return "mock_uniform";
}

BackendKind backend_kind_from_string(std::string_view s) {
    for (auto k : {BackendKind::logprob_http, BackendKind::chat_http, BackendKind::mock_uniform,
                   BackendKind::mock_table})
        if (to_string(k) == s)
            return k;
    throw Error(Errc::Config, fmt::format("unknown backend kind '{}'", s));
}

std::vector<std::size_t> char_tokenize(std::string_view text) {
    return text::utf8_boundaries(text);
}

std::vector<std::string_view> segment(std::string_view text, std::size_t max_tokens, const TokenizeFn& tokenize) {
    if (text.empty())
        throw Error(Errc::EmptyText, "cannot segment empty text");
    if (max_tokens < 2)
        throw Error(Errc::InvalidArgument, "max_tokens must be >= 2");
    const auto ends = tokenize(text);
    if (ends.empty() || ends.back() != text.size())
        throw Error(Errc::ProtocolMismatch, "tokenizer boundaries do not cover the text");
    std::vector<std::string_view> out;
    std::size_t begin = 0;
    for (std::size_t i = max_tokens - 1; i < ends.size(); i += max_tokens) {
        out.push_back(text.substr(begin, ends[i] - begin));
        begin = ends[i];
    }
    if (begin < text.size())
        out.push_back(text.substr(begin));
    return out;
}

namespace {

std::vector<TokenScore> spans_from_boundaries(std::string_view seg, const std::vector<std::size_t>& ends) {
    std::vector<TokenScore> tokens;
    tokens.reserve(ends.size());
    std::size_t begin = 0;
    for (auto end : ends) {
        TokenScore t;
        t.byte_begin = begin;
        t.byte_end = end;
        t.token_text = std::string(seg.substr(begin, end - begin));
        tokens.push_back(std::move(t));
        begin = end;
    }
    return tokens;
}

class MockUniform final : public Backend {
public:
    MockUniform(std::size_t vocab, TokenizeFn tokenize, bool omit_first)
        : logprob_(-std::log(static_cast<double>(vocab))), tokenize_(std::move(tokenize)), omit_first_(omit_first) {
        if (vocab < 1)
            throw Error(Errc::Config, "mock_uniform vocab must be >= 1");
    }

    bool supports_scoring() const override { return true; }
    bool supports_completion() const override { return false; }
    std::optional<TokenizeFn> tokenizer() const override { return tokenize_; }

    std::vector<TokenScore> score_segment(std::string_view seg) override {
        auto tokens = spans_from_boundaries(seg, tokenize_(seg));
        for (auto& t : tokens)
            t.logprob_nats = logprob_;
        if (omit_first_ && !tokens.empty())
            tokens.front().missing = true;
        return tokens;
    }

    std::string complete(std::string_view, const CompletionParams&) override {
        throw Error(Errc::Unsupported, "mock_uniform does not support completion");
    }

private:
    double logprob_;
    TokenizeFn tokenize_;
    bool omit_first_;
};

class MockTable final : public Backend {
public:
    MockTable(MockTableConfig config, TokenizeFn tokenize) : config_(std::move(config)), tokenize_(std::move(tokenize)) {
        for (const auto& [tok, lp] : config_.token_logprobs)
            if (!(lp <= 0.0))
                throw Error(Errc::Config, "mock_table logprob for '" + tok + "' must be <= 0");
        if (!(config_.default_logprob <= 0.0))
            throw Error(Errc::Config, "mock_table default_logprob must be <= 0");
    }

    bool supports_scoring() const override { return true; }
    bool supports_completion() const override { return true; }
    std::optional<TokenizeFn> tokenizer() const override { return tokenize_; }

    std::vector<TokenScore> score_segment(std::string_view seg) override {
        auto tokens = spans_from_boundaries(seg, tokenize_(seg));
        for (auto& t : tokens) {
            const auto it = config_.token_logprobs.find(t.token_text);
            t.logprob_nats = it == config_.token_logprobs.end() ? config_.default_logprob : it->second;
        }
        if (config_.omit_first_token && !tokens.empty())
            tokens.front().missing = true;
        return tokens;
    }

    std::string complete(std::string_view prompt, const CompletionParams&) override {
        if (const auto it = config_.responses.find(std::string(prompt)); it != config_.responses.end())
            return it->second;
        for (const auto& [key, response] : config_.responses)
            if (!key.empty() && prompt.find(key) != std::string_view::npos)
                return response;
        return config_.default_response;
    }

private:
    MockTableConfig config_;
    TokenizeFn tokenize_;
};

std::vector<http::Headers::value_type> auth_headers(const ModelSpec& spec) {
    http::Headers headers;
    if (spec.auth_ref.empty())
        return headers;
    const char* value = std::getenv(spec.auth_ref.c_str());
    if (!value || !*value)
        throw Error(Errc::AuthMissing,
                    fmt::format("model '{}': environment variable {} is not set", spec.name, spec.auth_ref));
    headers.emplace_back("Authorization", std::string("Bearer ") + value);
    return headers;
}

json post(const std::string& endpoint, const json& body, const http::Headers& headers) {
    const auto res = http::post_json(endpoint, body.dump(), headers);
    if (res.status < 200 || res.status >= 300)
        throw TransportError(endpoint, res.status, res.body.substr(0, 200));
    try {
        return json::parse(res.body);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ProtocolMismatch, endpoint + ": response is not JSON: " + e.what());
    }
}

class LogprobHttp final : public Backend {
public:
    explicit LogprobHttp(const ModelSpec& spec) : spec_(spec), headers_(auth_headers(spec)) {}

    bool supports_scoring() const override { return true; }
    bool supports_completion() const override { return true; }

    std::vector<TokenScore> score_segment(std::string_view seg) override {
        const json body{{"model", spec_.name}, {"prompt", seg},      {"max_tokens", 0},
                        {"echo", true},         {"logprobs", true}, {"temperature", 0}};
        return parse_echo_logprobs(post(spec_.endpoint, body, headers_), seg);
    }

    std::string complete(std::string_view prompt, const CompletionParams& params) override {
        const json body{{"model", spec_.name},
                        {"prompt", prompt},
                        {"max_tokens", params.max_tokens},
                        {"temperature", params.temperature}};
        const auto res = post(spec_.endpoint, body, headers_);
        try {
            const auto& choice = res.at("choices").at(0);
            return choice.contains("text") && choice["text"].is_string() ? choice["text"].get<std::string>() : "";
        } catch (const json::exception& e) {
            throw Error(Errc::ProtocolMismatch, spec_.endpoint + ": " + e.what());
        }
    }

private:
    ModelSpec spec_;
    http::Headers headers_;
};

class ChatHttp final : public Backend {
public:
    explicit ChatHttp(const ModelSpec& spec) : spec_(spec), headers_(auth_headers(spec)) {}

    bool supports_scoring() const override { return false; }
    bool supports_completion() const override { return true; }

    std::vector<TokenScore> score_segment(std::string_view) override {
        throw Error(Errc::Unsupported, "chat_http backend '" + spec_.name + "' cannot score token logprobs");
    }

    std::string complete(std::string_view prompt, const CompletionParams& params) override {
        const json body{{"model", spec_.name},
                        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_tokens}};
        const auto res = post(spec_.endpoint, body, headers_);
        try {
            const auto& message = res.at("choices").at(0).at("message");
            const auto it = message.find("content");
            return it != message.end() && it->is_string() ? it->get<std::string>() : "";
        } catch (const json::exception& e) {
            throw Error(Errc::ProtocolMismatch, spec_.endpoint + ": " + e.what());
        }
    }

private:
    ModelSpec spec_;
    http::Headers headers_;
};

// Segments text for backends without a local tokenizer: each window is echo
// scored, then cut back to max_tokens tokens (or to its last complete token when
// the window stopped mid-text). Windows rejected by the server shrink by half.
std::vector<ScoredSegment> score_by_windows(Backend& backend, InFlightGate& gate, std::string_view body,
                                            std::size_t max_tokens) {
    std::vector<ScoredSegment> out;
    std::size_t budget_chars = max_tokens * 4;
    std::size_t pos = 0;
    while (pos < body.size()) {
        const std::string_view rest = body.substr(pos);
        const std::string_view window = text::utf8_prefix(rest, budget_chars);
        std::vector<TokenScore> tokens;
        try {
            gate.acquire();
            tokens = backend.score_segment(window);
            gate.release();
        } catch (const TransportError& e) {
            gate.release();
            if (e.status() == 400 && budget_chars > 1) {
                budget_chars /= 2;
                continue;
            }
            throw;
        } catch (...) {
            gate.release();
            throw;
        }
        if (tokens.empty())
            throw Error(Errc::ProtocolMismatch, "backend returned no tokens for a nonempty segment");
        std::size_t keep = tokens.size();
        if (keep > max_tokens)
            keep = max_tokens;
        else if (window.size() < rest.size() && keep > 1)
            --keep; // the final token may have been cut by the window edge
        tokens.resize(keep);
        const std::size_t consumed = tokens.back().byte_end;
        if (consumed == 0)
            throw Error(Errc::ProtocolMismatch, "backend tokens make no progress through the text");
        out.push_back(ScoredSegment{std::move(tokens)});
        pos += consumed;
    }
    return out;
}

void check_segment(const std::vector<TokenScore>& tokens, std::string_view seg, std::size_t max_tokens) {
    if (tokens.size() > max_tokens)
        throw Error(Errc::ProtocolMismatch,
                    fmt::format("segment scored as {} tokens, context is {}", tokens.size(), max_tokens));
    std::size_t expect = 0;
    for (const auto& t : tokens) {
        if (t.byte_begin != expect || t.byte_end < t.byte_begin)
            throw Error(Errc::ProtocolMismatch, "token spans are not contiguous");
        expect = t.byte_end;
    }
    if (expect != seg.size())
        throw Error(Errc::ProtocolMismatch, "token spans do not cover the segment");
}

} // namespace

std::shared_ptr<Backend> make_mock_uniform(std::size_t vocab, TokenizeFn tokenize, bool omit_first_token) {
    return std::make_shared<MockUniform>(vocab, std::move(tokenize), omit_first_token);
}

std::shared_ptr<Backend> make_mock_table(MockTableConfig config, TokenizeFn tokenize) {
    return std::make_shared<MockTable>(std::move(config), std::move(tokenize));
}

MockTableConfig unigram_table(const std::vector<std::string_view>& texts, const std::vector<std::string>& alphabet) {
    std::map<std::string, std::size_t> counts;
    for (const auto& a : alphabet)
        counts[a] = 0;
    std::size_t total = 0;
    for (auto t : texts) {
        std::size_t begin = 0;
        for (auto end : text::utf8_boundaries(t)) {
            auto it = counts.find(std::string(t.substr(begin, end - begin)));
            if (it != counts.end()) {
                ++it->second;
                ++total;
            }
            begin = end;
        }
    }
    MockTableConfig config;
    const double denom = static_cast<double>(total + counts.size());
    for (const auto& [tok, n] : counts)
        config.token_logprobs[tok] = std::log(static_cast<double>(n + 1) / denom);
    config.default_logprob = std::log(1.0 / denom);
    return config;
}

std::shared_ptr<Backend> make_logprob_http(const ModelSpec& spec) {
    return std::make_shared<LogprobHttp>(spec);
}

std::shared_ptr<Backend> make_chat_http(const ModelSpec& spec) {
    return std::make_shared<ChatHttp>(spec);
}

std::shared_ptr<Backend> make_backend(const ModelSpec& spec, const json& mock) {
    switch (spec.backend_kind) {
    case BackendKind::logprob_http: return make_logprob_http(spec);
    case BackendKind::chat_http: return make_chat_http(spec);
    case BackendKind::mock_uniform:
        return make_mock_uniform(mock.is_object() ? mock.value("vocab", std::size_t{256}) : 256, char_tokenize,
                                 mock.is_object() && mock.value("omit_first_token", false));
    case BackendKind::mock_table: {
        MockTableConfig c;
        if (mock.is_object()) {
            if (mock.contains("token_logprobs"))
                c.token_logprobs = mock["token_logprobs"].get<std::map<std::string, double>>();
            c.default_logprob = mock.value("default_logprob", 0.0);
            if (mock.contains("responses"))
                c.responses = mock["responses"].get<std::map<std::string, std::string>>();
            c.default_response = mock.value("default_response", "");
            c.omit_first_token = mock.value("omit_first_token", false);
        }
        return make_mock_table(std::move(c));
    }
    }
    throw Error(Errc::Config, "unknown backend kind");
}

std::vector<TokenScore> parse_echo_logprobs(const json& response, std::string_view seg) {
    std::vector<std::string> tokens;
    std::vector<std::optional<double>> logprobs;
    std::vector<long long> offsets;
    std::string echoed;
    try {
        const auto& choice = response.at("choices").at(0);
        if (choice.contains("text") && choice["text"].is_string())
            echoed = choice["text"].get<std::string>();
        const auto& lp = choice.at("logprobs");
        tokens = lp.at("tokens").get<std::vector<std::string>>();
        for (const auto& v : lp.at("token_logprobs"))
            logprobs.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
        if (lp.contains("text_offset") && lp["text_offset"].is_array())
            offsets = lp["text_offset"].get<std::vector<long long>>();
    } catch (const json::exception& e) {
        throw Error(Errc::ProtocolMismatch, std::string("malformed echo response: ") + e.what());
    }
    if (tokens.size() != logprobs.size())
        throw Error(Errc::ProtocolMismatch, fmt::format("{} tokens but {} logprobs", tokens.size(), logprobs.size()));
    if (!echoed.empty() && echoed.compare(0, seg.size(), seg) != 0)
        throw Error(Errc::ProtocolMismatch, "echoed text does not match the submitted segment");

    std::vector<TokenScore> out;
    // Preferred: token texts concatenate to the segment (trailing generated tokens dropped).
    std::size_t pos = 0;
    bool by_text = true;
    for (std::size_t i = 0; i < tokens.size() && pos < seg.size(); ++i) {
        if (seg.compare(pos, tokens[i].size(), tokens[i]) != 0) {
            by_text = false;
            break;
        }
        TokenScore t;
        t.token_text = tokens[i];
        t.byte_begin = pos;
        pos += tokens[i].size();
        t.byte_end = pos;
        t.missing = !logprobs[i].has_value();
        t.logprob_nats = logprobs[i].value_or(0.0);
        out.push_back(std::move(t));
    }
    if (!by_text || pos != seg.size()) {
        // Fallback: character offsets into the echoed text.
        if (offsets.size() != tokens.size())
            throw Error(Errc::ProtocolMismatch, "token texts do not reproduce the segment and no offsets are given");
        out.clear();
        const std::size_t seg_chars = text::utf8_length(seg);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (offsets[i] < 0 || static_cast<std::size_t>(offsets[i]) >= seg_chars)
                break;
            if (i > 0 && offsets[i] < offsets[i - 1])
                throw Error(Errc::ProtocolMismatch, "token offsets are not ordered");
            const std::size_t next_chars =
                i + 1 < offsets.size() && offsets[i + 1] >= 0 && static_cast<std::size_t>(offsets[i + 1]) < seg_chars
                    ? static_cast<std::size_t>(offsets[i + 1])
                    : seg_chars;
            TokenScore t;
            t.byte_begin = text::utf8_byte_offset(seg, static_cast<std::size_t>(offsets[i]));
            t.byte_end = text::utf8_byte_offset(seg, next_chars);
            t.token_text = std::string(seg.substr(t.byte_begin, t.byte_end - t.byte_begin));
            t.missing = !logprobs[i].has_value();
            t.logprob_nats = logprobs[i].value_or(0.0);
            out.push_back(std::move(t));
        }
        if (out.empty() || out.front().byte_begin != 0 || out.back().byte_end != seg.size())
            throw Error(Errc::ProtocolMismatch, "token offsets do not cover the segment");
    }
    for (auto& t : out) {
        if (t.missing)
            continue;
        if (!std::isfinite(t.logprob_nats) || t.logprob_nats > 1e-9)
            throw Error(Errc::ProtocolMismatch, fmt::format("invalid logprob {}", t.logprob_nats));
        t.logprob_nats = std::min(t.logprob_nats, 0.0);
    }
    return out;
}

ScoredText score_text(const Model& model, const corpus::Document& doc) {
    auto& backend = model.backend();
    if (!backend.supports_scoring())
        throw Error(Errc::Unsupported, "model '" + model.spec().name + "' does not support logprob scoring");
    if (doc.body.empty())
        throw Error(Errc::EmptyText, "document " + doc.doc_id + " has an empty body");

    ScoredText out;
    out.doc_id = doc.doc_id;
    out.model_name = model.spec().name;
    out.char_len = doc.char_len;
    out.byte_len = doc.byte_len;

    const std::size_t max_tokens = model.spec().max_context_tokens;
    if (auto tok = backend.tokenizer()) {
        for (auto seg : segment(doc.body, max_tokens, *tok)) {
            model.gate().acquire();
            std::vector<TokenScore> tokens;
            try {
                tokens = backend.score_segment(seg);
            } catch (...) {
                model.gate().release();
                throw;
            }
            model.gate().release();
            check_segment(tokens, seg, max_tokens);
            out.segments.push_back(ScoredSegment{std::move(tokens)});
        }
    } else {
        out.segments = score_by_windows(backend, model.gate(), doc.body, max_tokens);
    }

    for (const auto& s : out.segments)
        for (const auto& t : s.tokens) {
            if (t.missing)
                ++out.missing_tokens;
            else
                out.total_nll_nats += -t.logprob_nats;
        }
    return out;
}

std::string complete(const Model& model, std::string_view prompt, const CompletionParams& params) {
    auto& backend = model.backend();
    if (!backend.supports_completion())
        throw Error(Errc::Unsupported, "model '" + model.spec().name + "' does not support completion");
    model.gate().acquire();
    try {
        auto out = backend.complete(prompt, params);
        model.gate().release();
        return out;
    } catch (...) {
        model.gate().release();
        throw;
    }
}

std::vector<ScoredText> score_documents(const Model& model, const std::vector<corpus::Document>& docs,
                                        std::size_t workers) {
    std::vector<ScoredText> results(docs.size());
    std::vector<std::exception_ptr> errors(docs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < docs.size(); i = next++) {
            try {
                results[i] = score_text(model, docs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, docs.size()));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return results;
}

} // namespace tempora::gateway
