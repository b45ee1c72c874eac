#pragma once

#include "tempora/corpus.hpp"
#include "tempora/dates.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::gateway {

enum class BackendKind { logprob_http, chat_http, mock_uniform, mock_table };

std::string_view to_string(BackendKind k) noexcept;
BackendKind backend_kind_from_string(std::string_view s);

struct ModelSpec {
    std::string name;
    std::optional<Date> release_date;
    std::optional<double> size_params;
    BackendKind backend_kind = BackendKind::mock_uniform;
    std::string endpoint;
    std::string auth_ref; // name of the environment variable holding the credential
    std::size_t max_context_tokens = 2048;
    std::size_t max_in_flight = 4;
};

struct TokenScore {
    std::string token_text;
    double logprob_nats = 0.0;
    std::size_t byte_begin = 0; // into the segment's UTF-8 bytes
    std::size_t byte_end = 0;
    bool missing = false;
};

struct ScoredSegment {
    std::vector<TokenScore> tokens;
};

struct ScoredText {
    std::string doc_id;
    std::string model_name;
    std::vector<ScoredSegment> segments;
    double total_nll_nats = 0.0;
    std::size_t missing_tokens = 0;
    std::size_t char_len = 0;
    std::size_t byte_len = 0;
};

// Returns the end byte offset of every token in `text`, in order; the last is text.size().
using TokenizeFn = std::function<std::vector<std::size_t>(std::string_view)>;

// Default mock tokenizer: one token per Unicode scalar value.
std::vector<std::size_t> char_tokenize(std::string_view text);

// Greedy left-to-right split at token boundaries, at most max_tokens tokens each.
// The segments concatenate back to `text` exactly.
std::vector<std::string_view> segment(std::string_view text, std::size_t max_tokens, const TokenizeFn& tokenize);

struct CompletionParams {
    std::size_t max_tokens = 64;
    double temperature = 0.0;
};

// A model backend. Implementations must be safe to call from several threads.
class Backend {
public:
    virtual ~Backend() = default;

    virtual bool supports_scoring() const = 0;
    virtual bool supports_completion() const = 0;

    // Local tokenizer, when the backend has one. Without it, score_text segments
    // through the backend's own echo spans.
    virtual std::optional<TokenizeFn> tokenizer() const { return std::nullopt; }

    // Echo-style scoring of one segment, scored without any preceding context.
    virtual std::vector<TokenScore> score_segment(std::string_view segment) = 0;

    virtual std::string complete(std::string_view prompt, const CompletionParams& params) = 0;
};

// Counting gate bounding concurrent calls into one backend.
class InFlightGate {
public:
    explicit InFlightGate(std::size_t cap) : sem_(static_cast<std::ptrdiff_t>(cap == 0 ? 1 : cap)) {}
    void acquire() { sem_.acquire(); }
    void release() { sem_.release(); }

private:
    std::counting_semaphore<1 << 16> sem_;
};

struct MockTableConfig {
    std::map<std::string, double> token_logprobs; // token text -> logprob in nats
    double default_logprob = 0.0;                  // for tokens not in the table
    // Completion lookup: an exact prompt match wins, otherwise the first key (in
    // key order) that occurs inside the prompt.
    std::map<std::string, std::string> responses;
    std::string default_response;
    bool omit_first_token = false;
};

std::shared_ptr<Backend> make_mock_uniform(std::size_t vocab, TokenizeFn tokenize = char_tokenize,
                                           bool omit_first_token = false);
std::shared_ptr<Backend> make_mock_table(MockTableConfig config, TokenizeFn tokenize = char_tokenize);

// Add-one smoothed unigram table over char tokens, trained on `texts`;
// `alphabet` lists every token that receives mass.
MockTableConfig unigram_table(const std::vector<std::string_view>& texts, const std::vector<std::string>& alphabet);

// HTTP backends; credentials are read from the environment at construction.
std::shared_ptr<Backend> make_logprob_http(const ModelSpec& spec);
std::shared_ptr<Backend> make_chat_http(const ModelSpec& spec);

// Builds the backend described by spec; `mock` carries the mock configuration
// ({"vocab": n} for mock_uniform, MockTableConfig fields for mock_table).
std::shared_ptr<Backend> make_backend(const ModelSpec& spec, const nlohmann::json& mock);

// A model under test: its spec plus the backend handle and concurrency cap.
class Model {
public:
    Model(ModelSpec spec, std::shared_ptr<Backend> backend)
        : spec_(std::move(spec)), backend_(std::move(backend)), gate_(spec_.max_in_flight) {}

    const ModelSpec& spec() const noexcept { return spec_; }
    Backend& backend() const noexcept { return *backend_; }
    InFlightGate& gate() const noexcept { return gate_; }

private:
    ModelSpec spec_;
    std::shared_ptr<Backend> backend_;
    mutable InFlightGate gate_;
};

ScoredText score_text(const Model& model, const corpus::Document& doc);
std::string complete(const Model& model, std::string_view prompt, const CompletionParams& params = {});

// Scores every document, running up to `workers` documents concurrently; results
// are returned in input order.
std::vector<ScoredText> score_documents(const Model& model, const std::vector<corpus::Document>& docs,
                                        std::size_t workers);

// Parses an OpenAI-style completions response with echo logprobs for `segment`.
std::vector<TokenScore> parse_echo_logprobs(const nlohmann::json& response, std::string_view segment);

} // namespace tempora::gateway
