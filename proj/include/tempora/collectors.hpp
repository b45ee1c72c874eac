#pragma once

#include "tempora/corpus.hpp"
#include "tempora/dates.hpp"
#include "tempora/error.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::collectors {

enum class SourceKind { rss, http_list, arxiv_api, wiki_recent, file_import };

std::string_view to_string(SourceKind k) noexcept;
SourceKind source_kind_from_string(std::string_view s);

struct SourceSpec {
    std::string source_id;
    SourceKind kind = SourceKind::rss;
    std::string endpoint; // URL, or a file path for file_import
    corpus::Category category = corpus::Category::other;
    double max_requests_per_sec = 1.0;
    std::optional<std::string> extraction; // http_list link rule: a, a[href^=..], a[href*=..], a[href$=..]
};

// Config error when the rate is not positive or the endpoint does not suit the kind.
void validate(const SourceSpec& s);

using Clock = std::chrono::system_clock;

struct FetchRecord {
    std::string url;
    Clock::time_point fetched_at;
    std::string raw;
    std::optional<Date> declared_date; // never later than fetched_at's date
    std::optional<std::string> title;
};

struct FetchError {
    Errc code = Errc::Transport; // Transport, Parse or RobotsDisallowed
    std::string url;
    int status = 0;
    std::string detail;
};

struct FetchResult {
    std::vector<FetchRecord> records;
    std::vector<FetchError> errors;
};

struct TransportResponse {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    // Throws TransportError when no response was received.
    virtual TransportResponse get(const std::string& url) = 0;
    virtual Clock::time_point now() = 0;
};

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::string user_agent = "tempora/0.1");
    TransportResponse get(const std::string& url) override;
    Clock::time_point now() override { return Clock::now(); }

private:
    std::string user_agent_;
};

// Recorded responses keyed by URL. `dir/index.json`:
//   {"fetched_at": "2024-06-01T12:00:00Z",
//    "responses": {"<url>": {"file": "<path relative to dir>", "status": 200}}}
// Unknown URLs answer 404 with an empty body.
class FixtureTransport final : public Transport {
public:
    explicit FixtureTransport(const std::filesystem::path& dir);
    TransportResponse get(const std::string& url) override;
    Clock::time_point now() override { return fetched_at_; }

private:
    std::map<std::string, TransportResponse> responses_;
    Clock::time_point fetched_at_;
};

// TEMPORA_OFFLINE=1 (or offline=true) selects the fixture transport at `fixtures`.
std::unique_ptr<Transport> make_transport(bool offline, const std::optional<std::filesystem::path>& fixtures);
bool offline_from_env();

// Spaces acquisitions at least 1/rate apart; safe for concurrent callers.
class RateLimiter {
public:
    using SteadyClock = std::chrono::steady_clock;
    using ClockFn = std::function<SteadyClock::time_point()>;
    using SleepFn = std::function<void(SteadyClock::duration)>;

    explicit RateLimiter(double max_per_sec, ClockFn clock = {}, SleepFn sleep = {});
    void acquire();

private:
    SteadyClock::duration interval_;
    ClockFn clock_;
    SleepFn sleep_;
    std::mutex mu_;
    std::optional<SteadyClock::time_point> next_;
};

// robots.txt rules for one host, applied to user-agent "*" (or a group naming
// `agent`); the longest matching rule wins, Allow on ties.
class RobotsRules {
public:
    static RobotsRules parse(std::string_view robots_txt, std::string_view agent = "tempora");
    static RobotsRules allow_all() { return {}; }
    bool allowed(std::string_view path) const;

private:
    struct Rule {
        bool allow;
        std::string pattern;
    };
    std::vector<Rule> rules_;
};

// Fetches up to `limit` records with declared_date >= since (when dated).
// Failures are collected in `errors` with whatever records were obtained.
FetchResult fetch(const SourceSpec& source, Transport& transport, std::optional<Date> since, std::size_t limit,
                  RateLimiter* limiter = nullptr);

// Fetches several sources concurrently with at most `workers` in flight.
std::map<std::string, FetchResult> fetch_all(const std::vector<SourceSpec>& sources, Transport& transport,
                                             std::optional<Date> since, std::size_t limit, std::size_t workers);

struct DocumentBatch {
    std::vector<corpus::Document> documents;
    std::size_t rejected = 0;
};

DocumentBatch to_documents(const std::vector<FetchRecord>& records, const SourceSpec& source);

// Helpers exposed for tests.
std::vector<FetchRecord> parse_feed(std::string_view xml, const std::string& url, Clock::time_point fetched_at);
std::vector<std::string> extract_links(std::string_view html, const std::string& base_url,
                                       const std::optional<std::string>& rule);

} // namespace tempora::collectors
