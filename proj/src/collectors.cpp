#include "tempora/collectors.hpp"

#include "tempora/http.hpp"
#include "tempora/io.hpp"
#include "tempora/text.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace tempora::collectors {

using nlohmann::json;
namespace pt = boost::property_tree;

std::string_view to_string(SourceKind k) noexcept {
    switch (k) {
    case SourceKind::rss: return "rss";
    case SourceKind::http_list: return "http_list";
    case SourceKind::arxiv_api: return "arxiv_api";
    case SourceKind::wiki_recent: return "wiki_recent";
    case SourceKind::file_import: return "file_import";
    }
    return "rss";
}

SourceKind source_kind_from_string(std::string_view s) {
    for (auto k : {SourceKind::rss, SourceKind::http_list, SourceKind::arxiv_api, SourceKind::wiki_recent,
                   SourceKind::file_import})
        if (to_string(k) == s)
            return k;
    throw Error(Errc::Config, fmt::format("unknown source kind '{}'", s));
}

namespace {

bool is_http_url(std::string_view s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

} // namespace

void validate(const SourceSpec& s) {
    if (s.source_id.empty())
        throw Error(Errc::Config, "source without source_id");
    if (!(s.max_requests_per_sec > 0.0))
        throw Error(Errc::Config, fmt::format("{}: max_requests_per_sec must be > 0", s.source_id));
    const bool http = is_http_url(s.endpoint);
    if (s.kind == SourceKind::file_import ? http || s.endpoint.empty() : !http)
        throw Error(Errc::Config,
                    fmt::format("{}: endpoint '{}' does not suit kind {}", s.source_id, s.endpoint, to_string(s.kind)));
}

// ---------------------------------------------------------------------------
// Transports

HttpTransport::HttpTransport(std::string user_agent) : user_agent_(std::move(user_agent)) {}

TransportResponse HttpTransport::get(const std::string& url) {
    auto res = http::get(url, {{"User-Agent", user_agent_}});
    return {res.status, std::move(res.body)};
}

FixtureTransport::FixtureTransport(const std::filesystem::path& dir) {
    json index;
    try {
        index = json::parse(io::read_file(dir / "index.json"));
        fetched_at_ = parse_timestamp(index.at("fetched_at").get<std::string>());
        for (const auto& [url, entry] : index.at("responses").items()) {
            TransportResponse r;
            r.status = entry.value("status", 200);
            if (entry.contains("file"))
                r.body = io::read_file(dir / entry["file"].get<std::string>());
            else
                r.body = entry.value("body", "");
            responses_.emplace(url, std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::Config, fmt::format("fixture index {}: {}", (dir / "index.json").string(), e.what()));
    }
}

TransportResponse FixtureTransport::get(const std::string& url) {
    const auto it = responses_.find(url);
    if (it == responses_.end())
        return {404, ""};
    return it->second;
}

bool offline_from_env() {
    const char* v = std::getenv("TEMPORA_OFFLINE");
    return v && std::string_view(v) == "1";
}

std::unique_ptr<Transport> make_transport(bool offline, const std::optional<std::filesystem::path>& fixtures) {
    if (offline || offline_from_env()) {
        if (!fixtures)
            throw Error(Errc::Config, "offline mode needs a fixtures directory");
        return std::make_unique<FixtureTransport>(*fixtures);
    }
    return std::make_unique<HttpTransport>();
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double max_per_sec, ClockFn clock, SleepFn sleep)
    : clock_(clock ? std::move(clock) : ClockFn([] { return SteadyClock::now(); })),
      sleep_(sleep ? std::move(sleep) : SleepFn([](SteadyClock::duration d) { std::this_thread::sleep_for(d); })) {
    if (!(max_per_sec > 0.0))
        throw Error(Errc::InvalidArgument, "rate must be positive");
    interval_ = std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(1.0 / max_per_sec));
}

void RateLimiter::acquire() {
    SteadyClock::time_point slot, now;
    {
        std::lock_guard lock(mu_);
        now = clock_();
        slot = next_ && *next_ > now ? *next_ : now;
        next_ = slot + interval_;
    }
    if (slot > now)
        sleep_(slot - now);
}

// ---------------------------------------------------------------------------
// robots.txt

namespace {

// Robots path pattern: '*' matches any run, a trailing '$' anchors the end.
bool robots_match(std::string_view pattern, std::string_view path) {
    bool anchored = !pattern.empty() && pattern.back() == '$';
    if (anchored)
        pattern.remove_suffix(1);
    // Iterative wildcard match against a prefix of path (or all of it when anchored).
    std::size_t p = 0, s = 0, star = std::string_view::npos, mark = 0;
    while (true) {
        if (p == pattern.size() && (!anchored || s == path.size()))
            return true;
        if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = s;
            continue;
        }
        if (p < pattern.size() && s < path.size() && pattern[p] == path[s]) {
            ++p;
            ++s;
            continue;
        }
        if (star != std::string_view::npos && mark < path.size()) {
            p = star + 1;
            s = ++mark;
            continue;
        }
        return false;
    }
}

} // namespace

RobotsRules RobotsRules::parse(std::string_view txt, std::string_view agent) {
    struct Group {
        std::vector<std::string> agents;
        std::vector<Rule> rules;
    };
    std::vector<Group> groups;
    bool last_was_agent = false;
    std::istringstream in{std::string(txt)};
    for (std::string line; std::getline(in, line);) {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            continue;
        const std::string key = text::to_lower_ascii(text::trim(std::string_view(line).substr(0, colon)));
        const std::string value(text::trim(std::string_view(line).substr(colon + 1)));
        if (key == "user-agent") {
            if (!last_was_agent || groups.empty())
                groups.emplace_back();
            groups.back().agents.push_back(text::to_lower_ascii(value));
            last_was_agent = true;
        } else if (key == "allow" || key == "disallow") {
            last_was_agent = false;
            if (groups.empty())
                continue;
            if (key == "disallow" && value.empty())
                continue; // "Disallow:" with no path allows everything
            groups.back().rules.push_back({key == "allow", value});
        } else {
            last_was_agent = false;
        }
    }
    const std::string me = text::to_lower_ascii(agent);
    RobotsRules named, star;
    bool have_named = false;
    for (const auto& g : groups)
        for (const auto& a : g.agents) {
            if (a == "*")
                star.rules_.insert(star.rules_.end(), g.rules.begin(), g.rules.end());
            else if (!me.empty() && me.find(a) != std::string::npos) {
                named.rules_.insert(named.rules_.end(), g.rules.begin(), g.rules.end());
                have_named = true;
            }
        }
    return have_named ? named : star;
}

bool RobotsRules::allowed(std::string_view path) const {
    std::size_t best_len = 0;
    bool verdict = true;
    bool any = false;
    for (const auto& r : rules_) {
        if (!robots_match(r.pattern, path))
            continue;
        if (!any || r.pattern.size() > best_len || (r.pattern.size() == best_len && r.allow)) {
            best_len = r.pattern.size();
            verdict = r.allow;
            any = true;
        }
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Parsing helpers

namespace {

std::optional<Date> clamp_date(std::optional<Date> d, Clock::time_point fetched_at) {
    if (!d)
        return d;
    const Date f = date_of(fetched_at);
    return *d > f ? f : *d;
}

std::optional<Date> feed_date(const std::string& s) {
    Date d;
    if (parse_feed_date(text::trim(s), d))
        return d;
    return std::nullopt;
}

std::string child_text(const pt::ptree& node, const char* key) {
    const auto c = node.get_child_optional(key);
    return c ? std::string(text::trim(c->data())) : std::string();
}

} // namespace

std::vector<FetchRecord> parse_feed(std::string_view xml, const std::string& url, Clock::time_point fetched_at) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw Error(Errc::Parse, fmt::format("{}: {}", url, e.message()));
    }
    std::vector<FetchRecord> out;
    auto add = [&](std::string title, std::string link, std::string body, const std::string& date) {
        FetchRecord r;
        r.url = link.empty() ? url : http::resolve(url, link);
        r.fetched_at = fetched_at;
        r.raw = std::move(body);
        r.declared_date = clamp_date(feed_date(date), fetched_at);
        if (!title.empty())
            r.title = std::move(title);
        if (!text::trim(r.raw).empty())
            out.push_back(std::move(r));
    };
    if (const auto channel = tree.get_child_optional("rss.channel")) {
        for (const auto& [name, item] : *channel) {
            if (name != "item")
                continue;
            std::string body = child_text(item, "content:encoded");
            if (body.empty())
                body = child_text(item, "description");
            std::string date = child_text(item, "pubDate");
            if (date.empty())
                date = child_text(item, "dc:date");
            add(child_text(item, "title"), child_text(item, "link"), std::move(body), date);
        }
        return out;
    }
    if (const auto feed = tree.get_child_optional("feed")) {
        for (const auto& [name, entry] : *feed) {
            if (name != "entry")
                continue;
            std::string link;
            for (const auto& [k, v] : entry) {
                if (k != "link")
                    continue;
                const auto rel = v.get_optional<std::string>("<xmlattr>.rel");
                if (!rel || *rel == "alternate") {
                    link = v.get<std::string>("<xmlattr>.href", "");
                    break;
                }
            }
            if (link.empty())
                link = child_text(entry, "id");
            std::string body = child_text(entry, "content");
            if (body.empty())
                body = child_text(entry, "summary");
            std::string date = child_text(entry, "published");
            if (date.empty())
                date = child_text(entry, "updated");
            add(child_text(entry, "title"), link, std::move(body), date);
        }
        return out;
    }
    throw Error(Errc::Parse, url + ": neither an RSS channel nor an Atom feed");
}

std::vector<std::string> extract_links(std::string_view html, const std::string& base_url,
                                       const std::optional<std::string>& rule) {
    enum class Op { any, prefix, contains, suffix } op = Op::any;
    std::string needle;
    if (rule && !text::trim(*rule).empty() && text::trim(*rule) != "a") {
        static const std::regex kRule(R"re(^\s*a\[href([\^*$])=["']?([^"'\]]*)["']?\]\s*$)re");
        std::smatch m;
        const std::string r = *rule;
        if (!std::regex_match(r, m, kRule))
            throw Error(Errc::Config, fmt::format("unsupported extraction rule '{}'", r));
        op = m[1] == "^" ? Op::prefix : m[1] == "*" ? Op::contains : Op::suffix;
        needle = m[2];
    }
    static const std::regex kAnchor(R"re(<a\s[^>]*?href\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>"']+)))re",
                                    std::regex::icase);
    std::vector<std::string> out;
    std::set<std::string> seen;
    const std::string doc(html);
    for (auto it = std::sregex_iterator(doc.begin(), doc.end(), kAnchor); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::string href = m[1].matched ? m[1].str() : m[2].matched ? m[2].str() : m[3].str();
        if (href.empty() || href[0] == '#' || href.rfind("mailto:", 0) == 0 || href.rfind("javascript:", 0) == 0)
            continue;
        bool keep = true;
        switch (op) {
        case Op::any: break;
        case Op::prefix: keep = href.rfind(needle, 0) == 0; break;
        case Op::contains: keep = href.find(needle) != std::string::npos; break;
        case Op::suffix: keep = href.size() >= needle.size() && href.compare(href.size() - needle.size(), needle.size(), needle) == 0; break;
        }
        if (!keep)
            continue;
        std::string abs = http::resolve(base_url, href);
        if (seen.insert(abs).second)
            out.push_back(std::move(abs));
    }
    return out;
}

namespace {

std::optional<std::string> html_title(const std::string& html) {
    static const std::regex kTitle(R"(<title[^>]*>([\s\S]*?)</title>)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(html, m, kTitle)) {
        auto t = std::string(text::trim(m[1].str()));
        if (!t.empty())
            return t;
    }
    return std::nullopt;
}

std::optional<Date> html_published(const std::string& html) {
    static const std::regex kMeta(R"re(<meta\s[^>]*>)re", std::regex::icase);
    static const std::regex kProp(R"re((?:property|name)\s*=\s*["']article:published_time["'])re", std::regex::icase);
    static const std::regex kContent(R"re(content\s*=\s*["']([^"']*)["'])re", std::regex::icase);
    for (auto it = std::sregex_iterator(html.begin(), html.end(), kMeta); it != std::sregex_iterator(); ++it) {
        const std::string tag = it->str();
        std::smatch c;
        if (std::regex_search(tag, kProp) && std::regex_search(tag, c, kContent))
            return feed_date(c[1].str());
    }
    return std::nullopt;
}

class Fetcher {
public:
    Fetcher(const SourceSpec& s, Transport& t, RateLimiter& l, FetchResult& r)
        : source_(s), transport_(t), limiter_(l), result_(r) {}

    // GETs `url` honouring robots.txt and the rate limit; records failures.
    std::optional<std::string> get(const std::string& url) {
        try {
            const auto u = http::parse_url(url);
            if (!robots_for(u).allowed(u.path)) {
                result_.errors.push_back({Errc::RobotsDisallowed, url, 0, "disallowed by robots.txt"});
                return std::nullopt;
            }
            limiter_.acquire();
            auto res = transport_.get(url);
            if (res.status < 200 || res.status >= 300) {
                result_.errors.push_back({Errc::Transport, url, res.status, fmt::format("HTTP {}", res.status)});
                return std::nullopt;
            }
            return std::move(res.body);
        } catch (const TransportError& e) {
            result_.errors.push_back({Errc::Transport, url, e.status(), e.what()});
        } catch (const Error& e) {
            result_.errors.push_back({e.code() == Errc::InvalidArgument ? Errc::Parse : e.code(), url, 0, e.what()});
        }
        return std::nullopt;
    }

    void parse_error(const std::string& url, const std::string& detail) {
        result_.errors.push_back({Errc::Parse, url, 0, detail});
    }

    Clock::time_point now() { return transport_.now(); }

private:
    const RobotsRules& robots_for(const http::Url& u) {
        const std::string origin = u.origin();
        if (const auto it = robots_.find(origin); it != robots_.end())
            return it->second;
        RobotsRules rules = RobotsRules::allow_all();
        try {
            limiter_.acquire();
            const auto res = transport_.get(origin + "/robots.txt");
            if (res.status == 200)
                rules = RobotsRules::parse(res.body);
        } catch (const TransportError&) {
            // unreachable robots.txt: treated as absent
        }
        return robots_.emplace(origin, std::move(rules)).first->second;
    }

    const SourceSpec& source_;
    Transport& transport_;
    RateLimiter& limiter_;
    FetchResult& result_;
    std::map<std::string, RobotsRules> robots_;
};

bool keep(const FetchRecord& r, std::optional<Date> since) {
    return !since || !r.declared_date || *r.declared_date >= *since;
}

void fetch_feed(Fetcher& f, const std::string& url, std::optional<Date> since, std::size_t limit,
                FetchResult& out) {
    const auto body = f.get(url);
    if (!body)
        return;
    try {
        for (auto& r : parse_feed(*body, url, f.now())) {
            if (out.records.size() >= limit)
                break;
            if (keep(r, since))
                out.records.push_back(std::move(r));
        }
    } catch (const Error& e) {
        f.parse_error(url, e.what());
    }
}

void fetch_wiki(Fetcher& f, const SourceSpec& s, std::optional<Date> since, std::size_t limit, FetchResult& out) {
    const std::string sep = s.endpoint.find('?') == std::string::npos ? "?" : "&";
    const std::string list_url =
        s.endpoint + sep +
        fmt::format("action=query&list=recentchanges&rcnamespace=0&rctype=new&rcprop=title%7Ctimestamp&rclimit={}&format=json",
                    limit);
    const auto body = f.get(list_url);
    if (!body)
        return;
    std::vector<std::pair<std::string, std::optional<Date>>> titles;
    try {
        const auto j = json::parse(*body);
        for (const auto& rc : j.at("query").at("recentchanges")) {
            std::optional<Date> d;
            if (rc.contains("timestamp"))
                d = feed_date(rc["timestamp"].get<std::string>());
            titles.emplace_back(rc.at("title").get<std::string>(), d);
        }
    } catch (const json::exception& e) {
        f.parse_error(list_url, e.what());
        return;
    }
    for (const auto& [title, date] : titles) {
        if (out.records.size() >= limit)
            break;
        const auto declared = clamp_date(date, f.now());
        if (since && declared && *declared < *since)
            continue;
        const std::string page_url = s.endpoint + sep +
                                     "action=query&prop=extracts&explaintext=1&format=json&titles=" +
                                     http::url_encode(title);
        const auto page = f.get(page_url);
        if (!page)
            continue;
        try {
            const auto j = json::parse(*page);
            for (const auto& [_, p] : j.at("query").at("pages").items()) {
                const std::string extract = p.value("extract", "");
                if (text::trim(extract).empty())
                    continue;
                out.records.push_back({page_url, f.now(), extract, declared, title});
                break;
            }
        } catch (const json::exception& e) {
            f.parse_error(page_url, e.what());
        }
    }
}

void fetch_listing(Fetcher& f, const SourceSpec& s, std::optional<Date> since, std::size_t limit,
                   FetchResult& out) {
    const auto listing = f.get(s.endpoint);
    if (!listing)
        return;
    std::vector<std::string> links;
    try {
        links = extract_links(*listing, s.endpoint, s.extraction);
    } catch (const Error& e) {
        f.parse_error(s.endpoint, e.what());
        return;
    }
    for (const auto& link : links) {
        if (out.records.size() >= limit)
            break;
        const auto page = f.get(link);
        if (!page || text::trim(*page).empty())
            continue;
        FetchRecord r{link, f.now(), *page, clamp_date(html_published(*page), f.now()), html_title(*page)};
        if (keep(r, since))
            out.records.push_back(std::move(r));
    }
}

void fetch_file(const SourceSpec& s, Transport& t, std::optional<Date> since, std::size_t limit, FetchResult& out) {
    std::string content;
    try {
        content = io::read_file(s.endpoint);
    } catch (const Error& e) {
        out.errors.push_back({Errc::Transport, s.endpoint, 0, e.what()});
        return;
    }
    const auto now = t.now();
    std::istringstream in(content);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (text::trim(line).empty())
            continue;
        if (out.records.size() >= limit)
            break;
        try {
            const auto j = json::parse(line);
            FetchRecord r;
            r.url = fmt::format("{}#L{}", s.endpoint, line_no);
            r.fetched_at = now;
            r.raw = j.at("body").get<std::string>();
            if (auto it = j.find("observed_at"); it != j.end() && it->is_string())
                r.declared_date = clamp_date(feed_date(it->get<std::string>()), now);
            if (auto it = j.find("title"); it != j.end() && it->is_string())
                r.title = it->get<std::string>();
            if (!text::trim(r.raw).empty() && keep(r, since))
                out.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            out.errors.push_back({Errc::Parse, fmt::format("{}#L{}", s.endpoint, line_no), 0, e.what()});
        }
    }
}

} // namespace

FetchResult fetch(const SourceSpec& source, Transport& transport, std::optional<Date> since, std::size_t limit,
                  RateLimiter* limiter) {
    validate(source);
    FetchResult out;
    std::optional<RateLimiter> own;
    if (!limiter) {
        own.emplace(source.max_requests_per_sec);
        limiter = &*own;
    }
    Fetcher f(source, transport, *limiter, out);
    switch (source.kind) {
    case SourceKind::rss:
    case SourceKind::arxiv_api: fetch_feed(f, source.endpoint, since, limit, out); break;
    case SourceKind::wiki_recent: fetch_wiki(f, source, since, limit, out); break;
    case SourceKind::http_list: fetch_listing(f, source, since, limit, out); break;
    case SourceKind::file_import: fetch_file(source, transport, since, limit, out); break;
    }
    return out;
}

std::map<std::string, FetchResult> fetch_all(const std::vector<SourceSpec>& sources, Transport& transport,
                                             std::optional<Date> since, std::size_t limit, std::size_t workers) {
    std::vector<FetchResult> results(sources.size());
    std::vector<std::exception_ptr> errors(sources.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < sources.size(); i = next++) {
            try {
                results[i] = fetch(sources[i], transport, since, limit);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, sources.size()));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    std::map<std::string, FetchResult> out;
    for (std::size_t i = 0; i < sources.size(); ++i)
        out[sources[i].source_id] = std::move(results[i]);
    return out;
}

DocumentBatch to_documents(const std::vector<FetchRecord>& records, const SourceSpec& source) {
    DocumentBatch out;
    for (const auto& r : records) {
        const Date observed = r.declared_date ? *r.declared_date : date_of(r.fetched_at);
        auto res = corpus::preprocess(r.raw, source.source_id, observed, source.category, r.title);
        if (auto* doc = std::get_if<corpus::Document>(&res))
            out.documents.push_back(std::move(*doc));
        else
            ++out.rejected;
    }
    return out;
}

} // namespace tempora::collectors
