#include "tempora/corpus.hpp"

#include "tempora/error.hpp"
#include "tempora/io.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>

namespace tempora::corpus {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 7> kCategoryNames{{
    {Category::news, "news"},
    {Category::encyclopedia, "encyclopedia"},
    {Category::academic_stem, "academic_stem"},
    {Category::academic_nonstem, "academic_nonstem"},
    {Category::qa, "qa"},
    {Category::code, "code"},
    {Category::other, "other"},
}};

bool istarts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
    if (pos + prefix.size() > s.size())
        return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i])
            return false;
    return true;
}

std::size_t ifind(std::string_view s, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= s.size(); ++i)
        if (istarts_with(s, i, needle))
            return i;
    return std::string_view::npos;
}

bool is_tag_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '/' || c == '!' || c == '?';
}

// One pass of markup removal: script/style elements, comments, then tags.
std::string strip_markup_once(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '<') {
            out += s[i++];
            continue;
        }
        if (s.compare(i, 4, "<!--") == 0) {
            const auto end = s.find("-->", i + 4);
            i = end == std::string_view::npos ? s.size() : end + 3;
            out += ' ';
            continue;
        }
        bool skipped_block = false;
        for (std::string_view name : {std::string_view{"script"}, std::string_view{"style"}}) {
            if (istarts_with(s, i + 1, name)) {
                const std::size_t after = i + 1 + name.size();
                if (after < s.size() && (s[after] == '>' || std::isspace(static_cast<unsigned char>(s[after])))) {
                    const std::string close = "</" + std::string(name);
                    const auto end = ifind(s, close, after);
                    if (end == std::string_view::npos) {
                        i = s.size();
                    } else {
                        const auto gt = s.find('>', end);
                        i = gt == std::string_view::npos ? s.size() : gt + 1;
                    }
                    out += ' ';
                    skipped_block = true;
                    break;
                }
            }
        }
        if (skipped_block)
            continue;
        if (i + 1 < s.size() && is_tag_start(s[i + 1])) {
            const auto gt = s.find('>', i + 1);
            if (gt != std::string_view::npos) {
                i = gt + 1;
                out += ' ';
                continue;
            }
        }
        out += s[i++];
    }
    return out;
}

// Entities whose replacement can neither start a tag nor form a new entity.
std::string decode_inert_entities(std::string_view s) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> table{{
        {"&nbsp;", " "},
        {"&#160;", " "},
        {"&quot;", "\""},
        {"&#34;", "\""},
        {"&apos;", "'"},
        {"&#39;", "'"},
        {"&#x27;", "'"},
    }};
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        bool hit = false;
        if (s[i] == '&') {
            for (auto [ent, rep] : table) {
                if (s.compare(i, ent.size(), ent) == 0) {
                    out += rep;
                    i += ent.size();
                    hit = true;
                    break;
                }
            }
        }
        if (!hit)
            out += s[i++];
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending = true;
            continue;
        }
        if (pending && !out.empty())
            out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

} // namespace

std::string_view to_string(Category c) noexcept {
    for (auto [cat, name] : kCategoryNames)
        if (cat == c)
            return name;
    return "other";
}

Category category_from_string(std::string_view s) {
    for (auto [cat, name] : kCategoryNames)
        if (name == s)
            return cat;
    throw Error(Errc::Schema, fmt::format("unknown category '{}'", s));
}

std::string make_doc_id(std::string_view source_id, std::string_view body) {
    std::string buf;
    buf.reserve(source_id.size() + 1 + body.size());
    buf.append(source_id);
    buf.push_back('\0');
    buf.append(body);
    return text::sha256_hex(buf);
}

std::string clean_text(std::string_view raw) {
    std::string s = text::utf8_sanitize(raw);
    for (;;) {
        std::string next = strip_markup_once(s);
        if (next == s)
            break;
        s = std::move(next);
    }
    return collapse_whitespace(decode_inert_entities(s));
}

PreprocessResult preprocess(std::string_view raw, std::string_view source_id, Date observed_at, Category category,
                            std::optional<std::string> title) {
    std::string body = clean_text(raw);
    const std::size_t chars = text::utf8_length(body);
    if (chars < kMinChars)
        return Rejection{Rejection::Reason::too_short, chars};
    Document d;
    d.doc_id = make_doc_id(source_id, body);
    d.source_id = std::string(source_id);
    d.category = category;
    d.title = std::move(title);
    d.char_len = chars;
    d.byte_len = body.size();
    d.body = std::move(body);
    d.observed_at = observed_at;
    return d;
}

PeriodBucket bucket_at(const PeriodGrid& grid, int index) {
    if (grid.interval_months < 1)
        throw Error(Errc::InvalidArgument, "interval_months must be >= 1");
    PeriodBucket b;
    b.index = index;
    b.interval_months = grid.interval_months;
    b.start = grid.origin.add_months(index * grid.interval_months);
    b.end = grid.origin.add_months((index + 1) * grid.interval_months);
    return b;
}

int bucket_index(const PeriodGrid& grid, Date d) {
    if (grid.interval_months < 1)
        throw Error(Errc::InvalidArgument, "interval_months must be >= 1");
    if (d < grid.origin)
        return -1;
    const auto a = grid.origin.ymd();
    const auto b = d.ymd();
    const int months = (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
                       static_cast<int>(static_cast<unsigned>(b.month())) -
                       static_cast<int>(static_cast<unsigned>(a.month()));
    int i = std::max(0, months / grid.interval_months);
    while (i > 0 && grid.origin.add_months(i * grid.interval_months) > d)
        --i;
    while (grid.origin.add_months((i + 1) * grid.interval_months) <= d)
        ++i;
    return i;
}

BucketMap bucketize(const std::vector<Document>& docs, const PeriodGrid& grid) {
    BucketMap out;
    int last = grid.until ? bucket_index(grid, *grid.until) : -1;
    std::optional<PeriodBucket> pre;
    std::vector<Document> pre_docs;
    for (const auto& d : docs) {
        const int i = bucket_index(grid, d.observed_at);
        if (i < 0) {
            pre_docs.push_back(d);
            continue;
        }
        last = std::max(last, i);
    }
    for (int i = 0; i <= last; ++i)
        out.emplace(bucket_at(grid, i), std::vector<Document>{});
    for (const auto& d : docs) {
        const int i = bucket_index(grid, d.observed_at);
        if (i >= 0)
            out[bucket_at(grid, i)].push_back(d);
    }
    if (!pre_docs.empty()) {
        PeriodBucket b;
        b.index = -1;
        b.pre_grid = true;
        b.interval_months = grid.interval_months;
        b.end = grid.origin;
        b.start = std::min_element(pre_docs.begin(), pre_docs.end(), [](const auto& x, const auto& y) {
                      return x.observed_at < y.observed_at;
                  })->observed_at;
        out.emplace(b, std::move(pre_docs));
    }
    return out;
}

std::uint64_t SplitMix64::next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::bounded(std::uint64_t bound) noexcept {
    // 2^64 mod bound values at the bottom are rejected so every residue is equally likely.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t x = next();
        if (x >= threshold)
            return x % bound;
    }
}

std::vector<Document> sample(std::vector<Document> docs, std::size_t k, std::uint64_t seed) {
    if (k < 1)
        throw Error(Errc::InvalidArgument, "sample size k must be >= 1");
    std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
        return std::tie(a.doc_id, a.observed_at, a.title) < std::tie(b.doc_id, b.observed_at, b.title);
    });
    if (docs.size() <= k)
        return docs;
    SplitMix64 rng(seed);
    const std::size_t n = docs.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(docs[i], docs[j]);
    }
    docs.resize(k);
    std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
        return std::tie(a.doc_id, a.observed_at, a.title) < std::tie(b.doc_id, b.observed_at, b.title);
    });
    return docs;
}

CorpusSnapshot make_snapshot(const std::vector<Document>& docs, const PeriodGrid& grid, std::size_t k,
                             std::uint64_t seed, std::string created_at) {
    CorpusSnapshot snap;
    snap.grid = grid;
    snap.k = k;
    snap.seed = seed;
    snap.created_at = std::move(created_at);

    std::map<std::string, std::vector<Document>> by_source;
    for (const auto& d : docs)
        by_source[d.source_id].push_back(d);

    std::map<std::string, Document> chosen;
    for (const auto& [source, source_docs] : by_source) {
        for (const auto& [bucket, bucket_docs] : bucketize(source_docs, grid)) {
            auto picked = sample(bucket_docs, k, seed);
            auto& ids = snap.entries[SnapshotKey{source, bucket.index}];
            for (auto& d : picked) {
                ids.push_back(d.doc_id);
                chosen.emplace(d.doc_id, std::move(d));
            }
        }
    }
    for (auto& [id, d] : chosen)
        snap.documents.push_back(std::move(d));

    json identity = snapshot_manifest(snap);
    identity.erase("snapshot_id");
    identity.erase("created_at");
    snap.snapshot_id = text::sha256_hex(identity.dump()).substr(0, 16);
    return snap;
}

json to_json(const Document& d) {
    json j;
    j["doc_id"] = d.doc_id;
    j["source_id"] = d.source_id;
    j["category"] = std::string(to_string(d.category));
    j["title"] = d.title ? json(*d.title) : json(nullptr);
    j["body"] = d.body;
    j["observed_at"] = d.observed_at.str();
    return j;
}

namespace {

template <typename T>
T required(const json& j, const char* key, std::size_t line) {
    if (!j.contains(key) || j[key].is_null())
        throw Error(Errc::Schema, fmt::format("line {}: missing field '{}'", line, key));
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        throw Error(Errc::Schema, fmt::format("line {}: field '{}': {}", line, key, e.what()));
    }
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null())
        return std::nullopt;
    return j[key].get<std::string>();
}

} // namespace

ImportResult import_jsonl(std::string_view content) {
    ImportResult result;
    std::size_t line_no = 0;
    for (const auto& line : text::split(content, '\n')) {
        ++line_no;
        if (text::trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(Errc::Schema, fmt::format("line {}: {}", line_no, e.what()));
        }
        const auto source = required<std::string>(j, "source_id", line_no);
        const auto body = required<std::string>(j, "body", line_no);
        const auto observed = Date::parse(required<std::string>(j, "observed_at", line_no));
        const auto category = j.contains("category") && !j["category"].is_null()
                                  ? category_from_string(j["category"].get<std::string>())
                                  : Category::other;
        auto r = preprocess(body, source, observed, category, optional_string(j, "title"));
        if (auto* doc = std::get_if<Document>(&r))
            result.documents.push_back(std::move(*doc));
        else
            ++result.rejected;
    }
    return result;
}

ImportResult import_jsonl_file(const std::string& path) {
    return import_jsonl(io::read_file(path));
}

Document document_from_json(const json& j) {
    auto r = preprocess(required<std::string>(j, "body", 0), required<std::string>(j, "source_id", 0),
                        Date::parse(required<std::string>(j, "observed_at", 0)),
                        category_from_string(required<std::string>(j, "category", 0)), optional_string(j, "title"));
    auto* doc = std::get_if<Document>(&r);
    if (!doc)
        throw Error(Errc::Schema, "stored document violates the minimum length rule");
    if (j.contains("doc_id") && j["doc_id"].get<std::string>() != doc->doc_id)
        throw Error(Errc::Schema, "stored doc_id does not match its content: " + j["doc_id"].get<std::string>());
    return std::move(*doc);
}

std::string export_jsonl(const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        out += to_json(d).dump();
        out += '\n';
    }
    return out;
}

json snapshot_manifest(const CorpusSnapshot& s) {
    json entries = json::array();
    for (const auto& [key, ids] : s.entries)
        entries.push_back({{"source_id", key.source_id}, {"bucket", key.bucket}, {"doc_ids", ids}});
    json grid{{"origin", s.grid.origin.str()}, {"interval_months", s.grid.interval_months}};
    if (s.grid.until)
        grid["until"] = s.grid.until->str();
    return json{{"snapshot_id", s.snapshot_id},
                {"created_at", s.created_at},
                {"grid", grid},
                {"sampling", {{"k", s.k}, {"seed", s.seed}}},
                {"entries", entries}};
}

void write_snapshot(const CorpusSnapshot& s, const std::string& dir) {
    std::filesystem::create_directories(dir);
    io::write_file_atomic(std::filesystem::path(dir) / "documents.jsonl", export_jsonl(s.documents));
    io::write_file_atomic(std::filesystem::path(dir) / "snapshot.json", snapshot_manifest(s).dump(2) + "\n");
}

CorpusSnapshot read_snapshot(const std::string& dir) {
    const auto manifest_path = std::filesystem::path(dir) / "snapshot.json";
    json m;
    try {
        m = json::parse(io::read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw Error(Errc::Schema, manifest_path.string() + ": " + e.what());
    }
    CorpusSnapshot s;
    s.snapshot_id = m.at("snapshot_id").get<std::string>();
    s.created_at = m.value("created_at", "");
    s.grid.origin = Date::parse(m.at("grid").at("origin").get<std::string>());
    s.grid.interval_months = m.at("grid").at("interval_months").get<int>();
    if (m["grid"].contains("until"))
        s.grid.until = Date::parse(m["grid"]["until"].get<std::string>());
    s.k = m.at("sampling").at("k").get<std::size_t>();
    s.seed = m.at("sampling").at("seed").get<std::uint64_t>();
    for (const auto& e : m.at("entries"))
        s.entries[SnapshotKey{e.at("source_id").get<std::string>(), e.at("bucket").get<int>()}] =
            e.at("doc_ids").get<std::vector<std::string>>();

    std::map<std::string, Document> by_id;
    std::size_t line_no = 0;
    for (const auto& line : text::split(io::read_file(std::filesystem::path(dir) / "documents.jsonl"), '\n')) {
        ++line_no;
        if (text::trim(line).empty())
            continue;
        try {
            auto d = document_from_json(json::parse(line));
            by_id.emplace(d.doc_id, std::move(d));
        } catch (const json::exception& e) {
            throw Error(Errc::Schema, fmt::format("documents.jsonl line {}: {}", line_no, e.what()));
        }
    }
    for (const auto& [key, ids] : s.entries)
        for (const auto& id : ids)
            if (!by_id.count(id))
                throw Error(Errc::Schema, "snapshot references unknown doc_id " + id);
    for (auto& [id, d] : by_id)
        s.documents.push_back(std::move(d));
    return s;
}

} // namespace tempora::corpus
