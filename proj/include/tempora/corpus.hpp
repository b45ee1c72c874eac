#pragma once

#include "tempora/dates.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace tempora::corpus {

inline constexpr std::size_t kMinChars = 100;

enum class Category { news, encyclopedia, academic_stem, academic_nonstem, qa, code, other };

std::string_view to_string(Category c) noexcept;
Category category_from_string(std::string_view s);

struct Document {
    std::string doc_id;
    std::string source_id;
    Category category = Category::other;
    std::optional<std::string> title;
    std::string body;
    Date observed_at;
    std::size_t char_len = 0;
    std::size_t byte_len = 0;

    friend bool operator==(const Document&, const Document&) = default;
};

// doc_id: SHA-256 over source_id, a NUL separator, and the body.
std::string make_doc_id(std::string_view source_id, std::string_view body);

struct Rejection {
    enum class Reason { too_short };
    Reason reason = Reason::too_short;
    std::size_t measured_chars = 0;
};

using PreprocessResult = std::variant<Document, Rejection>;

// Strips markup, normalises whitespace and applies the minimum-length rule.
std::string clean_text(std::string_view raw);
PreprocessResult preprocess(std::string_view raw, std::string_view source_id, Date observed_at,
                            Category category = Category::other, std::optional<std::string> title = std::nullopt);

struct PeriodGrid {
    Date origin;
    int interval_months = 2;
    // When set, trailing empty buckets up to (and including) the bucket containing
    // this date are emitted.
    std::optional<Date> until;
};

struct PeriodBucket {
    int index = 0; // -1 for the synthetic pre-grid bucket
    Date start;
    Date end; // exclusive
    int interval_months = 2;
    bool pre_grid = false;

    auto operator<=>(const PeriodBucket& o) const { return index <=> o.index; }
    bool operator==(const PeriodBucket& o) const { return index == o.index; }
};

PeriodBucket bucket_at(const PeriodGrid& grid, int index);
int bucket_index(const PeriodGrid& grid, Date d); // -1 before the origin

using BucketMap = std::map<PeriodBucket, std::vector<Document>>;
BucketMap bucketize(const std::vector<Document>& docs, const PeriodGrid& grid);

// splitmix64, used for every seeded choice in the corpus.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() noexcept;
    // Uniform in [0, bound) by rejection on the low residue class.
    std::uint64_t bounded(std::uint64_t bound) noexcept;

private:
    std::uint64_t state_;
};

// Sorts by doc_id, runs a partial Fisher-Yates of length k driven by SplitMix64(seed),
// and returns the chosen documents ordered by doc_id.
std::vector<Document> sample(std::vector<Document> docs, std::size_t k, std::uint64_t seed);

struct SnapshotKey {
    std::string source_id;
    int bucket = 0;
    auto operator<=>(const SnapshotKey&) const = default;
};

struct CorpusSnapshot {
    std::string snapshot_id;
    std::string created_at;
    PeriodGrid grid;
    std::size_t k = 50;
    std::uint64_t seed = 0;
    std::map<SnapshotKey, std::vector<std::string>> entries;
    std::vector<Document> documents; // every doc_id in entries, ordered by doc_id
};

// Buckets docs per source, samples each (source, bucket) cell and assigns a
// content-derived snapshot_id (created_at is not part of the identity).
CorpusSnapshot make_snapshot(const std::vector<Document>& docs, const PeriodGrid& grid, std::size_t k,
                             std::uint64_t seed, std::string created_at);

// JSON Lines import/export. Imported bodies go through preprocess; rejected lines
// are counted in `rejected`.
struct ImportResult {
    std::vector<Document> documents;
    std::size_t rejected = 0;
};
ImportResult import_jsonl(std::string_view content);
ImportResult import_jsonl_file(const std::string& path);

nlohmann::json to_json(const Document& d);
Document document_from_json(const nlohmann::json& j); // trusts a previously exported document
std::string export_jsonl(const std::vector<Document>& docs);

nlohmann::json snapshot_manifest(const CorpusSnapshot& s);
void write_snapshot(const CorpusSnapshot& s, const std::string& dir);
CorpusSnapshot read_snapshot(const std::string& dir);

} // namespace tempora::corpus
