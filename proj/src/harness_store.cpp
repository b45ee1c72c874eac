#include "tempora/harness.hpp"

#include "tempora/error.hpp"
#include "tempora/io.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>

#include <sstream>

namespace tempora::harness {

namespace fs = std::filesystem;

std::string canonical(const json& j) {
    // nlohmann::json objects keep keys sorted, so a compact dump is canonical.
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string compute_run_id(const std::string& command, const std::string& config_digest, const json& input_refs) {
    const json identity{{"command", command}, {"config_digest", config_digest}, {"input_refs", input_refs}};
    return text::sha256_hex(canonical(identity)).substr(0, 16);
}

RunManifest make_manifest(std::string command, std::string config_digest, json input_refs, std::string created_at) {
    RunManifest m;
    m.command = std::move(command);
    m.config_digest = std::move(config_digest);
    m.input_refs = std::move(input_refs);
    m.created_at = std::move(created_at);
    m.run_id = compute_run_id(m.command, m.config_digest, m.input_refs);
    return m;
}

json to_json(const RunManifest& m) {
    return json{{"run_id", m.run_id},
                {"created_at", m.created_at},
                {"config_digest", m.config_digest},
                {"command", m.command},
                {"input_refs", m.input_refs}};
}

RunManifest manifest_from_json(const json& j) {
    try {
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        m.created_at = j.value("created_at", "");
        m.config_digest = j.at("config_digest").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.input_refs = j.at("input_refs");
        return m;
    } catch (const json::exception& e) {
        throw Error(Errc::Schema, std::string("bad run manifest: ") + e.what());
    }
}

fs::path run_dir(const fs::path& store_root, const std::string& run_id) {
    return store_root / "runs" / run_id;
}

namespace {

std::optional<std::string> read_if_exists(const fs::path& p) {
    std::error_code ec;
    if (!fs::exists(p, ec))
        return std::nullopt;
    return io::read_file(p);
}

} // namespace

PersistOutcome persist(const fs::path& store_root, const RunManifest& manifest,
                       const std::map<std::string, std::string>& artifacts) {
    if (manifest.run_id != compute_run_id(manifest.command, manifest.config_digest, manifest.input_refs))
        throw Error(Errc::InvalidArgument, "manifest run_id does not match its content");
    PersistOutcome out;
    out.dir = run_dir(store_root, manifest.run_id);
    const fs::path manifest_path = out.dir / "manifest.json";

    if (const auto existing = read_if_exists(manifest_path)) {
        RunManifest old;
        try {
            old = manifest_from_json(json::parse(*existing));
        } catch (const std::exception& e) {
            throw Error(Errc::Conflict, fmt::format("{}: unreadable manifest ({})", manifest_path.string(), e.what()));
        }
        auto a = to_json(old), b = to_json(manifest);
        a.erase("created_at");
        b.erase("created_at");
        if (a != b)
            throw Error(Errc::Conflict, manifest_path.string() + " differs from this run's manifest");
        ++out.unchanged;
    }
    // Verify everything before writing anything.
    for (const auto& [name, content] : artifacts) {
        if (name.empty() || fs::path(name).is_absolute() || name.find("..") != std::string::npos)
            throw Error(Errc::InvalidArgument, "artifact name must be a relative path: " + name);
        if (const auto existing = read_if_exists(out.dir / name); existing && *existing != content)
            throw Error(Errc::Conflict,
                        fmt::format("{} exists with different content in run {}", name, manifest.run_id));
    }
    if (out.unchanged == 0) {
        io::write_file_atomic(manifest_path, to_json(manifest).dump(2) + "\n");
        ++out.written;
    }
    for (const auto& [name, content] : artifacts) {
        if (read_if_exists(out.dir / name)) {
            ++out.unchanged;
            continue;
        }
        io::write_file_atomic(out.dir / name, content);
        ++out.written;
    }
    return out;
}

std::string read_artifact(const fs::path& store_root, const std::string& run_id, const std::string& name) {
    const auto p = run_dir(store_root, run_id) / name;
    std::error_code ec;
    if (!fs::exists(p, ec))
        throw Error(Errc::MissingArtifact, fmt::format("run {} has no {}", run_id, name));
    return io::read_file(p);
}

// ---------------------------------------------------------------------------

json to_json(const ScoreRow& r) {
    return json{{"model", r.model},
                {"doc_id", r.doc_id},
                {"source_id", r.source_id},
                {"bucket", r.bucket},
                {"bucket_start", r.bucket_start.str()},
                {"bucket_end", r.bucket_end.str()},
                {"total_nll_nats", r.total_nll_nats},
                {"missing_tokens", r.missing_tokens},
                {"char_len", r.char_len},
                {"byte_len", r.byte_len}};
}

ScoreRow score_row_from_json(const json& j) {
    try {
        ScoreRow r;
        r.model = j.at("model").get<std::string>();
        r.doc_id = j.at("doc_id").get<std::string>();
        r.source_id = j.at("source_id").get<std::string>();
        r.bucket = j.at("bucket").get<int>();
        r.bucket_start = Date::parse(j.at("bucket_start").get<std::string>());
        r.bucket_end = Date::parse(j.at("bucket_end").get<std::string>());
        r.total_nll_nats = j.at("total_nll_nats").get<double>();
        r.missing_tokens = j.at("missing_tokens").get<std::size_t>();
        r.char_len = j.at("char_len").get<std::size_t>();
        r.byte_len = j.at("byte_len").get<std::size_t>();
        return r;
    } catch (const std::exception& e) {
        throw Error(Errc::Schema, std::string("bad score record: ") + e.what());
    }
}

namespace {

template <typename T, typename Fn>
std::vector<T> parse_lines(const std::string& jsonl, Fn&& fn) {
    std::vector<T> out;
    std::istringstream in(jsonl);
    for (std::string line; std::getline(in, line);) {
        if (text::trim(line).empty())
            continue;
        try {
            out.push_back(fn(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw Error(Errc::Schema, e.what());
        }
    }
    return out;
}

} // namespace

std::string scores_jsonl(const std::vector<ScoreRow>& rows) {
    std::string out;
    for (const auto& r : rows)
        out += canonical(to_json(r)) + "\n";
    return out;
}

std::vector<ScoreRow> parse_scores(const std::string& jsonl) {
    return parse_lines<ScoreRow>(jsonl, [](const json& j) { return score_row_from_json(j); });
}

std::string predictions_jsonl(const std::vector<event_eval::Prediction>& preds) {
    std::string out;
    for (const auto& p : preds)
        out += canonical(event_eval::to_json(p)) + "\n";
    return out;
}

std::vector<event_eval::Prediction> parse_predictions(const std::string& jsonl) {
    return parse_lines<event_eval::Prediction>(jsonl,
                                               [](const json& j) { return event_eval::prediction_from_json(j); });
}

std::vector<ScoreRow> score_snapshot(const gateway::Model& model, const corpus::CorpusSnapshot& snap,
                                     std::size_t workers) {
    std::map<std::string, const corpus::Document*> by_id;
    for (const auto& d : snap.documents)
        by_id.emplace(d.doc_id, &d);
    std::vector<corpus::Document> docs;
    std::vector<std::pair<std::string, int>> cells;
    for (const auto& [key, ids] : snap.entries) {
        if (key.bucket < 0)
            continue;
        for (const auto& id : ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end())
                throw Error(Errc::Schema, "snapshot references unknown document " + id);
            docs.push_back(*it->second);
            cells.emplace_back(key.source_id, key.bucket);
        }
    }
    const auto scored = gateway::score_documents(model, docs, workers);
    std::vector<ScoreRow> rows;
    rows.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const auto b = corpus::bucket_at(snap.grid, cells[i].second);
        rows.push_back(ScoreRow{model.spec().name, scored[i].doc_id, cells[i].first, b.index, b.start, b.end,
                                scored[i].total_nll_nats, scored[i].missing_tokens, scored[i].char_len,
                                scored[i].byte_len});
    }
    return rows;
}

} // namespace tempora::harness
