#include "tempora/harness.hpp"

#include "tempora/error.hpp"
#include "tempora/io.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>

namespace tempora::harness {

temporal::ReleaseFrame FrameDefaults::frame_for(Date release) const {
    temporal::ReleaseFrame f;
    f.release_date = release;
    f.present_window_months = present_window_months;
    f.past_bucket_months = past_bucket_months;
    f.past_gap_months = past_gap_months;
    f.future_interval_months = future_interval_months;
    f.exclude_past_gap = exclude_past_gap;
    temporal::validate(f);
    return f;
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::Config, what); }

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

Date date_field(const json& j, const char* key, const std::string& ctx) {
    const auto s = j.at(key).get<std::string>();
    if (!Date::valid(s))
        bad(fmt::format("{}: '{}' is not a date: {}", ctx, key, s));
    return Date::parse(s);
}

ModelConfig parse_model(const json& m, const std::filesystem::path& base) {
    ModelConfig mc;
    auto& s = mc.spec;
    s.name = m.at("name").get<std::string>();
    if (s.name.empty())
        bad("model with empty name");
    const std::string ctx = "model " + s.name;
    if (m.contains("release_date") && !m["release_date"].is_null())
        s.release_date = date_field(m, "release_date", ctx);
    if (m.contains("size_params") && !m["size_params"].is_null())
        s.size_params = m["size_params"].get<double>();
    s.backend_kind = gateway::backend_kind_from_string(m.value("backend", "mock_uniform"));
    s.endpoint = m.value("endpoint", "");
    s.auth_ref = m.value("auth_ref", "");
    s.max_context_tokens = m.value("max_context_tokens", std::size_t{2048});
    s.max_in_flight = m.value("in_flight", std::size_t{4});
    if (s.max_context_tokens < 2)
        bad(ctx + ": max_context_tokens must be >= 2");
    const bool http = s.backend_kind == gateway::BackendKind::logprob_http ||
                      s.backend_kind == gateway::BackendKind::chat_http;
    if (http && s.endpoint.empty())
        bad(ctx + ": HTTP backends need an endpoint");
    mc.mock = m.value("mock", json());
    if (mc.mock.is_string()) // mock settings kept in a separate JSON file
        mc.mock = json::parse(io::read_file(resolve_path(base, mc.mock.get<std::string>())));
    return mc;
}

collectors::SourceSpec parse_source(const json& j, const std::filesystem::path& base) {
    collectors::SourceSpec s;
    s.source_id = j.at("source_id").get<std::string>();
    s.kind = collectors::source_kind_from_string(j.at("kind").get<std::string>());
    s.endpoint = j.at("endpoint").get<std::string>();
    if (s.kind == collectors::SourceKind::file_import)
        s.endpoint = resolve_path(base, s.endpoint).string();
    s.category = corpus::category_from_string(j.value("category", "other"));
    s.max_requests_per_sec = j.value("max_requests_per_sec", 1.0);
    if (j.contains("extraction") && !j["extraction"].is_null())
        s.extraction = j["extraction"].get<std::string>();
    collectors::validate(s);
    return s;
}

} // namespace

Config parse_config(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object())
        bad("configuration must be a JSON object");
    Config c;
    c.base_dir = base_dir;
    try {
        c.store_root = resolve_path(base_dir, j.value("store_root", "store"));
        for (const auto& m : j.value("models", json::array()))
            c.models.push_back(parse_model(m, base_dir));
        for (const auto& s : j.value("sources", json::array()))
            c.sources.push_back(parse_source(s, base_dir));
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            c.grid.origin = date_field(g, "origin", "grid");
            c.grid.interval_months = g.value("interval_months", 2);
            if (g.contains("until") && !g["until"].is_null())
                c.grid.until = date_field(g, "until", "grid");
            if (c.grid.interval_months < 1)
                bad("grid.interval_months must be >= 1");
        }
        if (j.contains("frame")) {
            const auto& f = j["frame"];
            c.frame.present_window_months = f.value("present_window_months", 20);
            c.frame.past_bucket_months = f.value("past_bucket_months", 20);
            c.frame.past_gap_months = f.value("past_gap_months", 3);
            c.frame.future_interval_months = f.value("future_interval_months", 2);
            c.frame.exclude_past_gap = f.value("exclude_past_gap", false);
            c.frame.frame_for(Date{2000, 1, 1}); // validates the counts
        }
        if (j.contains("templates")) {
            const auto& t = j["templates"];
            c.template_name = t.is_array() ? t.at(0).get<std::string>() : t.get<std::string>();
        }
        event_eval::template_from_string(c.template_name);
        if (j.contains("sampling")) {
            c.sample_k = j["sampling"].value("k", std::size_t{50});
            c.sample_seed = j["sampling"].value("seed", std::uint64_t{0});
            if (c.sample_k < 1)
                bad("sampling.k must be >= 1");
        }
        if (j.contains("fixtures") && !j["fixtures"].is_null())
            c.fixtures = resolve_path(base_dir, j["fixtures"].get<std::string>());
        if (j.contains("questions") && !j["questions"].is_null())
            c.questions = resolve_path(base_dir, j["questions"].get<std::string>());
        if (j.contains("snapshot") && !j["snapshot"].is_null())
            c.snapshot = j["snapshot"].get<std::string>();
        if (j.contains("judge") && !j["judge"].is_null())
            c.judge = j["judge"].get<std::string>();
        if (j.contains("collect")) {
            const auto& k = j["collect"];
            if (k.contains("since") && !k["since"].is_null())
                c.collect_since = date_field(k, "since", "collect");
            c.collect_limit = k.value("limit", std::size_t{200});
        }
        c.workers = std::max<std::size_t>(1, j.value("workers", std::size_t{4}));
        c.denom = metrics::denom_mode_from_string(j.value("denom", "bytes"));
    } catch (const json::exception& e) {
        bad(std::string("invalid configuration: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::Config)
            throw;
        bad(e.what());
    }
    std::map<std::string, int> names;
    for (const auto& m : c.models)
        if (++names[m.spec.name] > 1)
            bad("duplicate model name " + m.spec.name);
    c.digest = text::sha256_hex(canonical(j));
    return c;
}

Config load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(Errc::Config, path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

gateway::Model make_model(const ModelConfig& mc) {
    return gateway::Model(mc.spec, gateway::make_backend(mc.spec, mc.mock));
}

} // namespace tempora::harness
