// tempora: collect corpora, score and query models, analyse and report.

#include "tempora/collectors.hpp"
#include "tempora/error.hpp"
#include "tempora/harness.hpp"
#include "tempora/io.hpp"
#include "tempora/recency.hpp"
#include "tempora/text.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace tempora;
using harness::json;

namespace {

struct Options {
    std::string config;
    std::string run_id;
    std::string snapshot;
    std::string template_name;
    std::string denom;
    int interval_months = 0;
    bool offline = false;
    // correlate
    std::string trends;
    std::string attributes;
    std::string dataset;
    bool size_from_name = false;
};

harness::Config load(const Options& o) {
    if (o.config.empty())
        throw Error(Errc::Config, "--config is required");
    auto c = harness::load_config(o.config);
    if (!o.template_name.empty()) {
        event_eval::template_from_string(o.template_name);
        c.template_name = o.template_name;
    }
    if (!o.denom.empty())
        c.denom = metrics::denom_mode_from_string(o.denom);
    if (o.interval_months > 0) {
        c.grid.interval_months = o.interval_months;
        c.frame.future_interval_months = o.interval_months;
    }
    if (!o.snapshot.empty())
        c.snapshot = o.snapshot;
    return c;
}

std::string now_stamp() { return format_timestamp(std::chrono::system_clock::now()); }

json evaluate_inputs(const harness::Config& c) {
    json models = json::array();
    for (const auto& m : c.models)
        models.push_back(m.spec.name);
    json refs{{"models", models},
              {"template", c.template_name},
              {"denom", std::string(metrics::to_string(c.denom))},
              {"future_interval_months", c.frame.future_interval_months}};
    refs["snapshot"] = c.snapshot ? json(*c.snapshot) : json(nullptr);
    refs["questions"] = c.questions ? json(text::sha256_hex(io::read_file(*c.questions))) : json(nullptr);
    return refs;
}

harness::RunManifest evaluate_manifest(const harness::Config& c) {
    return harness::make_manifest("evaluate", c.digest, evaluate_inputs(c), now_stamp());
}

// Manifest of an existing run (for analyze/report), or the one implied by the config.
harness::RunManifest existing_manifest(const harness::Config& c, const Options& o) {
    const std::string id = o.run_id.empty() ? evaluate_manifest(c).run_id : o.run_id;
    return harness::manifest_from_json(json::parse(harness::read_artifact(c.store_root, id, "manifest.json")));
}

void report_persist(const harness::PersistOutcome& p, const std::string& run_id) {
    fmt::print("run {} ({}): {} written, {} unchanged\n", run_id, p.dir.string(), p.written, p.unchanged);
}

int cmd_collect(const Options& o) {
    const auto c = load(o);
    if (c.sources.empty())
        throw Error(Errc::Config, "no sources configured");
    auto transport = collectors::make_transport(o.offline, c.fixtures);
    const auto results = collectors::fetch_all(c.sources, *transport, c.collect_since, c.collect_limit, c.workers);
    std::vector<corpus::Document> docs;
    std::size_t rejected = 0, errors = 0, records = 0;
    for (const auto& s : c.sources) {
        const auto& r = results.at(s.source_id);
        for (const auto& e : r.errors)
            fmt::print(stderr, "{}: {} {}{}: {}\n", s.source_id, errc_name(e.code), e.url,
                       e.status ? fmt::format(" (HTTP {})", e.status) : "", e.detail);
        errors += r.errors.size();
        records += r.records.size();
        auto batch = collectors::to_documents(r.records, s);
        rejected += batch.rejected;
        fmt::print("{}: {} records, {} documents, {} rejected, {} errors\n", s.source_id, r.records.size(),
                   batch.documents.size(), batch.rejected, r.errors.size());
        docs.insert(docs.end(), std::make_move_iterator(batch.documents.begin()),
                    std::make_move_iterator(batch.documents.end()));
    }
    if (records == 0 && errors > 0)
        throw Error(Errc::Transport, "every source failed");
    const auto snap = corpus::make_snapshot(docs, c.grid, c.sample_k, c.sample_seed,
                                            format_timestamp(transport->now()));
    const fs::path dir = c.store_root / "snapshots" / snap.snapshot_id;
    corpus::write_snapshot(snap, dir.string());
    if (c.judge) {
        const auto it = std::find_if(c.models.begin(), c.models.end(),
                                     [&](const auto& m) { return m.spec.name == *c.judge; });
        if (it == c.models.end())
            throw Error(Errc::Config, "judge model '" + *c.judge + "' is not configured");
        const auto judge = harness::make_model(*it);
        std::vector<corpus::Recency> labels;
        json per_doc = json::object();
        for (const auto& d : snap.documents) {
            const auto r = corpus::classify_recency(judge, d);
            if (r.warning)
                fmt::print(stderr, "recency {}: {}\n", d.doc_id.substr(0, 12), *r.warning);
            labels.push_back(r.label);
            per_doc[d.doc_id] = std::string(corpus::to_string(r.label));
        }
        json shares = json::object();
        for (const auto& [label, pct] : corpus::recency_proportions(labels))
            shares[std::string(corpus::to_string(label))] = pct;
        io::write_file_atomic(dir / "recency.json",
                              json{{"judge", *c.judge}, {"percent", shares}, {"labels", per_doc}}.dump(2) + "\n");
    }
    fmt::print("snapshot {}: {} documents sampled ({} rejected, {} fetch errors)\n", snap.snapshot_id,
               snap.documents.size(), rejected, errors);
    return 0;
}

int cmd_score(const Options& o) {
    const auto c = load(o);
    if (!c.snapshot)
        throw Error(Errc::Config, "score needs --snapshot (or \"snapshot\" in the config)");
    const auto snap = corpus::read_snapshot((c.store_root / "snapshots" / *c.snapshot).string());
    std::vector<harness::ScoreRow> rows;
    for (const auto& mc : c.models) {
        const auto model = harness::make_model(mc);
        if (!model.backend().supports_scoring()) {
            fmt::print(stderr, "{}: backend cannot score, skipped\n", mc.spec.name);
            continue;
        }
        auto r = harness::score_snapshot(model, snap, c.workers);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    const auto manifest = evaluate_manifest(c);
    report_persist(harness::persist(c.store_root, manifest, {{"scores.jsonl", harness::scores_jsonl(rows)}}),
                   manifest.run_id);
    return 0;
}

int cmd_predict(const Options& o) {
    const auto c = load(o);
    if (!c.questions)
        throw Error(Errc::Config, "no \"questions\" file configured");
    const auto questions = event_eval::load_questions(c.questions->string());
    const auto& tpl = event_eval::builtin_template(event_eval::template_from_string(c.template_name));
    std::vector<event_eval::Prediction> preds;
    for (const auto& mc : c.models) {
        const auto model = harness::make_model(mc);
        if (!model.backend().supports_completion()) {
            fmt::print(stderr, "{}: backend cannot complete, skipped\n", mc.spec.name);
            continue;
        }
        auto p = event_eval::evaluate(model, questions, tpl, {{}, {}, c.workers});
        preds.insert(preds.end(), p.begin(), p.end());
    }
    const auto manifest = evaluate_manifest(c);
    report_persist(
        harness::persist(c.store_root, manifest, {{"predictions.jsonl", harness::predictions_jsonl(preds)}}),
        manifest.run_id);
    return 0;
}

int cmd_analyze(const Options& o) {
    const auto c = load(o);
    const auto manifest = existing_manifest(c, o);
    const auto dir = harness::run_dir(c.store_root, manifest.run_id);
    harness::AnalysisInputs in;
    for (const auto& m : c.models)
        in.models.push_back({m.spec.name, m.spec.release_date, m.spec.size_params});
    in.frame = c.frame;
    in.denom = c.denom;
    const bool have_scores = fs::exists(dir / "scores.jsonl");
    const bool have_preds = fs::exists(dir / "predictions.jsonl");
    if (!have_scores && !have_preds)
        throw Error(Errc::MissingArtifact, "run " + manifest.run_id + " has neither scores.jsonl nor predictions.jsonl");
    if (have_scores)
        in.scores = harness::parse_scores(io::read_file(dir / "scores.jsonl"));
    if (have_preds) {
        in.predictions = harness::parse_predictions(io::read_file(dir / "predictions.jsonl"));
        if (!c.questions)
            throw Error(Errc::Config, "predictions need the configured questions file");
        in.questions = event_eval::load_questions(c.questions->string());
    }
    const auto analysis = harness::analyze(in);
    report_persist(harness::persist(c.store_root, manifest, {{"analysis.json", analysis.dump(2) + "\n"}}),
                   manifest.run_id);
    return 0;
}

int cmd_report(const Options& o) {
    const auto c = load(o);
    const auto manifest = existing_manifest(c, o);
    const auto analysis = json::parse(harness::read_artifact(c.store_root, manifest.run_id, "analysis.json"));
    const auto files = harness::render_reports(analysis);
    report_persist(harness::persist(c.store_root, manifest, files), manifest.run_id);
    std::cout << files.at("reports/decline.md");
    return 0;
}

int cmd_correlate(const Options& o) {
    if (o.attributes.empty())
        throw Error(Errc::Config, "--attributes is required");
    std::vector<harness::TrendRow> trends;
    std::string trends_ref;
    std::optional<harness::Config> c;
    if (!o.config.empty())
        c = load(o);
    if (!o.trends.empty()) {
        const auto content = io::read_file(o.trends);
        trends = harness::parse_trend_csv(content);
        trends_ref = text::sha256_hex(content);
    } else {
        if (!c)
            throw Error(Errc::Config, "correlate needs --trends or --config with a run");
        const auto manifest = existing_manifest(*c, o);
        const auto analysis = json::parse(harness::read_artifact(c->store_root, manifest.run_id, "analysis.json"));
        for (const auto& m : analysis.at("models"))
            for (const auto& s : m.at("series"))
                if ((o.dataset.empty() || s.at("dataset") == o.dataset) && !s.at("tbi").is_null())
                    trends.push_back({m.at("name").get<std::string>(), s.at("tbi").get<double>()});
        trends_ref = manifest.run_id + (o.dataset.empty() ? "" : "/" + o.dataset);
    }
    const auto attr_content = io::read_file(o.attributes);
    const auto cells =
        harness::correlate_attributes(trends, harness::parse_attribute_csv(attr_content), o.size_from_name);
    const auto table = harness::correlation_table(cells);
    const std::string md = harness::render_markdown(table);
    std::cout << md;
    if (c) {
        const json refs{{"trends", trends_ref},
                        {"attributes", text::sha256_hex(attr_content)},
                        {"size_from_name", o.size_from_name}};
        const auto manifest = harness::make_manifest("correlate", c->digest, refs, now_stamp());
        report_persist(harness::persist(c->store_root, manifest,
                                        {{"reports/correlation.md", "# Attribute correlation with TBI\n\n" + md},
                                         {"reports/correlation.csv", harness::render_csv(table)}}),
                       manifest.run_id);
    }
    return 0;
}

int exit_code(Errc code) {
    switch (code) {
    case Errc::Transport:
    case Errc::AuthMissing:
    case Errc::RobotsDisallowed: return 3;
    default: return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal generalisation evaluation harness"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Configuration file (JSON)");
        sub->add_flag("--offline", o.offline, "Use recorded fixtures instead of the network");
        sub->add_option("--template", o.template_name, "Prompt template name");
        sub->add_option("--denom", o.denom, "BPC denominator")->check(CLI::IsMember({"bytes", "chars"}));
        sub->add_option("--interval-months", o.interval_months, "Bucket / window length in months")
            ->check(CLI::PositiveNumber);
        sub->add_option("--snapshot", o.snapshot, "Corpus snapshot id");
        sub->add_option("--run-id", o.run_id, "Existing run id");
    };
    std::map<std::string, std::function<int(const Options&)>> handlers{
        {"collect", cmd_collect}, {"score", cmd_score},   {"predict", cmd_predict},
        {"analyze", cmd_analyze}, {"report", cmd_report}, {"correlate", cmd_correlate}};
    const std::map<std::string, std::string> help{
        {"collect", "Fetch sources and write a corpus snapshot"},
        {"score", "Score a snapshot with every scoring-capable model"},
        {"predict", "Ask every completion-capable model the configured questions"},
        {"analyze", "Compute BPC series, trends and hypothesis tests for a run"},
        {"report", "Render markdown and CSV tables for a run"},
        {"correlate", "Correlate model attributes with TBI"}};
    for (const auto& [name, _] : handlers) {
        auto* sub = app.add_subcommand(name, help.at(name));
        common(sub);
        if (name == "correlate") {
            sub->add_option("--trends", o.trends, "CSV with header model,tbi");
            sub->add_option("--attributes", o.attributes, "CSV with header model,size_params,release_date,...");
            sub->add_option("--dataset", o.dataset, "Dataset whose TBI is used when reading a run");
            sub->add_flag("--size-from-name", o.size_from_name, "Infer missing sizes from names such as '13B'");
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        for (const auto& [name, fn] : handlers)
            if (app.got_subcommand(name))
                return fn(o);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.code() == Errc::Config && o.config.empty() ? 1 : exit_code(e.code());
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
    return 1;
}
