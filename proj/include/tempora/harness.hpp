#pragma once

#include "tempora/collectors.hpp"
#include "tempora/corpus.hpp"
#include "tempora/event_eval.hpp"
#include "tempora/metrics.hpp"
#include "tempora/model_gateway.hpp"
#include "tempora/stats.hpp"
#include "tempora/temporal.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tempora::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration (JSON; see docs/config.md)

struct ModelConfig {
    gateway::ModelSpec spec;
    json mock; // mock backend settings, null otherwise
};

struct FrameDefaults {
    int present_window_months = 20;
    int past_bucket_months = 20;
    int past_gap_months = 3;
    int future_interval_months = 2;
    bool exclude_past_gap = false;

    temporal::ReleaseFrame frame_for(Date release) const;
};

struct Config {
    std::filesystem::path base_dir; // relative paths resolve against this
    std::filesystem::path store_root;
    std::vector<ModelConfig> models;
    std::vector<collectors::SourceSpec> sources;
    corpus::PeriodGrid grid{Date{2020, 1, 1}, 2, std::nullopt};
    FrameDefaults frame;
    std::string template_name = "base";
    std::size_t sample_k = 50;
    std::uint64_t sample_seed = 0;
    std::optional<std::filesystem::path> fixtures;
    std::optional<std::filesystem::path> questions;
    std::optional<std::string> snapshot;
    std::optional<std::string> judge;
    std::optional<Date> collect_since;
    std::size_t collect_limit = 200;
    std::size_t workers = 4;
    metrics::DenomMode denom = metrics::DenomMode::utf8_bytes;
    std::string digest; // sha256 of the canonical form of the parsed file
};

Config parse_config(const json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

gateway::Model make_model(const ModelConfig& mc);

// ---------------------------------------------------------------------------
// Run store

struct RunManifest {
    std::string run_id;
    std::string created_at;
    std::string config_digest;
    std::string command;
    json input_refs = json::object();
};

// Canonical serialization: compact JSON with keys sorted, UTF-8, no created_at.
std::string canonical(const json& j);
std::string compute_run_id(const std::string& command, const std::string& config_digest, const json& input_refs);
RunManifest make_manifest(std::string command, std::string config_digest, json input_refs, std::string created_at);

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

struct PersistOutcome {
    std::filesystem::path dir;
    std::size_t written = 0;   // files created
    std::size_t unchanged = 0; // files already present with identical content
    bool noop() const { return written == 0; }
};

// Writes runs/<run_id>/manifest.json plus the given artifacts (relative paths).
// Existing files must match byte for byte (the manifest ignoring created_at),
// otherwise Conflict.
PersistOutcome persist(const std::filesystem::path& store_root, const RunManifest& manifest,
                       const std::map<std::string, std::string>& artifacts);

std::filesystem::path run_dir(const std::filesystem::path& store_root, const std::string& run_id);
std::string read_artifact(const std::filesystem::path& store_root, const std::string& run_id,
                          const std::string& name); // MissingArtifact when absent

// ---------------------------------------------------------------------------
// Scoring artefacts

struct ScoreRow {
    std::string model;
    std::string doc_id;
    std::string source_id;
    int bucket = 0;
    Date bucket_start;
    Date bucket_end;
    double total_nll_nats = 0.0;
    std::size_t missing_tokens = 0;
    std::size_t char_len = 0;
    std::size_t byte_len = 0;
};

json to_json(const ScoreRow& r);
ScoreRow score_row_from_json(const json& j);
std::string scores_jsonl(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> parse_scores(const std::string& jsonl);

// Scores every document of the snapshot with the model (pre-grid documents are skipped).
std::vector<ScoreRow> score_snapshot(const gateway::Model& model, const corpus::CorpusSnapshot& snap,
                                     std::size_t workers);

std::string predictions_jsonl(const std::vector<event_eval::Prediction>& preds);
std::vector<event_eval::Prediction> parse_predictions(const std::string& jsonl);

// ---------------------------------------------------------------------------
// Analysis

struct ModelInfo {
    std::string name;
    std::optional<Date> release_date;
    std::optional<double> size_params;
};

struct AnalysisInputs {
    std::vector<ModelInfo> models;
    std::vector<ScoreRow> scores;
    std::vector<event_eval::Prediction> predictions;
    std::vector<event_eval::Question> questions;
    FrameDefaults frame;
    metrics::DenomMode denom = metrics::DenomMode::utf8_bytes;
};

// One BPC series per (model, source) with per-bucket micro-aggregated BPC.
std::map<std::pair<std::string, std::string>, temporal::BpcSeries> build_series(const std::vector<ScoreRow>& scores,
                                                                                metrics::DenomMode denom);

json analyze(const AnalysisInputs& in);

// ---------------------------------------------------------------------------
// Reports

std::string render_bias_cell(const stats::TestResult& r);

struct DeclineRow {
    std::string model;
    double pre_acc = 0.0;
    double post_acc = 0.0;
    std::optional<std::size_t> n_pre;
    std::optional<std::size_t> n_post;
};

using Table = std::vector<std::vector<std::string>>; // first row is the header

std::string render_markdown(const Table& t);
std::string render_csv(const Table& t);
Table parse_csv(const std::string& csv);

Table decline_table(const std::vector<DeclineRow>& rows);
Table bias_table(const json& analysis);
Table accuracy_table(const json& analysis);
Table tbi_table(const json& analysis);
Table decline_table(const json& analysis);

// reports/<name>.md and reports/<name>.csv for bias, accuracy, tbi and decline.
std::map<std::string, std::string> render_reports(const json& analysis);

// ---------------------------------------------------------------------------
// Attribute correlation

struct ModelAttributeRow {
    std::string model_name;
    std::optional<double> size_params;
    std::optional<Date> release_date;
    std::map<std::string, double> external_scores;
};

struct TrendRow {
    std::string model;
    double tbi = 0.0;
};

std::vector<ModelAttributeRow> parse_attribute_csv(const std::string& csv);
std::vector<TrendRow> parse_trend_csv(const std::string& csv); // header "model,tbi"

// Parameter count from a model name such as "Llama-2-13B" or "Qwen-1.8B".
std::optional<double> size_from_name(const std::string& name);

struct CorrelationCell {
    std::string attribute;
    std::optional<double> r; // absent when undefined (fewer than 2 pairs or zero variance)
    std::size_t n = 0;
};

// Joins on model name; repeated names pair up in order of occurrence.
std::vector<CorrelationCell> correlate_attributes(const std::vector<TrendRow>& trends,
                                                  std::vector<ModelAttributeRow> attrs, bool size_from_names);

Table correlation_table(const std::vector<CorrelationCell>& cells);

} // namespace tempora::harness
