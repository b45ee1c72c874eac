#include "tempora/harness.hpp"

#include "tempora/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace tempora::harness {

namespace {

struct BucketAgg {
    Date start, end;
    std::vector<metrics::BpcValue> values;
};

using AggMap = std::map<std::pair<std::string, std::string>, std::map<int, BucketAgg>>;

AggMap aggregate(const std::vector<ScoreRow>& scores, metrics::DenomMode denom) {
    AggMap out;
    for (const auto& r : scores) {
        if (r.bucket < 0)
            continue;
        auto& b = out[{r.model, r.source_id}][r.bucket];
        b.start = r.bucket_start;
        b.end = r.bucket_end;
        b.values.push_back(metrics::bpc(r.total_nll_nats,
                                        denom == metrics::DenomMode::utf8_bytes ? r.byte_len : r.char_len, denom,
                                        r.missing_tokens));
    }
    return out;
}

json opt(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json acc_json(const metrics::AccSample& a) {
    return json{{"n_correct", a.n_correct}, {"n_total", a.n_total}, {"acc", a.acc}};
}

json test_json(const stats::TestResult& t) {
    json j{{"test", std::string(stats::to_string(t.test))},
           {"z", finite_or_null(t.z)},
           {"p", t.p},
           {"significance", std::string(stats::to_string(t.significance))},
           {"label", std::string(stats::to_string(t.label))},
           {"a", acc_json(t.acc_a)},
           {"b", acc_json(t.acc_b)}};
    j["warning"] = t.warning ? json(*t.warning) : json(nullptr);
    return j;
}

json series_json(const temporal::BpcSeries& s, const std::map<int, BucketAgg>& agg, const std::optional<Date>& release,
                 const FrameDefaults& frame_defaults) {
    json points = json::array();
    for (const auto& p : s.points) {
        const auto& b = agg.at(p.index);
        std::size_t missing = 0;
        for (const auto& v : b.values)
            missing += v.missing_tokens;
        points.push_back({{"index", p.index},
                          {"start", p.start.str()},
                          {"end", p.end.str()},
                          {"bpc", p.bpc},
                          {"bpc_macro", metrics::aggregate_bpc(b.values, metrics::Aggregation::macro)},
                          {"nll_bits", p.nll_bits},
                          {"denom", p.denom},
                          {"n_docs", b.values.size()},
                          {"missing_tokens", missing}});
    }
    json j{{"dataset", s.dataset_id}, {"points", points}};
    json notes = json::array();
    j["tbi"] = nullptr;
    j["intercept"] = nullptr;
    j["tbi_post"] = nullptr;
    j["base_bpc"] = nullptr;
    j["changes"] = json::object();
    for (int m : temporal::kChangeOffsets)
        j["changes"][std::to_string(m)] = nullptr;
    try {
        const auto t = temporal::fit_tbi(s);
        j["tbi"] = t.tbi;
        j["intercept"] = t.intercept;
    } catch (const Error& e) {
        notes.push_back(std::string("tbi: ") + e.what());
    }
    if (release) {
        try {
            const Date far = release->add_months(12 * 1000);
            j["tbi_post"] = temporal::fit_tbi(s, temporal::DateRange{*release, far}).tbi;
        } catch (const Error& e) {
            notes.push_back(std::string("tbi_post: ") + e.what());
        }
        try {
            const auto r = temporal::base_and_changes(s, frame_defaults.frame_for(*release));
            j["base_bpc"] = opt(r.base_bpc);
            for (const auto& [m, v] : r.changes)
                j["changes"][std::to_string(m)] = opt(v);
        } catch (const Error& e) {
            notes.push_back(std::string("base: ") + e.what());
        }
    }
    j["notes"] = notes;
    return j;
}

json accuracy_json(const std::vector<event_eval::Prediction>& preds, const std::vector<event_eval::Question>& qs,
                   const temporal::ReleaseFrame& frame) {
    const auto wa = event_eval::window_accuracy(preds, qs, frame);
    std::size_t unparsed = 0;
    for (const auto& p : preds)
        if (p.scoreable() && p.unparsed)
            ++unparsed;
    json j;
    j["n_predictions"] = preds.size();
    j["skipped"] = wa.skipped;
    j["unparsed"] = unparsed;
    j["pre"] = wa.pooled_pre ? acc_json(*wa.pooled_pre) : json(nullptr);

    json windows = json::array();
    std::optional<metrics::AccSample> present;
    for (const auto& [label, acc] : wa.by_label) {
        json w{{"label", temporal::to_string(label)}, {"acc", acc_json(acc)}};
        if (label.kind == temporal::PeriodLabel::Kind::Present)
            present = acc;
        if (label.kind == temporal::PeriodLabel::Kind::Future) {
            w["window"] = label.window;
            w["test"] = wa.pooled_pre ? test_json(stats::degeneration_test(*wa.pooled_pre, acc)) : json(nullptr);
        }
        windows.push_back(std::move(w));
    }
    j["windows"] = windows;

    json bias = json::array();
    for (const auto& [label, acc] : wa.by_label) {
        if (label.kind != temporal::PeriodLabel::Kind::Past || !present)
            continue;
        bias.push_back({{"bucket", std::string(temporal::to_string(label.past))},
                        {"test", test_json(stats::bias_test(acc, *present))}});
    }
    j["bias"] = bias;

    j["decline"] = nullptr;
    if (wa.pooled_pre) {
        for (const auto& [label, acc] : wa.by_label) {
            if (label.kind != temporal::PeriodLabel::Kind::Future)
                continue;
            try {
                const auto d = metrics::classify_decline(wa.pooled_pre->acc, acc.acc);
                j["decline"] = {{"pre", acc_json(*wa.pooled_pre)},
                                {"post", acc_json(acc)},
                                {"post_label", temporal::to_string(label)},
                                {"decline_abs", d.decline_abs},
                                {"decline_pct", d.decline_pct},
                                {"class", std::string(metrics::to_string(d.decline_class))}};
            } catch (const Error&) {
                // zero pre-release accuracy: no decline to report
            }
            break;
        }
    }
    return j;
}

} // namespace

std::map<std::pair<std::string, std::string>, temporal::BpcSeries> build_series(const std::vector<ScoreRow>& scores,
                                                                                metrics::DenomMode denom) {
    std::map<std::pair<std::string, std::string>, temporal::BpcSeries> out;
    for (const auto& [key, buckets] : aggregate(scores, denom)) {
        auto& s = out[key];
        s.model_name = key.first;
        s.dataset_id = key.second;
        for (const auto& [index, b] : buckets) {
            temporal::BpcPoint p;
            p.index = index;
            p.start = b.start;
            p.end = b.end;
            for (const auto& v : b.values) {
                p.nll_bits += v.nll_bits;
                p.denom += static_cast<double>(v.denom);
            }
            p.bpc = metrics::aggregate_bpc(b.values, metrics::Aggregation::micro);
            s.points.push_back(p);
            s.interval_months = std::max(1, static_cast<int>(std::lround(
                                                (b.end.serial() - b.start.serial()) / 30.44)));
        }
    }
    return out;
}

json analyze(const AnalysisInputs& in) {
    const auto series = build_series(in.scores, in.denom);
    const auto agg = aggregate(in.scores, in.denom);
    json models = json::array();
    for (const auto& m : in.models) {
        json mj{{"name", m.name}};
        mj["release_date"] = m.release_date ? json(m.release_date->str()) : json(nullptr);
        mj["size_params"] = opt(m.size_params);
        json sj = json::array();
        for (const auto& [key, s] : series)
            if (key.first == m.name)
                sj.push_back(series_json(s, agg.at(key), m.release_date, in.frame));
        mj["series"] = sj;

        std::vector<event_eval::Prediction> preds;
        for (const auto& p : in.predictions)
            if (p.model_name == m.name)
                preds.push_back(p);
        mj["accuracy"] = nullptr;
        if (!preds.empty() && m.release_date)
            mj["accuracy"] = accuracy_json(preds, in.questions, in.frame.frame_for(*m.release_date));
        models.push_back(std::move(mj));
    }
    return json{{"denom_mode", std::string(metrics::to_string(in.denom))},
                {"future_interval_months", in.frame.future_interval_months},
                {"models", models}};
}

} // namespace tempora::harness
