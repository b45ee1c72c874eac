#include "tempora/harness.hpp"
#include "tempora/text.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tempora;
using namespace tempora::harness;
using metrics::make_acc;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("tempora_unit_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return Errc::Config;
}

// A small two-model analysis input: model "a" with a flat series and answers that
// are always right, model "b" whose BPC grows and whose answers fail after release.
AnalysisInputs small_inputs() {
    AnalysisInputs in;
    in.models = {{"a", Date{2023, 1, 1}, 7e9}, {"b", Date{2023, 1, 1}, 13e9}};
    const Date origin{2022, 1, 1};
    for (int i = 0; i < 12; ++i)
        for (const char* m : {"a", "b"}) {
            ScoreRow r;
            r.model = m;
            r.doc_id = fmt::format("d{}", i);
            r.source_id = "news";
            r.bucket = i;
            r.bucket_start = origin.add_months(2 * i);
            r.bucket_end = origin.add_months(2 * i + 2);
            r.byte_len = r.char_len = 1000;
            r.total_nll_nats = (std::string(m) == "a" ? 500.0 : 500.0 + 10.0 * i) * std::log(2.0);
            in.scores.push_back(r);
        }
    int k = 0;
    for (const char* close : {"2020-06-15", "2022-06-15", "2023-02-15", "2023-04-20"})
        for (int i = 0; i < 20; ++i, ++k) {
            nlohmann::json j = {{"question_id", fmt::format("q{}", k)},
                                {"title", "t"},
                                {"open_at", "2019-01-01"},
                                {"close_at", close},
                                {"options",
                                 {{{"label", "A"}, {"text", "yes"}, {"correct", true}},
                                  {{"label", "B"}, {"text", "no"}, {"correct", false}}}}};
            in.questions.push_back(event_eval::question_from_json(j));
            for (const char* m : {"a", "b"}) {
                event_eval::Prediction p;
                p.question_id = j["question_id"];
                p.model_name = m;
                p.template_name = "base";
                const bool ok = std::string(m) == "a" || std::string(close) < "2023" || i < 5;
                p.parsed_label = ok ? 'A' : 'B';
                p.correct = ok;
                in.predictions.push_back(p);
            }
        }
    return in;
}

} // namespace

TEST_CASE("canonical serialization and run ids") {
    const json a = json::parse(R"({"b":1,"a":{"y":[1,2],"x":"é"}})");
    const json b = json::parse(R"({"a":{"x":"é","y":[1,2]},"b":1})");
    CHECK(canonical(a) == canonical(b));
    CHECK(canonical(a) == R"({"a":{"x":"é","y":[1,2]},"b":1})");
    const auto id = compute_run_id("evaluate", "abc", a);
    CHECK(id.size() == 16);
    CHECK(id == compute_run_id("evaluate", "abc", b));
    CHECK(id != compute_run_id("evaluate", "abd", a));
    CHECK(id != compute_run_id("correlate", "abc", a));
}

TEST_CASE("persist is idempotent and detects tampering") {
    const auto root = fresh_dir("persist");
    const auto m1 = make_manifest("evaluate", "digest", json{{"k", 1}}, "2024-01-01T00:00:00Z");
    const std::map<std::string, std::string> arts{{"scores.jsonl", "{\"x\":1}\n"}, {"reports/a.md", "# A\n"}};
    const auto first = persist(root, m1, arts);
    CHECK(first.written == 3);
    CHECK_FALSE(first.noop());

    const auto m2 = make_manifest("evaluate", "digest", json{{"k", 1}}, "2025-05-05T00:00:00Z");
    CHECK(m2.run_id == m1.run_id);
    const auto second = persist(root, m2, arts);
    CHECK(second.noop());
    CHECK(second.unchanged == 3);
    CHECK(std::distance(fs::directory_iterator(root / "runs"), fs::directory_iterator{}) == 1);

    const auto m3 = make_manifest("evaluate", "other", json{{"k", 1}}, "2024-01-01T00:00:00Z");
    CHECK(m3.run_id != m1.run_id);

    std::ofstream(run_dir(root, m1.run_id) / "scores.jsonl") << "{\"x\":2}\n";
    CHECK(code_of([&] { persist(root, m1, arts); }) == Errc::Conflict);
    // Nothing else was written by the failed attempt.
    CHECK(code_of([&] { persist(root, m1, {{"scores.jsonl", "{\"x\":1}\n"}, {"new.txt", "n"}}); }) == Errc::Conflict);
    CHECK_FALSE(fs::exists(run_dir(root, m1.run_id) / "new.txt"));

    CHECK(read_artifact(root, m1.run_id, "reports/a.md") == "# A\n");
    CHECK(code_of([&] { read_artifact(root, m1.run_id, "missing.json"); }) == Errc::MissingArtifact);
    fs::remove_all(root);
}

TEST_CASE("manifest round trip") {
    const auto m = make_manifest("evaluate", "d", json{{"models", {"a"}}}, "2024-01-01T00:00:00Z");
    const auto back = manifest_from_json(to_json(m));
    CHECK(back.run_id == m.run_id);
    CHECK(back.command == m.command);
    CHECK(back.input_refs == m.input_refs);
}

TEST_CASE("bias cells") {
    stats::TestResult r;
    r.test = stats::TestKind::Nostalgia_T2;
    r.p = 0.03;
    r.significance = stats::significance(r.p);
    r.label = stats::Label::arrow_back;
    CHECK(render_bias_cell(r) == "← †");
    r.test = stats::TestKind::Neophilia_T1;
    r.p = 0.004;
    r.significance = stats::significance(r.p);
    r.label = stats::Label::arrow_forward;
    CHECK(render_bias_cell(r) == "→ ††");
    CHECK(render_bias_cell(stats::bias_test(make_acc(52, 100), make_acc(50, 100))) == "−");
    CHECK(render_bias_cell(stats::bias_test(make_acc(300, 500), make_acc(200, 500))) == "← †††");
}

TEST_CASE("decline table rendering") {
    const auto t = decline_table(std::vector<DeclineRow>{{"GPT-4-231106", 0.66, 0.42, 100, 50},
                                                         {"Stable-1", 0.50, 0.40, {}, {}},
                                                         {"Bad-1", 0.50, 0.20, {}, {}}});
    REQUIRE(t.size() == 4);
    CHECK(t[1][0] == "GPT-4-231106");
    CHECK(t[1][1] == "0.66 (n=100)");
    CHECK(t[1][4] == "36.36%");
    CHECK(t[1][5] == "moderate");
    CHECK(t[2][0] == "**Stable-1**");
    CHECK(t[3][0] == "_Bad-1_");
}

TEST_CASE("markdown and CSV carry identical cells") {
    const Table t{{"Model", "Value", "Note"}, {"a,b", "0.45**", "say \"hi\""}, {"c", "-", "← †"}};
    CHECK(parse_csv(render_csv(t)) == t);
    const auto md = render_markdown(t);
    for (const auto& row : t)
        for (const auto& cell : row)
            CHECK(md.find(cell) != std::string::npos);
    // Aligned: every line has the same display width.
    std::vector<std::string> lines;
    std::istringstream in(md);
    for (std::string l; std::getline(in, l);)
        lines.push_back(l);
    REQUIRE(lines.size() == 4);
    for (const auto& l : lines)
        CHECK(text::utf8_length(l) == text::utf8_length(lines[0]));
}

TEST_CASE("analysis and reports") {
    const auto in = small_inputs();
    const auto a = analyze(in);
    REQUIRE(a["models"].size() == 2);
    const auto& ma = a["models"][0];
    const auto& mb = a["models"][1];
    CHECK(ma["series"][0]["tbi"].get<double>() == doctest::Approx(0.0));
    CHECK(mb["series"][0]["tbi"].get<double>() == doctest::Approx(0.01));
    CHECK(ma["accuracy"]["pre"]["acc"].get<double>() == 1.0);
    CHECK(mb["accuracy"]["decline"]["post"]["acc"].get<double>() == doctest::Approx(0.25));

    const auto reports = render_reports(a);
    for (const char* name : {"bias", "accuracy", "tbi", "decline"}) {
        REQUIRE(reports.count(fmt::format("reports/{}.md", name)));
        REQUIRE(reports.count(fmt::format("reports/{}.csv", name)));
    }
    CHECK(reports == render_reports(analyze(in))); // pure function of the inputs
    CHECK(reports.at("reports/decline.md").find("_b_") != std::string::npos);
    CHECK(reports.at("reports/decline.md").find("**a**") != std::string::npos);
    CHECK(reports.at("reports/tbi.md").find("utf8_bytes") != std::string::npos);

    // CSV cells equal the markdown table's cells.
    const auto acc = accuracy_table(a);
    CHECK(parse_csv(reports.at("reports/accuracy.csv")) == acc);
    for (const auto& row : acc)
        for (const auto& cell : row)
            CHECK(reports.at("reports/accuracy.md").find(cell) != std::string::npos);
    // Every accuracy cell carries its n.
    for (std::size_t i = 1; i < acc.size(); ++i)
        for (std::size_t j = 1; j < acc[i].size(); ++j)
            if (acc[i][j] != "-")
                CHECK(acc[i][j].find("(n=") != std::string::npos);
}

TEST_CASE("a model without post-release buckets has dashes at every offset") {
    auto in = small_inputs();
    in.models = {{"late", Date{2024, 1, 15}, std::nullopt}};
    for (auto& r : in.scores)
        r.model = "late";
    in.scores.erase(in.scores.begin() + 12, in.scores.end());
    in.predictions.clear();
    const auto t = tbi_table(analyze(in));
    REQUIRE(t.size() == 2);
    const auto& header = t[0];
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j].find("3m") != std::string::npos || header[j].find("6m") != std::string::npos ||
            header[j].find("9m") != std::string::npos || header[j].find("12m") != std::string::npos)
            CHECK(t[1][j] == "-");
}

TEST_CASE("trend and attribute CSV parsing") {
    const auto trends = parse_trend_csv("model,tbi\nm1,0.5\nm2,-0.25\n");
    REQUIRE(trends.size() == 2);
    CHECK(trends[1].tbi == -0.25);
    const auto attrs = parse_attribute_csv("model,size_params,release_date,MMLU\nm1,7e9,2023-01-01,45.5\nm2,,2023-06-01,\n");
    REQUIRE(attrs.size() == 2);
    CHECK(attrs[0].size_params == std::optional<double>(7e9));
    CHECK(attrs[0].external_scores.at("MMLU") == 45.5);
    CHECK_FALSE(attrs[1].size_params);
    CHECK(attrs[1].external_scores.empty());
    CHECK_THROWS_AS(parse_attribute_csv("name,size\nx,1\n"), Error);
}

TEST_CASE("sizes parsed from model names") {
    CHECK(size_from_name("Llama-2-13B") == std::optional<double>(13e9));
    CHECK(size_from_name("Qwen-1.8B") == std::optional<double>(1.8e9));
    CHECK(size_from_name("Baichuan2-7B-Chat") == std::optional<double>(7e9));
    CHECK(size_from_name("Mixtral-8x7B") == std::nullopt);
    CHECK(size_from_name("GPT-4") == std::nullopt);
    CHECK(size_from_name("Phi-2") == std::nullopt);
    CHECK(size_from_name("falcon 40b") == std::optional<double>(40e9));
}

TEST_CASE("attribute correlation") {
    std::vector<TrendRow> trends;
    std::vector<ModelAttributeRow> attrs;
    for (int i = 1; i <= 5; ++i) {
        trends.push_back({fmt::format("m{}", i), 0.1 * i});
        ModelAttributeRow a;
        a.model_name = fmt::format("m{}", i);
        a.size_params = 1e9 * i;
        a.release_date = Date{2023, 1, 1};
        a.external_scores["MMLU"] = i == 3 ? 40.0 : 10.0 * i;
        attrs.push_back(a);
    }
    attrs[4].external_scores.clear();
    const auto cells = correlate_attributes(trends, attrs, false);
    std::map<std::string, CorrelationCell> by;
    for (const auto& c : cells)
        by[c.attribute] = c;
    CHECK(*by.at("size_params").r == doctest::Approx(1.0));
    CHECK(by.at("size_params").n == 5);
    CHECK_FALSE(by.at("release_date").r); // constant attribute
    CHECK(by.at("MMLU").n == 4);          // missing values are dropped pairwise
    const auto t = correlation_table(cells);
    bool saw_na = false;
    for (const auto& row : t)
        saw_na = saw_na || (row[0] == "release_date" && row[1] == "n/a");
    CHECK(saw_na);
}

TEST_CASE("configuration parsing") {
    const auto base = fs::path("/cfg");
    const json j = json::parse(R"({
        "store_root": "store",
        "models": [{"name": "m", "release_date": "2023-07-01", "backend": "mock_uniform", "mock": {"vocab": 16}}],
        "grid": {"origin": "2023-01-01", "interval_months": 3},
        "frame": {"future_interval_months": 1},
        "sampling": {"k": 5, "seed": 9},
        "denom": "chars"
    })");
    const auto c = parse_config(j, base);
    CHECK(c.store_root == base / "store");
    CHECK(c.models.size() == 1);
    CHECK(c.grid.interval_months == 3);
    CHECK(c.frame.future_interval_months == 1);
    CHECK(c.sample_k == 5);
    CHECK(c.denom == metrics::DenomMode::unicode_chars);
    CHECK(c.digest.size() == 64);
    const auto model = make_model(c.models[0]);
    CHECK(model.spec().release_date == std::optional<Date>(Date{2023, 7, 1}));

    json dup = j;
    dup["models"].push_back(dup["models"][0]);
    CHECK(code_of([&] { parse_config(dup, base); }) == Errc::Config);
    json bad = j;
    bad["grid"]["origin"] = "soon";
    CHECK(code_of([&] { parse_config(bad, base); }) == Errc::Config);
}

TEST_CASE("score rows and predictions round trip through JSON Lines") {
    const auto in = small_inputs();
    const auto rows = parse_scores(scores_jsonl(in.scores));
    REQUIRE(rows.size() == in.scores.size());
    CHECK(scores_jsonl(rows) == scores_jsonl(in.scores));
    CHECK(parse_predictions(predictions_jsonl(in.predictions)) == in.predictions);
}
