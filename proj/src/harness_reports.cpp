#include "tempora/harness.hpp"

#include "tempora/error.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>

#include <cmath>

namespace tempora::harness {

std::string render_bias_cell(const stats::TestResult& r) {
    if (r.significance == stats::Significance::none || r.label == stats::Label::dash)
        return "−";
    const char* arrow = r.test == stats::TestKind::Neophilia_T1 ? "→" : "←";
    return fmt::format("{} {}", arrow, stats::daggers(r.significance));
}

namespace {

std::string fixed(double v, int digits) {
    std::string s = fmt::format("{:.{}f}", v, digits);
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-')
        s.erase(0, 1); // no "-0.000"
    return s;
}

std::string acc_cell(const json& a, const std::string& suffix = "") {
    return fmt::format("{}{} (n={})", fixed(a.at("acc").get<double>(), 2), suffix, a.at("n_total").get<std::size_t>());
}

stats::Significance significance_from(const std::string& s) {
    for (auto v : {stats::Significance::none, stats::Significance::s05, stats::Significance::s01,
                   stats::Significance::s001})
        if (stats::to_string(v) == s)
            return v;
    throw Error(Errc::Schema, "unknown significance " + s);
}

stats::TestResult test_from(const json& t) {
    stats::TestResult r;
    const auto name = t.at("test").get<std::string>();
    r.test = name == "Neophilia_T1"   ? stats::TestKind::Neophilia_T1
             : name == "Nostalgia_T2" ? stats::TestKind::Nostalgia_T2
                                      : stats::TestKind::Degeneration_T3;
    r.p = t.at("p").get<double>();
    r.significance = significance_from(t.at("significance").get<std::string>());
    const auto label = t.at("label").get<std::string>();
    r.label = label == "arrow_forward" ? stats::Label::arrow_forward
              : label == "arrow_back"  ? stats::Label::arrow_back
              : label == "decline_star" ? stats::Label::decline_star
                                        : stats::Label::dash;
    return r;
}

const json& models_of(const json& analysis) {
    if (!analysis.is_object() || !analysis.contains("models"))
        throw Error(Errc::MissingArtifact, "analysis.json has no models section");
    return analysis["models"];
}

std::string md_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|')
            out += '\\';
        out += c;
    }
    return out;
}

} // namespace

std::string render_markdown(const Table& t) {
    if (t.empty())
        return "";
    std::vector<std::size_t> width(t.front().size(), 3);
    for (const auto& row : t)
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
            width[c] = std::max(width[c], text::utf8_length(md_escape(row[c])));
    auto line = [&](const std::vector<std::string>& row) {
        std::string out = "|";
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < row.size() ? md_escape(row[c]) : "";
            out += " " + cell + std::string(width[c] - text::utf8_length(cell), ' ') + " |";
        }
        return out + "\n";
    };
    std::string out = line(t.front());
    out += "|";
    for (auto w : width)
        out += " " + std::string(w, '-') + " |";
    out += "\n";
    for (std::size_t r = 1; r < t.size(); ++r)
        out += line(t[r]);
    return out;
}

std::string render_csv(const Table& t) {
    std::string out;
    for (const auto& row : t) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c)
                out += ',';
            const auto& cell = row[c];
            if (cell.find_first_of(",\"\n\r") == std::string::npos) {
                out += cell;
                continue;
            }
            out += '"';
            for (char ch : cell) {
                if (ch == '"')
                    out += '"';
                out += ch;
            }
            out += '"';
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(const std::string& csv) {
    Table t;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < csv.size(); ++i) {
        const char c = csv[i];
        if (quoted) {
            if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n')
                ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                t.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted)
        throw Error(Errc::Schema, "unterminated quoted CSV field");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        t.push_back(std::move(row));
    }
    return t;
}

Table decline_table(const std::vector<DeclineRow>& rows) {
    Table t{{"Model", "Pre-release", "Post-release", "Decline", "Decline %", "Class"}};
    for (const auto& r : rows) {
        const auto d = metrics::classify_decline(r.pre_acc, r.post_acc);
        std::string name = r.model;
        if (d.decline_class == metrics::DeclineClass::stable)
            name = "**" + name + "**";
        else if (d.decline_class == metrics::DeclineClass::degraded)
            name = "_" + name + "_";
        auto with_n = [](double acc, const std::optional<std::size_t>& n) {
            return n ? fmt::format("{} (n={})", fixed(acc, 2), *n) : fixed(acc, 2);
        };
        t.push_back({name, with_n(r.pre_acc, r.n_pre), with_n(r.post_acc, r.n_post), fixed(d.decline_abs, 2),
                     fixed(d.decline_pct, 2) + "%", std::string(metrics::to_string(d.decline_class))});
    }
    return t;
}

Table decline_table(const json& analysis) {
    std::vector<DeclineRow> rows;
    for (const auto& m : models_of(analysis)) {
        const auto& acc = m["accuracy"];
        if (acc.is_null() || acc["decline"].is_null())
            continue;
        const auto& d = acc["decline"];
        rows.push_back({m["name"].get<std::string>(), d["pre"]["acc"].get<double>(), d["post"]["acc"].get<double>(),
                        d["pre"]["n_total"].get<std::size_t>(), d["post"]["n_total"].get<std::size_t>()});
    }
    return decline_table(rows);
}

Table bias_table(const json& analysis) {
    static const char* kBuckets[] = {"20_40", "40_60", "60_80"};
    Table t{{"Model", "20-40 months", "40-60 months", "60-80 months"}};
    for (const auto& m : models_of(analysis)) {
        const auto& acc = m["accuracy"];
        if (acc.is_null())
            continue;
        std::vector<std::string> row{m["name"].get<std::string>()};
        for (const char* b : kBuckets) {
            std::string cell = "n/a";
            for (const auto& e : acc["bias"])
                if (e["bucket"] == b)
                    cell = render_bias_cell(test_from(e["test"]));
            row.push_back(cell);
        }
        t.push_back(std::move(row));
    }
    return t;
}

Table accuracy_table(const json& analysis) {
    const int interval = analysis.value("future_interval_months", 2);
    int max_window = -1;
    for (const auto& m : models_of(analysis))
        if (!m["accuracy"].is_null())
            for (const auto& w : m["accuracy"]["windows"])
                if (w.contains("window"))
                    max_window = std::max(max_window, w["window"].get<int>());
    Table t{{"Model", "pre (pooled)"}};
    for (int w = 0; w <= max_window; ++w)
        t.front().push_back(fmt::format("+{}-{}m", w * interval, (w + 1) * interval));
    for (const auto& m : models_of(analysis)) {
        const auto& acc = m["accuracy"];
        if (acc.is_null())
            continue;
        std::vector<std::string> row{m["name"].get<std::string>(), acc["pre"].is_null() ? "-" : acc_cell(acc["pre"])};
        for (int w = 0; w <= max_window; ++w) {
            std::string cell = "-";
            for (const auto& e : acc["windows"]) {
                if (!e.contains("window") || e["window"].get<int>() != w)
                    continue;
                const std::string s = e["test"].is_null()
                                          ? std::string()
                                          : stats::stars(significance_from(e["test"]["significance"].get<std::string>()));
                cell = acc_cell(e["acc"], s);
            }
            row.push_back(cell);
        }
        t.push_back(std::move(row));
    }
    return t;
}

Table tbi_table(const json& analysis) {
    Table t{{"Model", "Dataset", "TBI x1000", "Base BPC"}};
    for (int m : temporal::kChangeOffsets)
        t.front().push_back(fmt::format("{}m %", m));
    t.front().push_back("Mean %");
    for (const auto& m : models_of(analysis)) {
        for (const auto& s : m["series"]) {
            std::vector<std::string> row{m["name"].get<std::string>(), s["dataset"].get<std::string>()};
            row.push_back(s["tbi"].is_null() ? "-" : fixed(s["tbi"].get<double>() * 1000.0, 1));
            row.push_back(s["base_bpc"].is_null() ? "-" : fixed(s["base_bpc"].get<double>(), 3));
            double sum = 0;
            int n = 0;
            for (int off : temporal::kChangeOffsets) {
                const auto& v = s["changes"][std::to_string(off)];
                if (v.is_null()) {
                    row.push_back("-");
                    continue;
                }
                row.push_back(fixed(v.get<double>(), 3));
                sum += v.get<double>();
                ++n;
            }
            row.push_back(n ? fixed(sum / n, 3) : "-");
            t.push_back(std::move(row));
        }
    }
    return t;
}

std::map<std::string, std::string> render_reports(const json& analysis) {
    const std::string denom = analysis.value("denom_mode", "utf8_bytes");
    struct Spec {
        const char* name;
        const char* title;
        Table table;
        std::string legend;
    };
    const std::vector<Spec> specs{
        {"bias", "Pre-release period bias", bias_table(analysis),
         "Each cell compares a past bucket with the present window (the 20 months before release). "
         "→ newer content favoured, ← older content favoured, − no significant difference; "
         "† p<0.05, †† p<0.01, ††† p<0.001 (one-sided)."},
        {"accuracy", "Accuracy by post-release window", accuracy_table(analysis),
         "The pre column pools all questions closing before release. Stars mark a significant drop against it: "
         "* p<0.05, ** p<0.01, *** p<0.001 (one-sided)."},
        {"tbi", "Temporal bias index", tbi_table(analysis),
         "TBI is the least-squares slope of BPC against bucket index, multiplied by 1000; positive values mean "
         "BPC rises over time. Changes are percentages against the base BPC of the six months before release. "
         "BPC denominator: " + denom + "."},
        {"decline", "Accuracy decline after release", decline_table(analysis),
         "**bold**: decline below 31% (stable); _underline_: decline above 39% (degraded)."},
    };
    std::map<std::string, std::string> out;
    for (const auto& s : specs) {
        out[fmt::format("reports/{}.md", s.name)] =
            fmt::format("# {}\n\n{}\n{}\n", s.title, render_markdown(s.table), s.legend);
        out[fmt::format("reports/{}.csv", s.name)] = render_csv(s.table);
    }
    return out;
}

} // namespace tempora::harness
