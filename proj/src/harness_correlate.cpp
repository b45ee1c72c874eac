#include "tempora/harness.hpp"

#include "tempora/error.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <regex>

namespace tempora::harness {

namespace {

std::optional<double> number(const std::string& cell, const std::string& ctx) {
    const auto s = text::trim(cell);
    if (s.empty() || s == "-" || s == "n/a")
        return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used != s.size() || !std::isfinite(v))
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::Schema, fmt::format("{}: '{}' is not a number", ctx, cell));
    }
}

Table checked_csv(const std::string& csv, const std::vector<std::string>& required) {
    auto t = parse_csv(csv);
    if (t.empty())
        throw Error(Errc::Schema, "empty CSV");
    for (auto& h : t.front())
        h = std::string(text::trim(h));
    for (std::size_t i = 0; i < required.size(); ++i)
        if (t.front().size() <= i || t.front()[i] != required[i])
            throw Error(Errc::Schema, fmt::format("CSV column {} must be '{}'", i + 1, required[i]));
    return t;
}

} // namespace

std::vector<ModelAttributeRow> parse_attribute_csv(const std::string& csv) {
    const auto t = checked_csv(csv, {"model", "size_params", "release_date"});
    const auto& header = t.front();
    std::vector<ModelAttributeRow> out;
    for (std::size_t r = 1; r < t.size(); ++r) {
        const auto& row = t[r];
        if (row.size() != header.size())
            throw Error(Errc::Schema, fmt::format("attribute CSV row {} has {} fields, header has {}", r + 1,
                                                  row.size(), header.size()));
        ModelAttributeRow a;
        a.model_name = std::string(text::trim(row[0]));
        const std::string ctx = fmt::format("row {}", r + 1);
        a.size_params = number(row[1], ctx);
        if (const auto d = text::trim(row[2]); !d.empty()) {
            if (!Date::valid(d))
                throw Error(Errc::Schema, fmt::format("{}: bad release_date '{}'", ctx, d));
            a.release_date = Date::parse(d);
        }
        for (std::size_t c = 3; c < header.size(); ++c)
            if (const auto v = number(row[c], ctx))
                a.external_scores[header[c]] = *v;
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<TrendRow> parse_trend_csv(const std::string& csv) {
    const auto t = checked_csv(csv, {"model", "tbi"});
    std::vector<TrendRow> out;
    for (std::size_t r = 1; r < t.size(); ++r) {
        if (t[r].size() < 2)
            throw Error(Errc::Schema, fmt::format("trend CSV row {} is short", r + 1));
        const auto v = number(t[r][1], fmt::format("row {}", r + 1));
        if (!v)
            continue;
        out.push_back({std::string(text::trim(t[r][0])), *v});
    }
    return out;
}

std::optional<double> size_from_name(const std::string& name) {
    static const std::regex kSize(R"((?:^|[-_ ])(\d+(?:\.\d+)?)[Bb](?![A-Za-z0-9]))");
    std::smatch m;
    if (!std::regex_search(name, m, kSize))
        return std::nullopt;
    return std::stod(m[1].str()) * 1e9;
}

std::vector<CorrelationCell> correlate_attributes(const std::vector<TrendRow>& trends,
                                                  std::vector<ModelAttributeRow> attrs, bool size_from_names) {
    // Pair the k-th occurrence of a name in trends with its k-th attribute row;
    // when the attribute rows run out, the last one is reused.
    std::map<std::string, std::vector<const ModelAttributeRow*>> by_name;
    for (const auto& a : attrs)
        by_name[a.model_name].push_back(&a);
    std::map<std::string, std::size_t> seen;
    std::vector<std::string> columns{"size_params", "release_date"};
    for (const auto& a : attrs)
        for (const auto& [k, _] : a.external_scores)
            if (std::find(columns.begin(), columns.end(), k) == columns.end())
                columns.push_back(k);

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (const auto& t : trends) {
        const auto it = by_name.find(t.model);
        const std::size_t k = seen[t.model]++;
        const ModelAttributeRow* a =
            it == by_name.end() ? nullptr : it->second[std::min(k, it->second.size() - 1)];
        std::optional<double> size = a ? a->size_params : std::nullopt;
        if (!size && size_from_names)
            size = size_from_name(t.model);
        if (size) {
            pairs["size_params"].first.push_back(*size);
            pairs["size_params"].second.push_back(t.tbi);
        }
        if (!a)
            continue;
        if (a->release_date) {
            pairs["release_date"].first.push_back(static_cast<double>(a->release_date->serial()));
            pairs["release_date"].second.push_back(t.tbi);
        }
        for (const auto& [k2, v] : a->external_scores) {
            pairs[k2].first.push_back(v);
            pairs[k2].second.push_back(t.tbi);
        }
    }
    std::vector<CorrelationCell> out;
    for (const auto& col : columns) {
        CorrelationCell c;
        c.attribute = col;
        const auto& [xs, ys] = pairs[col];
        c.n = xs.size();
        if (c.n >= 2) {
            try {
                c.r = stats::pearson(xs, ys);
            } catch (const Error& e) {
                if (e.code() != Errc::ZeroVariance)
                    throw;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

Table correlation_table(const std::vector<CorrelationCell>& cells) {
    Table t{{"Attribute", "r", "n"}};
    for (const auto& c : cells)
        t.push_back({c.attribute, c.r ? fmt::format("{:.3f}", *c.r) : "n/a", std::to_string(c.n)});
    return t;
}

} // namespace tempora::harness
