#include "tempora/recency.hpp"

#include "tempora/text.hpp"

#include <fmt/format.h>

#include <array>

namespace tempora::corpus {

std::string_view to_string(Recency r) noexcept {
    switch (r) {
    case Recency::Recent: return "Recent";
    case Recency::Historical: return "Historical";
    case Recency::Other: return "Other";
    }
    return "Other";
}

std::string recency_prompt(const Document& doc, std::size_t char_budget) {
    return fmt::format(
        "Decide what kind of content the following text is.\n"
        "Recent: it reports or discusses events and developments current at the time of writing.\n"
        "Historical: it mainly describes past events, background or established knowledge.\n"
        "Other: neither of the above applies.\n"
        "\n"
        "Text:\n{}\n"
        "\n"
        "Reply with one word: Recent, Historical or Other.",
        text::utf8_prefix(doc.body, char_budget));
}

RecencyResult parse_recency(std::string_view response) {
    static constexpr std::array<std::pair<std::string_view, Recency>, 3> kLabels{{
        {"recent", Recency::Recent},
        {"historical", Recency::Historical},
        {"other", Recency::Other},
    }};
    const std::string lower = text::to_lower_ascii(response);
    std::size_t best_pos = std::string::npos;
    Recency best = Recency::Other;
    for (const auto& [word, label] : kLabels) {
        const auto pos = lower.find(word);
        if (pos < best_pos) {
            best_pos = pos;
            best = label;
        }
    }
    if (best_pos == std::string::npos)
        return {Recency::Other, fmt::format("unrecognised judge response: '{}'", text::utf8_prefix(response, 80))};
    return {best, std::nullopt};
}

RecencyResult classify_recency(const gateway::Model& judge, const Document& doc, std::size_t char_budget) {
    return parse_recency(gateway::complete(judge, recency_prompt(doc, char_budget)));
}

std::map<Recency, double> recency_proportions(const std::vector<Recency>& labels) {
    std::map<Recency, double> out{{Recency::Recent, 0.0}, {Recency::Historical, 0.0}, {Recency::Other, 0.0}};
    if (labels.empty())
        return out;
    for (auto l : labels)
        out[l] += 1.0;
    for (auto& [_, v] : out)
        v = v / static_cast<double>(labels.size()) * 100.0;
    return out;
}

} // namespace tempora::corpus
