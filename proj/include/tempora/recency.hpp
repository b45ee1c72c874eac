#pragma once

#include "tempora/corpus.hpp"
#include "tempora/model_gateway.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::corpus {

enum class Recency { Recent, Historical, Other };

std::string_view to_string(Recency r) noexcept;

inline constexpr std::size_t kRecencyCharBudget = 2000;

// The classification prompt sent to the judge; the body is cut to `char_budget`
// scalar values.
std::string recency_prompt(const Document& doc, std::size_t char_budget = kRecencyCharBudget);

struct RecencyResult {
    Recency label = Recency::Other;
    std::optional<std::string> warning; // set when the response named no label
};

// Earliest label word in the response (case-insensitive) wins.
RecencyResult parse_recency(std::string_view response);

RecencyResult classify_recency(const gateway::Model& judge, const Document& doc,
                               std::size_t char_budget = kRecencyCharBudget);

// Share of each label in percent.
std::map<Recency, double> recency_proportions(const std::vector<Recency>& labels);

} // namespace tempora::corpus
