#pragma once

#include "tempora/dates.hpp"
#include "tempora/metrics.hpp"
#include "tempora/model_gateway.hpp"
#include "tempora/temporal.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::event_eval {

struct Option {
    char label = 'A';
    std::string text;
    std::optional<double> crowd_pct;
    bool correct = false;
};

struct Question {
    std::string question_id;
    std::string title;
    std::optional<std::string> description;
    Date open_at;
    Date close_at;
    std::vector<Option> options;
    std::vector<std::string> tags;

    const Option* correct_option() const noexcept;
};

// Validates one question record; Schema errors carry `line` when nonzero.
Question question_from_json(const nlohmann::json& j, std::size_t line = 0);
nlohmann::json to_json(const Question& q);

std::vector<Question> parse_questions(std::string_view jsonl);
std::vector<Question> load_questions(const std::string& path);

enum class TemplateName { base, v1_dream, v2_time_travel, v3_multiverse, v4_precise, v5_future_recall };

std::string_view to_string(TemplateName t) noexcept;
TemplateName template_from_string(std::string_view s);

struct PromptTemplate {
    TemplateName name = TemplateName::base;
    std::string body; // contains {title}, {description}, {options}, {close_date}
};

const PromptTemplate& builtin_template(TemplateName name);
const std::vector<PromptTemplate>& builtin_templates();

struct RenderOptions {
    bool include_description = true;
    bool include_close_date = true;
};

// Lines holding a disabled (or absent) field are dropped. Options render as
// "A) text" lines; crowd percentages and correctness never appear.
std::string render_prompt(const PromptTemplate& tpl, const Question& q, const RenderOptions& opts = {});

// Precedence: explicit answer pattern or a standalone option letter; then a
// unique option text contained in the response; otherwise nullopt (unparsed).
std::optional<char> parse_answer(std::string_view response, const std::vector<Option>& options);

struct Prediction {
    std::string question_id;
    std::string model_name;
    std::string template_name;
    std::string raw_response;
    std::optional<char> parsed_label;
    std::optional<bool> correct;
    bool unparsed = false;
    std::optional<std::string> error; // transport failure; the question is not scored

    bool scoreable() const noexcept { return !error.has_value(); }
    bool is_correct() const noexcept { return correct.value_or(false); }
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

struct EvalOptions {
    gateway::CompletionParams params{};
    RenderOptions render{};
    std::size_t workers = 1;
};

// One prediction per question, in input order.
std::vector<Prediction> evaluate(const gateway::Model& model, const std::vector<Question>& questions,
                                 const PromptTemplate& tpl, const EvalOptions& opts = {});

struct WindowAccuracy {
    std::map<temporal::PeriodLabel, metrics::AccSample> by_label;
    std::optional<metrics::AccSample> pooled_pre; // all Past and Present questions, count-pooled
    std::size_t skipped = 0;                      // predictions with a transport error
};

WindowAccuracy window_accuracy(const std::vector<Prediction>& preds, const std::vector<Question>& questions,
                               const temporal::ReleaseFrame& frame);

} // namespace tempora::event_eval
