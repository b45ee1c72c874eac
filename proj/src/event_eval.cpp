#include "tempora/event_eval.hpp"

#include "tempora/error.hpp"
#include "tempora/io.hpp"
#include "tempora/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace tempora::event_eval {

using nlohmann::json;

const Option* Question::correct_option() const noexcept {
    for (const auto& o : options)
        if (o.correct)
            return &o;
    return nullptr;
}

namespace {

[[noreturn]] void schema(std::size_t line, const std::string& detail) {
    throw Error(Errc::Schema, line ? fmt::format("line {}: {}", line, detail) : detail);
}

std::string req_string(const json& j, const char* key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        schema(line, fmt::format("'{}' must be a string", key));
    return it->get<std::string>();
}

Date req_date(const json& j, const char* key, std::size_t line) {
    const auto s = req_string(j, key, line);
    if (!Date::valid(s))
        schema(line, fmt::format("'{}' is not a date: {}", key, s));
    return Date::parse(s);
}

} // namespace

Question question_from_json(const json& j, std::size_t line) {
    if (!j.is_object())
        schema(line, "record is not an object");
    Question q;
    q.question_id = req_string(j, "question_id", line);
    if (q.question_id.empty())
        schema(line, "empty question_id");
    q.title = req_string(j, "title", line);
    if (auto it = j.find("description"); it != j.end() && !it->is_null()) {
        if (!it->is_string())
            schema(line, "'description' must be a string");
        q.description = it->get<std::string>();
    }
    q.open_at = req_date(j, "open_at", line);
    q.close_at = req_date(j, "close_at", line);
    if (q.close_at < q.open_at)
        schema(line, fmt::format("{}: close_at precedes open_at", q.question_id));
    if (auto it = j.find("tags"); it != j.end() && !it->is_null()) {
        if (!it->is_array())
            schema(line, "'tags' must be an array");
        for (const auto& t : *it) {
            if (!t.is_string())
                schema(line, "tags must be strings");
            q.tags.push_back(t.get<std::string>());
        }
    }
    const auto opts = j.find("options");
    if (opts == j.end() || !opts->is_array())
        schema(line, "'options' must be an array");
    for (const auto& o : *opts) {
        if (!o.is_object())
            schema(line, "option is not an object");
        Option opt;
        const auto label = req_string(o, "label", line);
        if (label.size() != 1 || label[0] < 'A' || label[0] > 'Z')
            schema(line, fmt::format("option label '{}' is not a single capital letter", label));
        opt.label = label[0];
        opt.text = req_string(o, "text", line);
        if (auto it = o.find("crowd_pct"); it != o.end() && !it->is_null()) {
            if (!it->is_number())
                schema(line, "'crowd_pct' must be a number");
            const double pct = it->get<double>();
            if (!(pct >= 0.0 && pct <= 100.0))
                schema(line, fmt::format("crowd_pct {} outside [0, 100]", pct));
            opt.crowd_pct = pct;
        }
        if (auto it = o.find("correct"); it != o.end()) {
            if (!it->is_boolean())
                schema(line, "'correct' must be a boolean");
            opt.correct = it->get<bool>();
        }
        if (!q.options.empty() && opt.label <= q.options.back().label)
            schema(line, "option labels must be unique and in order");
        q.options.push_back(std::move(opt));
    }
    if (q.options.size() < 2)
        schema(line, fmt::format("{}: needs at least two options", q.question_id));
    const auto n_correct = std::count_if(q.options.begin(), q.options.end(), [](const Option& o) { return o.correct; });
    if (n_correct != 1)
        schema(line, fmt::format("{}: {} options marked correct, expected exactly one", q.question_id, n_correct));
    return q;
}

json to_json(const Question& q) {
    json opts = json::array();
    for (const auto& o : q.options) {
        json jo{{"label", std::string(1, o.label)}, {"text", o.text}, {"correct", o.correct}};
        jo["crowd_pct"] = o.crowd_pct ? json(*o.crowd_pct) : json(nullptr);
        opts.push_back(std::move(jo));
    }
    json j{{"question_id", q.question_id}, {"title", q.title},     {"open_at", q.open_at.str()},
           {"close_at", q.close_at.str()}, {"tags", q.tags},       {"options", std::move(opts)}};
    j["description"] = q.description ? json(*q.description) : json(nullptr);
    return j;
}

std::vector<Question> parse_questions(std::string_view content) {
    std::vector<Question> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::istringstream in{std::string(content)};
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (text::trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            schema(line_no, std::string("invalid JSON: ") + e.what());
        }
        auto q = question_from_json(j, line_no);
        if (!ids.insert(q.question_id).second)
            throw Error(Errc::DuplicateId, fmt::format("line {}: duplicate question_id '{}'", line_no, q.question_id));
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<Question> load_questions(const std::string& path) {
    return parse_questions(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Templates

namespace {

const std::vector<PromptTemplate> kTemplates{
    {TemplateName::base,
     "You will receive a question about an event whose outcome was settled on {close_date}.\n"
     "Nobody expects certainty here. Commit to your best guess anyway; a well-judged pick earns a $200 bonus,\n"
     "and declining to choose earns nothing.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Resolution date: {close_date}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "Reply with exactly one option letter."},
    {TemplateName::v1_dream,
     "Picture yourself as a seer who glimpses what is yet to come in vivid dreams.\n"
     "Last night's dream revealed how the following matter turned out.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Settled on: {close_date}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "Describe nothing else: state the single option letter your dream showed you."},
    {TemplateName::v2_time_travel,
     "You have just stepped out of a time machine that carried you well past {close_date}.\n"
     "From where you now stand, the following question is settled history that you remember clearly.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "Recall what happened and reply with exactly one option letter."},
    {TemplateName::v3_multiverse,
     "You can observe many parallel universes, most of which run a little ahead of ours.\n"
     "In nearly all of them, the question below was resolved by {close_date}.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "Report the outcome seen in the majority of universes as a single option letter."},
    {TemplateName::v4_precise,
     "Work through the question carefully: note what was known before it opened, which trends were\n"
     "under way, and how matters would likely develop up to {close_date}.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "After reasoning step by step, finish with one line of the form \"Answer: X\", where X is a single option letter."},
    {TemplateName::v5_future_recall,
     "Write as an analyst looking back from several years in the future, reviewing events that are\n"
     "long since closed. The question below was resolved on {close_date}, and the record is public.\n"
     "\n"
     "Question: {title}\n"
     "Background: {description}\n"
     "Options:\n"
     "{options}\n"
     "\n"
     "In your retrospective, name the option that proved correct by giving exactly one option letter."},
};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

} // namespace

std::string_view to_string(TemplateName t) noexcept {
    switch (t) {
    case TemplateName::base: return "base";
    case TemplateName::v1_dream: return "v1_dream";
    case TemplateName::v2_time_travel: return "v2_time_travel";
    case TemplateName::v3_multiverse: return "v3_multiverse";
    case TemplateName::v4_precise: return "v4_precise";
    case TemplateName::v5_future_recall: return "v5_future_recall";
    }
    return "base";
}

TemplateName template_from_string(std::string_view s) {
    for (const auto& t : kTemplates)
        if (to_string(t.name) == s)
            return t.name;
    throw Error(Errc::InvalidArgument, fmt::format("unknown template '{}'", s));
}

const PromptTemplate& builtin_template(TemplateName name) {
    return kTemplates.at(static_cast<std::size_t>(name));
}

const std::vector<PromptTemplate>& builtin_templates() { return kTemplates; }

std::string render_prompt(const PromptTemplate& tpl, const Question& q, const RenderOptions& opts) {
    const bool want_desc = opts.include_description && q.description && !text::trim(*q.description).empty();
    std::string options;
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        if (i)
            options += '\n';
        options += fmt::format("{}) {}", q.options[i].label, q.options[i].text);
    }
    std::string out;
    std::istringstream in(tpl.body);
    bool first = true;
    for (std::string line; std::getline(in, line);) {
        if (!want_desc && line.find("{description}") != std::string::npos)
            continue;
        if (!opts.include_close_date && line.find("{close_date}") != std::string::npos)
            continue;
        replace_all(line, "{title}", q.title);
        if (want_desc)
            replace_all(line, "{description}", *q.description);
        replace_all(line, "{close_date}", q.close_at.str());
        replace_all(line, "{options}", options);
        if (!first)
            out += '\n';
        out += line;
        first = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Answer parsing

std::optional<char> parse_answer(std::string_view response, const std::vector<Option>& options) {
    const std::string r(response);
    auto valid = [&](char c) {
        return std::any_of(options.begin(), options.end(), [c](const Option& o) { return o.label == c; });
    };

    // Rule 1: explicit pattern or a standalone lettered token, earliest wins.
    static const std::regex kPatterns[] = {
        std::regex(R"([Aa]nswer(?:\s+is)?\s*:?\s*\**\s*\(?([A-Z])\)?(?![A-Za-z0-9]))"),
        std::regex(R"((?:^|[^A-Za-z0-9])\(([A-Z])\)(?![A-Za-z0-9]))"),
        std::regex(R"((?:^|\s|\*)([A-Z])[.):](?=\s|\*|$))"),
        std::regex(R"(^[\s*"'`]*([A-Z])[\s*"'`.!]*$)"),
    };
    std::optional<std::pair<std::size_t, char>> best;
    for (const auto& re : kPatterns) {
        for (auto it = std::sregex_iterator(r.begin(), r.end(), re); it != std::sregex_iterator(); ++it) {
            const char c = (*it)[1].str()[0];
            if (!valid(c))
                continue;
            const auto pos = static_cast<std::size_t>((*it).position(1));
            if (!best || pos < best->first)
                best = {pos, c};
            break; // later matches of the same pattern cannot be earlier
        }
    }
    if (best)
        return best->second;

    // Rule 2: a unique option whose full text occurs in the response.
    const std::string lower = text::to_lower_ascii(r);
    std::vector<const Option*> hits;
    for (const auto& o : options) {
        const std::string t = text::to_lower_ascii(text::trim(o.text));
        if (!t.empty() && lower.find(t) != std::string::npos)
            hits.push_back(&o);
    }
    std::vector<const Option*> maximal;
    for (const auto* a : hits) {
        const std::string ta = text::to_lower_ascii(text::trim(a->text));
        const bool shadowed = std::any_of(hits.begin(), hits.end(), [&](const Option* b) {
            if (a == b)
                return false;
            const std::string tb = text::to_lower_ascii(text::trim(b->text));
            return tb.size() > ta.size() && tb.find(ta) != std::string::npos;
        });
        if (!shadowed)
            maximal.push_back(a);
    }
    if (maximal.size() == 1)
        return maximal.front()->label;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluation

json to_json(const Prediction& p) {
    json j{{"question_id", p.question_id},   {"model_name", p.model_name}, {"template_name", p.template_name},
           {"raw_response", p.raw_response}, {"unparsed", p.unparsed}};
    j["parsed_label"] = p.parsed_label ? json(std::string(1, *p.parsed_label)) : json(nullptr);
    j["correct"] = p.correct ? json(*p.correct) : json(nullptr);
    j["error"] = p.error ? json(*p.error) : json(nullptr);
    return j;
}

Prediction prediction_from_json(const json& j) {
    try {
        Prediction p;
        p.question_id = j.at("question_id").get<std::string>();
        p.model_name = j.at("model_name").get<std::string>();
        p.template_name = j.at("template_name").get<std::string>();
        p.raw_response = j.at("raw_response").get<std::string>();
        p.unparsed = j.at("unparsed").get<bool>();
        if (const auto& l = j.at("parsed_label"); !l.is_null())
            p.parsed_label = l.get<std::string>().at(0);
        if (const auto& c = j.at("correct"); !c.is_null())
            p.correct = c.get<bool>();
        if (auto it = j.find("error"); it != j.end() && !it->is_null())
            p.error = it->get<std::string>();
        return p;
    } catch (const std::exception& e) {
        throw Error(Errc::Schema, std::string("bad prediction record: ") + e.what());
    }
}

std::vector<Prediction> evaluate(const gateway::Model& model, const std::vector<Question>& questions,
                                 const PromptTemplate& tpl, const EvalOptions& opts) {
    if (!model.backend().supports_completion())
        throw Error(Errc::Unsupported, "model '" + model.spec().name + "' does not support completion");
    std::vector<Prediction> out(questions.size());
    std::vector<std::exception_ptr> fatal(questions.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < questions.size(); i = next++) {
            const auto& q = questions[i];
            auto& p = out[i];
            p.question_id = q.question_id;
            p.model_name = model.spec().name;
            p.template_name = std::string(to_string(tpl.name));
            try {
                p.raw_response = gateway::complete(model, render_prompt(tpl, q, opts.render), opts.params);
            } catch (const TransportError& e) {
                p.error = e.what();
                continue;
            } catch (...) {
                fatal[i] = std::current_exception();
                continue;
            }
            p.parsed_label = parse_answer(p.raw_response, q.options);
            p.unparsed = !p.parsed_label;
            if (p.parsed_label) {
                const auto* c = q.correct_option();
                p.correct = c && c->label == *p.parsed_label;
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(opts.workers, questions.size()));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    for (auto& e : fatal)
        if (e)
            std::rethrow_exception(e);
    return out;
}

WindowAccuracy window_accuracy(const std::vector<Prediction>& preds, const std::vector<Question>& questions,
                               const temporal::ReleaseFrame& frame) {
    std::map<std::string, const Question*> by_id;
    for (const auto& q : questions)
        by_id.emplace(q.question_id, &q);
    std::map<temporal::PeriodLabel, std::pair<std::size_t, std::size_t>> counts;
    std::size_t pre_c = 0, pre_n = 0;
    WindowAccuracy out;
    for (const auto& p : preds) {
        const auto it = by_id.find(p.question_id);
        if (it == by_id.end())
            throw Error(Errc::MissingQuestion, "no question with id '" + p.question_id + "'");
        if (!p.scoreable()) {
            ++out.skipped;
            continue;
        }
        const auto label = temporal::classify_period(it->second->close_at, frame);
        auto& c = counts[label];
        ++c.second;
        if (p.is_correct())
            ++c.first;
        if (label.pre_release()) {
            ++pre_n;
            if (p.is_correct())
                ++pre_c;
        }
    }
    for (const auto& [label, c] : counts)
        out.by_label.emplace(label, metrics::make_acc(c.first, c.second));
    if (pre_n)
        out.pooled_pre = metrics::make_acc(pre_c, pre_n);
    return out;
}

} // namespace tempora::event_eval
