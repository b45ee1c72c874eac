#include "tempora/metrics.hpp"

#include "tempora/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace tempora::metrics {

std::string_view to_string(DenomMode m) noexcept {
    return m == DenomMode::utf8_bytes ? "utf8_bytes" : "unicode_chars";
}

DenomMode denom_mode_from_string(std::string_view s) {
    if (s == "bytes" || s == "utf8_bytes")
        return DenomMode::utf8_bytes;
    if (s == "chars" || s == "unicode_chars")
        return DenomMode::unicode_chars;
    throw Error(Errc::InvalidArgument, fmt::format("unknown denominator mode '{}'", s));
}

BpcValue bpc(double total_nll_nats, std::size_t denom, DenomMode mode, std::size_t missing_tokens) {
    if (!std::isfinite(total_nll_nats))
        throw Error(Errc::NonFinite, "total NLL is not finite");
    if (denom == 0)
        throw Error(Errc::ZeroLength, "BPC denominator is zero");
    BpcValue v;
    v.nll_bits = total_nll_nats / std::numbers::ln2;
    v.denom = denom;
    v.denom_mode = mode;
    v.bits_per_char = v.nll_bits / static_cast<double>(denom);
    v.missing_tokens = missing_tokens;
    return v;
}

BpcValue bpc(const gateway::ScoredText& scored, DenomMode mode) {
    const std::size_t denom = mode == DenomMode::utf8_bytes ? scored.byte_len : scored.char_len;
    return bpc(scored.total_nll_nats, denom, mode, scored.missing_tokens);
}

double aggregate_bpc(const std::vector<BpcValue>& values, Aggregation style) {
    if (values.empty())
        throw Error(Errc::EmptyInput, "no BPC values to aggregate");
    const DenomMode mode = values.front().denom_mode;
    double bits = 0.0, sum_bpc = 0.0;
    std::size_t denom = 0;
    for (const auto& v : values) {
        if (v.denom_mode != mode)
            throw Error(Errc::MixedMode, "BPC values use different denominators");
        bits += v.nll_bits;
        denom += v.denom;
        sum_bpc += v.bits_per_char;
    }
    if (style == Aggregation::macro)
        return sum_bpc / static_cast<double>(values.size());
    if (denom == 0)
        throw Error(Errc::ZeroLength, "BPC denominator is zero");
    return bits / static_cast<double>(denom);
}

AccSample make_acc(std::size_t n_correct, std::size_t n_total) {
    if (n_total == 0)
        throw Error(Errc::ZeroSample, "accuracy over zero items");
    if (n_correct > n_total)
        throw Error(Errc::InvalidArgument, fmt::format("{} correct out of {}", n_correct, n_total));
    return AccSample{n_correct, n_total, static_cast<double>(n_correct) / static_cast<double>(n_total)};
}

AccSample accuracy(const std::vector<bool>& outcomes) {
    if (outcomes.empty())
        throw Error(Errc::EmptyInput, "no outcomes");
    std::size_t correct = 0;
    for (bool b : outcomes)
        correct += b ? 1 : 0;
    return make_acc(correct, outcomes.size());
}

AccSample pool(const std::vector<AccSample>& samples) {
    std::size_t c = 0, n = 0;
    for (const auto& s : samples) {
        c += s.n_correct;
        n += s.n_total;
    }
    if (n == 0)
        throw Error(Errc::EmptyInput, "nothing to pool");
    return make_acc(c, n);
}

double pct_change(double base, double value) {
    if (base == 0.0)
        throw Error(Errc::ZeroBase, "percentage change against a zero base");
    return (value - base) / base * 100.0;
}

std::string_view to_string(DeclineClass c) noexcept {
    switch (c) {
    case DeclineClass::stable: return "stable";
    case DeclineClass::moderate: return "moderate";
    case DeclineClass::degraded: return "degraded";
    }
    return "moderate";
}

DeclineClass decline_class(double decline_pct) {
    const double pct = std::round(decline_pct * 1e9) / 1e9;
    if (pct < 31.0)
        return DeclineClass::stable;
    if (pct > 39.0)
        return DeclineClass::degraded;
    return DeclineClass::moderate;
}

DeclineReport classify_decline(double pre_acc, double post_acc) {
    if (!(pre_acc > 0.0))
        throw Error(Errc::ZeroBase, "pre-release accuracy must be positive");
    if (!(pre_acc <= 1.0) || !(post_acc >= 0.0 && post_acc <= 1.0))
        throw Error(Errc::InvalidArgument, "accuracies must lie in [0, 1]");
    DeclineReport r;
    r.pre_acc = pre_acc;
    r.post_acc = post_acc;
    r.decline_abs = pre_acc - post_acc;
    r.decline_pct = r.decline_abs / pre_acc * 100.0;
    r.decline_class = decline_class(r.decline_pct);
    return r;
}

} // namespace tempora::metrics
