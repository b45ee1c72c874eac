#pragma once

#include "tempora/model_gateway.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace tempora::metrics {

enum class DenomMode { utf8_bytes, unicode_chars };
enum class Aggregation { micro, macro };

std::string_view to_string(DenomMode m) noexcept;
DenomMode denom_mode_from_string(std::string_view s); // "bytes"/"utf8_bytes", "chars"/"unicode_chars"

struct BpcValue {
    double bits_per_char = 0.0;
    double nll_bits = 0.0;
    std::size_t denom = 0;
    DenomMode denom_mode = DenomMode::utf8_bytes;
    std::size_t missing_tokens = 0;
};

BpcValue bpc(const gateway::ScoredText& scored, DenomMode mode = DenomMode::utf8_bytes);
BpcValue bpc(double total_nll_nats, std::size_t denom, DenomMode mode = DenomMode::utf8_bytes,
             std::size_t missing_tokens = 0);

double aggregate_bpc(const std::vector<BpcValue>& values, Aggregation style = Aggregation::micro);

struct AccSample {
    std::size_t n_correct = 0;
    std::size_t n_total = 0;
    double acc = 0.0;
};

AccSample make_acc(std::size_t n_correct, std::size_t n_total);
AccSample accuracy(const std::vector<bool>& outcomes);
// Count pooling: Σcorrect / Σtotal.
AccSample pool(const std::vector<AccSample>& samples);

double pct_change(double base, double value);

enum class DeclineClass { stable, moderate, degraded };
std::string_view to_string(DeclineClass c) noexcept;

struct DeclineReport {
    double pre_acc = 0.0;
    double post_acc = 0.0;
    double decline_abs = 0.0;
    double decline_pct = 0.0;
    DeclineClass decline_class = DeclineClass::moderate;
};

// Thresholds: < 31 stable, > 39 degraded, otherwise moderate. The percentage is
// rounded to 1e-9 first so values such as 31.000000000000004 land on the boundary.
DeclineClass decline_class(double decline_pct);
DeclineReport classify_decline(double pre_acc, double post_acc);

} // namespace tempora::metrics
