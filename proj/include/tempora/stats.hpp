#pragma once

#include "tempora/metrics.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::stats {

using metrics::AccSample;

// Standard normal CDF via erfc; NonFinite for NaN/inf input.
double phi(double z);

struct ZTest {
    double z = 0.0; // +/-inf when the variance is degenerate and the accuracies differ
    double p = 0.5;
};

// One-sided test of H1: acc1 > acc2 with unpooled variance, p = 1 - phi(z).
ZTest two_prop_p(const AccSample& acc1, const AccSample& acc2);

enum class TestKind { Neophilia_T1, Nostalgia_T2, Degeneration_T3 };
enum class Significance { none, s05, s01, s001 };
enum class Label { arrow_forward, arrow_back, dash, decline_star };

std::string_view to_string(TestKind t) noexcept;
std::string_view to_string(Significance s) noexcept;
std::string_view to_string(Label l) noexcept;

Significance significance(double p) noexcept;
std::string stars(Significance s);   // "", "*", "**", "***"
std::string daggers(Significance s); // "", "†", "††", "†††"

struct TestResult {
    TestKind test = TestKind::Degeneration_T3;
    AccSample acc_a;
    AccSample acc_b;
    double z = 0.0;
    double p = 0.5;
    Significance significance = Significance::none;
    Label label = Label::dash;
    // Set when min(n·acc, n·(1−acc)) < 5 for either sample.
    std::optional<std::string> warning;
};

// Runs T1 (present > past) and T2 (past > present); reports the significant one.
// When neither is, the result describes T2 with label dash.
TestResult bias_test(const AccSample& past, const AccSample& present);

// T3: one-sided test that the future accuracy is below the present one.
TestResult degeneration_test(const AccSample& present, const AccSample& future);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

} // namespace tempora::stats
