#include "tempora/stats.hpp"

#include "tempora/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace tempora::stats {

double phi(double z) {
    if (!std::isfinite(z))
        throw Error(Errc::NonFinite, "phi argument is not finite");
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

ZTest two_prop_p(const AccSample& acc1, const AccSample& acc2) {
    if (acc1.n_total == 0 || acc2.n_total == 0)
        throw Error(Errc::ZeroSample, "two_prop_p needs non-empty samples");
    const double p1 = acc1.acc, p2 = acc2.acc;
    const double var = p1 * (1 - p1) / static_cast<double>(acc1.n_total) +
                       p2 * (1 - p2) / static_cast<double>(acc2.n_total);
    if (var <= 0.0) {
        if (p1 == p2)
            return {0.0, 0.5};
        const double inf = std::numeric_limits<double>::infinity();
        return p1 > p2 ? ZTest{inf, 0.0} : ZTest{-inf, 1.0};
    }
    const double z = (p1 - p2) / std::sqrt(var);
    // 1 - phi(z) == phi(-z), evaluated without cancellation.
    return {z, 0.5 * std::erfc(z / std::numbers::sqrt2)};
}

std::string_view to_string(TestKind t) noexcept {
    switch (t) {
    case TestKind::Neophilia_T1: return "Neophilia_T1";
    case TestKind::Nostalgia_T2: return "Nostalgia_T2";
    case TestKind::Degeneration_T3: return "Degeneration_T3";
    }
    return "";
}

std::string_view to_string(Significance s) noexcept {
    switch (s) {
    case Significance::none: return "none";
    case Significance::s05: return "s05";
    case Significance::s01: return "s01";
    case Significance::s001: return "s001";
    }
    return "";
}

std::string_view to_string(Label l) noexcept {
    switch (l) {
    case Label::arrow_forward: return "arrow_forward";
    case Label::arrow_back: return "arrow_back";
    case Label::dash: return "dash";
    case Label::decline_star: return "decline_star";
    }
    return "";
}

Significance significance(double p) noexcept {
    if (p < 0.001)
        return Significance::s001;
    if (p < 0.01)
        return Significance::s01;
    if (p < 0.05)
        return Significance::s05;
    return Significance::none;
}

namespace {

std::string repeat(std::string_view unit, Significance s) {
    const int n = s == Significance::s001 ? 3 : s == Significance::s01 ? 2 : s == Significance::s05 ? 1 : 0;
    std::string out;
    for (int i = 0; i < n; ++i)
        out += unit;
    return out;
}

std::optional<std::string> small_sample_warning(const AccSample& a, const AccSample& b) {
    for (const auto* s : {&a, &b}) {
        const double n = static_cast<double>(s->n_total);
        if (std::min(n * s->acc, n * (1 - s->acc)) < 5.0)
            return fmt::format("normal approximation questionable for {}/{}", s->n_correct, s->n_total);
    }
    return std::nullopt;
}

} // namespace

std::string stars(Significance s) { return repeat("*", s); }
std::string daggers(Significance s) { return repeat("†", s); }

TestResult bias_test(const AccSample& past, const AccSample& present) {
    const ZTest t1 = two_prop_p(present, past);
    const ZTest t2 = two_prop_p(past, present);
    TestResult r;
    r.warning = small_sample_warning(past, present);
    if (t1.p < 0.05) {
        r.test = TestKind::Neophilia_T1;
        r.acc_a = present;
        r.acc_b = past;
        r.z = t1.z;
        r.p = t1.p;
        r.label = Label::arrow_forward;
    } else {
        r.test = TestKind::Nostalgia_T2;
        r.acc_a = past;
        r.acc_b = present;
        r.z = t2.z;
        r.p = t2.p;
        r.label = t2.p < 0.05 ? Label::arrow_back : Label::dash;
    }
    r.significance = significance(r.p);
    return r;
}

TestResult degeneration_test(const AccSample& present, const AccSample& future) {
    const ZTest t = two_prop_p(present, future);
    TestResult r;
    r.test = TestKind::Degeneration_T3;
    r.acc_a = present;
    r.acc_b = future;
    r.z = t.z;
    r.p = t.p;
    r.significance = significance(t.p);
    r.label = r.significance == Significance::none ? Label::dash : Label::decline_star;
    r.warning = small_sample_warning(present, future);
    return r;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error(Errc::LengthMismatch, fmt::format("{} xs vs {} ys", xs.size(), ys.size()));
    if (xs.size() < 2)
        throw Error(Errc::InsufficientPoints, "pearson needs at least two pairs");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw Error(Errc::NonFinite, "pearson input is not finite");
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(Errc::ZeroVariance, "pearson input has zero variance");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

} // namespace tempora::stats
