#include "tempora/temporal.hpp"

#include "tempora/error.hpp"
#include "tempora/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>

namespace tempora::temporal {

void validate(const ReleaseFrame& f) {
    if (f.present_window_months < 1 || f.past_bucket_months < 1 || f.past_gap_months < 1 ||
        f.future_interval_months < 1)
        throw Error(Errc::InvalidArgument, "release frame month counts must be >= 1");
    if (f.past_gap_months > f.present_window_months)
        throw Error(Errc::InvalidArgument, "past_gap_months exceeds present_window_months");
}

int PeriodLabel::rank() const noexcept {
    switch (kind) {
    case Kind::Past: return -10 + (3 - static_cast<int>(past));
    case Kind::Present: return 0;
    case Kind::Future: return 1 + window;
    case Kind::Excluded: return 1 << 30;
    }
    return 0;
}

std::string_view to_string(PastBucket b) noexcept {
    switch (b) {
    case PastBucket::b20_40: return "20_40";
    case PastBucket::b40_60: return "40_60";
    case PastBucket::b60_80: return "60_80";
    case PastBucket::beyond_80: return "beyond_80";
    }
    return "";
}

std::string to_string(const PeriodLabel& l) {
    switch (l.kind) {
    case PeriodLabel::Kind::Past: return fmt::format("past_{}", to_string(l.past));
    case PeriodLabel::Kind::Present: return "present";
    case PeriodLabel::Kind::Future: return fmt::format("future_{}", l.window);
    case PeriodLabel::Kind::Excluded: return "excluded";
    }
    return "";
}

PeriodLabel classify_period(Date close, const ReleaseFrame& f) {
    validate(f);
    const Date release = f.release_date;
    if (close > release)
        return PeriodLabel::make_future(months_until(release, close) / f.future_interval_months);
    const int before = months_until(close, release);
    if (before <= f.present_window_months) {
        if (f.exclude_past_gap && before <= f.past_gap_months)
            return PeriodLabel::make_excluded();
        return PeriodLabel::make_present();
    }
    const int k = (before - f.present_window_months - 1) / f.past_bucket_months;
    if (k >= 3)
        return PeriodLabel::make_past(PastBucket::beyond_80);
    return PeriodLabel::make_past(static_cast<PastBucket>(k));
}

std::pair<double, double> ols(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error(Errc::LengthMismatch, "ols: x and y differ in length");
    if (xs.size() < 2)
        throw Error(Errc::InsufficientPoints, fmt::format("trend fit needs >= 2 points, got {}", xs.size()));
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0)
        throw Error(Errc::ZeroVariance, "trend fit needs distinct bucket indices");
    const double a = sxy / sxx;
    return {a, my - a * mx};
}

TrendReport fit_tbi(const BpcSeries& series, std::optional<DateRange> window) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < series.points.size(); ++i) {
        const auto& p = series.points[i];
        if (i > 0 && p.index <= series.points[i - 1].index)
            throw Error(Errc::InvalidArgument, "series indices must be strictly increasing");
        if (!std::isfinite(p.bpc))
            throw Error(Errc::NonFinite, fmt::format("non-finite BPC at bucket {}", p.index));
        if (window && (p.start < window->from || !(p.start < window->to)))
            continue;
        xs.push_back(p.index);
        ys.push_back(p.bpc);
    }
    const auto [a, b] = ols(xs, ys);
    TrendReport r;
    r.tbi = a;
    r.intercept = b;
    r.n_points = xs.size();
    r.fit_window = window;
    return r;
}

TrendReport base_and_changes(const BpcSeries& series, const ReleaseFrame& frame) {
    const Date release = frame.release_date;
    const std::int64_t lo2 = 2 * release.add_months(-6).serial();
    const std::int64_t hi2 = 2 * release.serial();

    double bits = 0, denom = 0, sum = 0;
    std::size_t n = 0;
    bool weighted = true;
    for (const auto& p : series.points) {
        const std::int64_t mid2 = p.start.serial() + p.end.serial();
        if (mid2 < lo2 || mid2 >= hi2)
            continue;
        ++n;
        sum += p.bpc;
        bits += p.nll_bits;
        denom += p.denom;
        weighted = weighted && p.denom > 0;
    }
    if (n == 0)
        throw Error(Errc::NoBaseData,
                    fmt::format("{}/{}: no bucket in the six months before {}", series.model_name,
                                series.dataset_id, release.str()));
    TrendReport r;
    r.base_bpc = weighted ? bits / denom : sum / static_cast<double>(n);

    for (int m : kChangeOffsets) {
        const std::int64_t target2 = 2 * release.add_months(m).serial();
        const BpcPoint* best = nullptr;
        std::int64_t best_dist = 0;
        for (const auto& p : series.points) {
            const std::int64_t dist = std::llabs(p.start.serial() + p.end.serial() - target2);
            if (dist > p.end.serial() - p.start.serial())
                continue;
            if (!best || dist < best_dist) {
                best = &p;
                best_dist = dist;
            }
        }
        r.changes[m] = best ? std::optional<double>(metrics::pct_change(*r.base_bpc, best->bpc)) : std::nullopt;
    }
    return r;
}

} // namespace tempora::temporal
