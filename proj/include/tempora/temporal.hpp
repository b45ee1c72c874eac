#pragma once

#include "tempora/dates.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tempora::temporal {

struct ReleaseFrame {
    Date release_date;
    int present_window_months = 20;
    int past_bucket_months = 20;
    int past_gap_months = 3;
    int future_interval_months = 2;
    // When set, questions closing within past_gap_months before release are
    // labelled Excluded instead of Present.
    bool exclude_past_gap = false;
};

// Throws InvalidArgument when a count is < 1 or past_gap exceeds the present window.
void validate(const ReleaseFrame& frame);

enum class PastBucket { b20_40, b40_60, b60_80, beyond_80 };

struct PeriodLabel {
    enum class Kind { Past, Present, Future, Excluded };
    Kind kind = Kind::Present;
    PastBucket past = PastBucket::b20_40; // Past only
    int window = 0;                       // Future only

    static PeriodLabel make_past(PastBucket b) { return {Kind::Past, b, 0}; }
    static PeriodLabel make_present() { return {Kind::Present, PastBucket::b20_40, 0}; }
    static PeriodLabel make_future(int w) { return {Kind::Future, PastBucket::b20_40, w}; }
    static PeriodLabel make_excluded() { return {Kind::Excluded, PastBucket::b20_40, 0}; }

    bool pre_release() const noexcept { return kind == Kind::Past || kind == Kind::Present; }

    // Timeline order: oldest past bucket first, then present, future windows, excluded last.
    int rank() const noexcept;
    friend bool operator<(const PeriodLabel& a, const PeriodLabel& b) { return a.rank() < b.rank(); }
    friend bool operator==(const PeriodLabel& a, const PeriodLabel& b) { return a.rank() == b.rank(); }
};

std::string to_string(const PeriodLabel& l); // "past_20_40", "present", "future_3", "excluded"
std::string_view to_string(PastBucket b) noexcept; // "20_40", ...

// Months are whole calendar months with partial months rounded up. A question
// closing on the release date itself counts as Present.
PeriodLabel classify_period(Date event_close, const ReleaseFrame& frame);

struct BpcPoint {
    int index = 0;
    double bpc = 0.0;
    Date start;
    Date end; // exclusive
    // Pooled numerator/denominator behind bpc, used for micro-style means.
    double nll_bits = 0.0;
    double denom = 0.0;
};

struct BpcSeries {
    std::string model_name;
    std::string dataset_id;
    std::vector<BpcPoint> points; // strictly increasing index
    int interval_months = 2;
};

struct DateRange {
    Date from; // inclusive
    Date to;   // exclusive
};

struct TrendReport {
    double tbi = 0.0;
    double intercept = 0.0;
    std::size_t n_points = 0;
    std::optional<DateRange> fit_window;
    std::optional<double> base_bpc;
    std::map<int, std::optional<double>> changes; // offset months -> pct change
};

inline constexpr int kChangeOffsets[] = {3, 6, 9, 12};

// OLS of bpc on bucket index over the points whose bucket start lies in `window`
// (all points by default).
TrendReport fit_tbi(const BpcSeries& series, std::optional<DateRange> window = std::nullopt);

// OLS slope/intercept with centred sums; InsufficientPoints below two points,
// ZeroVariance when all x coincide.
std::pair<double, double> ols(const std::vector<double>& xs, const std::vector<double>& ys);

// Base BPC over buckets whose midpoint lies in [release - 6 months, release) and
// percentage changes at each offset from the bucket whose midpoint is nearest the
// offset date, provided it lies within half that bucket's length.
TrendReport base_and_changes(const BpcSeries& series, const ReleaseFrame& frame);

} // namespace tempora::temporal
