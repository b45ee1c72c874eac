#include "tempora/error.hpp"
#include "tempora/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tempora;
using namespace tempora::metrics;

namespace {

gateway::ScoredText scored(std::vector<double> logprobs, std::size_t bytes, std::size_t chars) {
    gateway::ScoredText s;
    gateway::ScoredSegment seg;
    for (double lp : logprobs) {
        gateway::TokenScore t;
        t.logprob_nats = lp;
        seg.tokens.push_back(t);
        s.total_nll_nats += -lp;
    }
    s.segments.push_back(seg);
    s.byte_len = bytes;
    s.char_len = chars;
    return s;
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return Errc::Config;
}

} // namespace

TEST_CASE("bpc closed forms") {
    std::vector<double> uniform(100, -std::log(256.0));
    const auto u = bpc(scored(uniform, 100, 100));
    CHECK(std::abs(u.bits_per_char - 8.0) <= 1e-9);
    CHECK(u.denom == 100);
    CHECK(u.denom_mode == DenomMode::utf8_bytes);

    CHECK(bpc(scored(std::vector<double>(37, 0.0), 37, 37)).bits_per_char == 0.0);

    const auto ab = bpc(scored({std::log(0.5), std::log(0.25)}, 2, 2));
    CHECK(ab.bits_per_char == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(ab.nll_bits == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("bpc denominator modes") {
    const auto s = scored({-1.0, -1.0}, 4, 2); // e.g. "éé"
    CHECK(bpc(s, DenomMode::utf8_bytes).denom == 4);
    CHECK(bpc(s, DenomMode::unicode_chars).denom == 2);
    CHECK(bpc(s, DenomMode::unicode_chars).bits_per_char ==
          doctest::Approx(2 * bpc(s, DenomMode::utf8_bytes).bits_per_char));
    CHECK(denom_mode_from_string("bytes") == DenomMode::utf8_bytes);
    CHECK(denom_mode_from_string("chars") == DenomMode::unicode_chars);
    CHECK(code_of([] { bpc(1.0, 0); }) == Errc::ZeroLength);
    CHECK(code_of([] { bpc(NAN, 3); }) == Errc::NonFinite);
}

TEST_CASE("bpc is zero iff every token had probability one (property)") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> lp(-5.0, 0.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> lps(1 + rng() % 30);
        const bool all_certain = trial % 3 == 0;
        for (auto& v : lps)
            v = all_certain ? 0.0 : lp(rng);
        const auto b = bpc(scored(lps, lps.size(), lps.size()));
        CHECK(b.bits_per_char >= 0.0);
        CHECK((b.bits_per_char == 0.0) == all_certain);
    }
}

TEST_CASE("aggregate_bpc micro and macro") {
    const BpcValue a = bpc(3.0 * std::log(2.0), 2);
    const BpcValue b = bpc(5.0 * std::log(2.0), 8);
    CHECK(aggregate_bpc({a, b}) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(aggregate_bpc({a, b}, Aggregation::macro) == doctest::Approx(1.0625).epsilon(1e-14));
    CHECK(aggregate_bpc({a}) == a.bits_per_char);
    CHECK(aggregate_bpc({a}, Aggregation::macro) == a.bits_per_char);
    CHECK(code_of([] { aggregate_bpc({}); }) == Errc::EmptyInput);
    CHECK(code_of([&] { aggregate_bpc({a, bpc(1.0, 3, DenomMode::unicode_chars)}); }) == Errc::MixedMode);
}

TEST_CASE("micro aggregate is invariant to splitting documents (property)") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> nats(0.0, 500.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BpcValue> whole, split;
        for (int i = 0; i < 5; ++i) {
            const double n = nats(rng);
            const std::size_t d = 2 + rng() % 1000;
            whole.push_back(bpc(n, d));
            const std::size_t d1 = 1 + rng() % (d - 1);
            const double frac = static_cast<double>(rng() % 1000) / 1000.0;
            split.push_back(bpc(n * frac, d1));
            split.push_back(bpc(n * (1 - frac), d - d1));
        }
        CHECK(aggregate_bpc(split) == doctest::Approx(aggregate_bpc(whole)).epsilon(1e-12));
    }
}

TEST_CASE("accuracy and pooling") {
    CHECK(accuracy(std::vector<bool>(5, false)).acc == 0.0);
    CHECK(accuracy({true, true, true, false}).acc == 0.75);
    std::vector<bool> v(100, false);
    std::fill(v.begin(), v.begin() + 47, true);
    CHECK(accuracy(v).acc == 0.47);
    CHECK(accuracy(v).n_correct == 47);
    CHECK(code_of([] { accuracy({}); }) == Errc::EmptyInput);
    CHECK(code_of([] { make_acc(0, 0); }) == Errc::ZeroSample);
    CHECK_THROWS_AS(make_acc(3, 2), Error);

    const auto pooled = pool({make_acc(50, 100), make_acc(70, 100)});
    CHECK(pooled.acc == doctest::Approx(0.6));
    CHECK(pooled.n_total == 200);
    // Count pooling, not a mean of means.
    CHECK(pool({make_acc(1, 1), make_acc(0, 3)}).acc == 0.25);
}

TEST_CASE("accuracy of a doubled outcome list is unchanged (property)") {
    std::mt19937 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<bool> v(1 + rng() % 50);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = rng() % 2;
        auto doubled = v;
        doubled.insert(doubled.end(), v.begin(), v.end());
        CHECK(accuracy(doubled).acc == accuracy(v).acc);
    }
}

TEST_CASE("pct_change") {
    CHECK(pct_change(2.0, 2.1) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(pct_change(0.37, 0.37) == 0.0);
    CHECK(pct_change(0.450, 0.450 * 1.02273) == doctest::Approx(2.273).epsilon(1e-12));
    CHECK(code_of([] { pct_change(0.0, 1.0); }) == Errc::ZeroBase);
}

TEST_CASE("classify_decline") {
    const auto gpt4 = classify_decline(0.66, 0.42);
    CHECK(std::round(gpt4.decline_pct * 100) / 100 == 36.36);
    CHECK(gpt4.decline_class == DeclineClass::moderate);
    const auto gpt35 = classify_decline(0.49, 0.33);
    CHECK(std::round(gpt35.decline_pct * 100) / 100 == 32.65);
    CHECK(gpt35.decline_class == DeclineClass::moderate);
    const auto stable = classify_decline(0.50, 0.40);
    CHECK(stable.decline_pct == doctest::Approx(20.0));
    CHECK(stable.decline_class == DeclineClass::stable);
    CHECK(stable.decline_abs == doctest::Approx(0.10));
    CHECK(classify_decline(0.5, 0.2).decline_class == DeclineClass::degraded);
    CHECK(code_of([] { classify_decline(0.0, 0.0); }) == Errc::ZeroBase);
}

TEST_CASE("decline boundaries are inclusive of moderate") {
    CHECK(decline_class(31.0) == DeclineClass::moderate);
    CHECK(decline_class(39.0) == DeclineClass::moderate);
    CHECK(decline_class(30.999) == DeclineClass::stable);
    CHECK(decline_class(39.001) == DeclineClass::degraded);
    // 1 - 0.69 is not exactly 0.31 in binary; the class still lands on the boundary.
    CHECK(classify_decline(1.0, 0.69).decline_class == DeclineClass::moderate);
    CHECK(classify_decline(1.0, 0.61).decline_class == DeclineClass::moderate);
}
