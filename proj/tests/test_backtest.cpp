#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chartfolio/backtest.hpp"
#include "support/oracles.hpp"

using namespace chartfolio;

namespace {

// Ten consecutive trading days: Mon 2015-01-05 .. Fri 2015-01-16.
std::vector<Date> trading_days() {
    return {{2015, 1, 5},  {2015, 1, 6},  {2015, 1, 7},  {2015, 1, 8},  {2015, 1, 9},
            {2015, 1, 12}, {2015, 1, 13}, {2015, 1, 14}, {2015, 1, 15}, {2015, 1, 16}};
}

// nullopt marks a day the symbol has no bar for.
OhlcSeries make_series(std::string symbol, const std::vector<std::optional<double>>& closes) {
    const auto days = trading_days();
    OhlcSeries s;
    s.symbol = std::move(symbol);
    for (size_t i = 0; i < closes.size(); ++i) {
        if (!closes[i]) continue;
        const double c = *closes[i];
        s.bars.push_back({days[i], c * 0.9, c * 1.1, c, c});
    }
    return s;
}

// Orthogonal unit embeddings per symbol: every cosine clamps to zero, so
// clustering degenerates to singletons and allocation reduces to the global
// Sharpe ranking. That keeps the portfolio path hand-traceable.
EmbedFn one_hot_embed() {
    return [](const PriceWindow& w) {
        Embedding e;
        e.symbol = w.symbol;
        e.window_start = w.start_date();
        e.window_end = w.end_date();
        e.model_id = "unit";
        e.vector = Eigen::VectorXd::Zero(4);
        e.vector[(w.symbol.back() - 'A') % 4] = 1.0;
        return e;
    };
}

EquityCurve curve_of(const std::vector<double>& values, Date start = {2015, 1, 1}) {
    EquityCurve c;
    int64_t serial = to_serial(start);
    for (double v : values) c.points.push_back({from_serial(serial++), v});
    return c;
}

// Universe used by most run() tests. AAA and BBB rise, CCC declines, BBB has
// no bar on 2015-01-13 (index 6).
std::vector<OhlcSeries> base_universe() {
    return {
        make_series("AAA", {100, 102, 101, 103, 106, 104, 108, 110, 107, 111}),
        make_series("BBB", {50, 51, 53, 52, 54, 55, std::nullopt, 57, 58, 56}),
        make_series("CCC", {200, 198, 196, 194, 192, 190, 188, 186, 184, 182}),
    };
}

} // namespace

TEST(BacktestConfigValidation, RejectsBadParameters) {
    BacktestConfig good;
    good.formation_window = 3;
    good.holding_period = 2;
    good.stride = 2;
    good.k2 = 2;
    good.start_date = {2015, 1, 7};
    good.end_date = {2015, 1, 16};
    EXPECT_NO_THROW(good.validate());

    auto expect_config_error = [](BacktestConfig cfg, const std::string& needle) {
        try {
            cfg.validate();
            FAIL() << "expected rejection: " << needle;
        } catch (const Error& e) {
            EXPECT_EQ(e.exit_code(), 2);
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };

    BacktestConfig c = good;
    c.formation_window = 1;
    expect_config_error(c, "formation_window");

    c = good;
    c.holding_period = 0;
    expect_config_error(c, "positive");

    c = good;
    c.stride = 0;
    expect_config_error(c, "positive");

    c = good;
    c.k2 = 0;
    expect_config_error(c, "positive");

    c = good;
    c.end_date = c.start_date;
    expect_config_error(c, "start must precede end");

    c = good;
    c.stride = 1; // shorter than the holding period
    expect_config_error(c, "overlap");
}

TEST(MaxDrawdown, HandFixture) {
    EXPECT_DOUBLE_EQ(max_drawdown(curve_of({100, 120, 60, 90})), -0.5);
    EXPECT_DOUBLE_EQ(max_drawdown(curve_of({1.0, 1.1, 1.2, 1.3})), 0.0);
    EXPECT_DOUBLE_EQ(max_drawdown(curve_of({2.0})), 0.0);
    EXPECT_THROW(max_drawdown(EquityCurve{}), Error);
}

TEST(MaxDrawdown, MatchesBruteForceOracleOnRandomCurves) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 1 + rng() % 50;
        std::vector<double> values(n);
        for (auto& v : values) v = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53 * 1.5;
        EXPECT_DOUBLE_EQ(max_drawdown(curve_of(values)), testsupport::mdd_oracle(values))
            << "trial " << trial;
    }
}

TEST(Metrics, CalendarBucketsFromHandCurve) {
    EquityCurve c;
    c.points = {{{2015, 1, 31}, 1.0},
                {{2015, 2, 10}, 1.1},
                {{2015, 2, 28}, 1.2},
                {{2015, 3, 5}, 1.5}};

    const auto monthly = backtest_detail::bucket_returns(c, false);
    ASSERT_EQ(monthly.size(), 3u); // Jan (partial, flat), Feb, Mar
    EXPECT_NEAR(monthly[0], 0.0, 1e-15);
    EXPECT_NEAR(monthly[1], 1.2 / 1.0 - 1.0, 1e-15);
    EXPECT_NEAR(monthly[2], 1.5 / 1.2 - 1.0, 1e-15);

    const auto yearly = backtest_detail::bucket_returns(c, true);
    ASSERT_EQ(yearly.size(), 1u);
    EXPECT_NEAR(yearly[0], 0.5, 1e-15);

    const auto rep = report_metrics(c);
    EXPECT_NEAR(rep.total_return, 0.5, 1e-15);
    EXPECT_NEAR(rep.mean_return_monthly, (0.0 + 0.2 + 0.25) / 3.0 * 12.0, 1e-12);
    EXPECT_NEAR(rep.mean_return_yearly, 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(rep.win_years, 1.0);
    const double expected_daily =
        ((1.1 / 1.0 - 1.0) + (1.2 / 1.1 - 1.0) + (1.5 / 1.2 - 1.0)) / 3.0 * 252.0;
    EXPECT_NEAR(rep.mean_return_daily, expected_daily, 1e-12);
    ASSERT_TRUE(rep.daily_sharpe.has_value());
    const double daily_sharpe_oracle =
        testsupport::plain_sharpe({1.1 / 1.0 - 1.0, 1.2 / 1.1 - 1.0, 1.5 / 1.2 - 1.0}) *
        std::sqrt(252.0);
    EXPECT_NEAR(*rep.daily_sharpe, daily_sharpe_oracle, 1e-12);
}

TEST(Metrics, WinYearsCountsPartialYears) {
    EquityCurve c;
    c.points = {{{2015, 6, 1}, 1.0},
                {{2015, 12, 31}, 1.2},
                {{2016, 6, 1}, 1.15},
                {{2016, 12, 31}, 1.1}};
    const auto rep = report_metrics(c);
    // 2015 gains 20%, 2016 loses 1.2 -> 1.1. Both partial spans count.
    EXPECT_DOUBLE_EQ(rep.win_years, 0.5);
    EXPECT_NEAR(rep.mean_return_yearly, ((1.2 - 1.0) + (1.1 / 1.2 - 1.0)) / 2.0, 1e-15);
}

TEST(Metrics, ZeroVarianceSharpeIsUndefined) {
    // Ratios of consecutive powers of two are exact, so every daily return
    // is exactly 1.0 and the sample deviation is exactly zero.
    const auto rep = report_metrics(curve_of({1.0, 2.0, 4.0, 8.0}));
    EXPECT_FALSE(rep.daily_sharpe.has_value());
    EXPECT_DOUBLE_EQ(rep.total_return, 7.0);
    EXPECT_DOUBLE_EQ(rep.max_drawdown, 0.0);
}

TEST(Metrics, ConstantDriftCurve) {
    // 0.1% per day for 504 trading days (505 curve points).
    std::vector<double> values(505);
    values[0] = 1.0;
    for (size_t i = 1; i < values.size(); ++i) values[i] = values[i - 1] * 1.001;
    const auto rep = report_metrics(curve_of(values, {2015, 1, 2}));
    EXPECT_NEAR(rep.total_return, std::pow(1.001, 504) - 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(rep.max_drawdown, 0.0);
    EXPECT_DOUBLE_EQ(rep.win_years, 1.0); // curve spans 2015 and part of 2016
    EXPECT_NEAR(rep.mean_return_daily, 0.001 * 252.0, 1e-9);
}

TEST(Metrics, RejectsShortCurve) {
    EXPECT_THROW(report_metrics(curve_of({1.0})), Error);
    EXPECT_THROW(report_metrics(EquityCurve{}), Error);
}

TEST(Run, TwoPeriodHandTrace) {
    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 2;
    cfg.start_date = days[2];
    cfg.end_date = days[9];

    const auto result = run(base_universe(), one_hot_embed(), cfg);

    // Rebalances fall on 2015-01-07 (index 2) and 2015-01-12 (index 5); a
    // third at index 8 would need a holding end past the calendar.
    ASSERT_EQ(result.report.periods.size(), 2u);
    EXPECT_EQ(result.report.periods[0].formation_date, days[2]);
    EXPECT_EQ(result.report.periods[1].formation_date, days[5]);
    EXPECT_EQ(result.report.periods[0].hold_start, days[3]);
    EXPECT_EQ(result.report.periods[0].hold_end, days[5]);
    EXPECT_FALSE(result.report.periods[0].skipped);

    // In each formation window the risers AAA and BBB outrank the faller
    // CCC, so both periods hold {AAA, BBB} at weight 1/2.
    for (const auto& period : result.report.periods) {
        ASSERT_EQ(period.portfolio.holdings.size(), 2u);
        EXPECT_EQ(period.portfolio.holdings[0].symbol, "AAA");
        EXPECT_EQ(period.portfolio.holdings[1].symbol, "BBB");
        EXPECT_DOUBLE_EQ(period.portfolio.holdings[0].weight, 0.5);
    }

    // Curve: one point per day from the first rebalance to the last hold end.
    ASSERT_EQ(result.curve.points.size(), 7u);
    for (size_t i = 0; i < 7; ++i) EXPECT_EQ(result.curve.points[i].date, days[2 + i]);
    EXPECT_DOUBLE_EQ(result.curve.points[0].value, 1.0);

    // Hand trace. Closes: AAA 101,103,106,104,108,110,107 from index 2;
    // BBB 53,52,54,55,(gap),57,58. A gapped holding is marked at its last
    // close, so BBB is flat on 2015-01-13 and compounds 55->57 the next day.
    const double a[10] = {100, 102, 101, 103, 106, 104, 108, 110, 107, 111};
    const double b[10] = {50, 51, 53, 52, 54, 55, 0, 57, 58, 56}; // b[6] missing
    double fa = 1.0, fb = 1.0;
    std::vector<double> expected = {1.0};
    // Period 1: hold indices 3..5.
    fa *= a[3] / a[2]; fb *= b[3] / b[2]; expected.push_back((fa + fb) / 2.0);
    fa *= a[4] / a[3]; fb *= b[4] / b[3]; expected.push_back((fa + fb) / 2.0);
    fa *= a[5] / a[4]; fb *= b[5] / b[4]; expected.push_back((fa + fb) / 2.0);
    const double v1 = expected.back();
    const double p1 = (fa + fb) / 2.0 - 1.0;
    // Period 2: hold indices 6..8, BBB missing index 6.
    fa = 1.0; fb = 1.0;
    fa *= a[6] / a[5]; expected.push_back(v1 * (fa + fb) / 2.0);
    fa *= a[7] / a[6]; fb *= b[7] / b[5]; expected.push_back(v1 * (fa + fb) / 2.0);
    fa *= a[8] / a[7]; fb *= b[8] / b[7]; expected.push_back(v1 * (fa + fb) / 2.0);
    const double p2 = (fa + fb) / 2.0 - 1.0;

    for (size_t i = 0; i < expected.size(); ++i)
        EXPECT_NEAR(result.curve.points[i].value, expected[i], 1e-12) << "day " << i;

    EXPECT_NEAR(result.report.periods[0].period_return, p1, 1e-12);
    EXPECT_NEAR(result.report.periods[1].period_return, p2, 1e-12);

    // Per-holding outcomes, same order as the sorted holdings.
    const auto& out2 = result.report.periods[1].outcomes;
    ASSERT_EQ(out2.size(), 2u);
    EXPECT_EQ(out2[0].symbol, "AAA");
    EXPECT_NEAR(out2[0].compound_return, fa - 1.0, 1e-12);
    EXPECT_EQ(out2[1].symbol, "BBB");
    EXPECT_NEAR(out2[1].compound_return, (57.0 / 55.0) * (58.0 / 57.0) - 1.0, 1e-12);

    // Compounding the period returns reproduces the final curve value.
    const double compounded = (1.0 + p1) * (1.0 + p2);
    EXPECT_NEAR(result.curve.points.back().value / result.curve.points.front().value,
                compounded, 1e-10);

    EXPECT_NEAR(result.report.total_return, expected.back() - 1.0, 1e-12);
}

TEST(Run, IsDeterministic) {
    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 2;
    cfg.start_date = days[2];
    cfg.end_date = days[9];
    const auto r1 = run(base_universe(), one_hot_embed(), cfg);
    const auto r2 = run(base_universe(), one_hot_embed(), cfg);
    ASSERT_EQ(r1.curve.points.size(), r2.curve.points.size());
    for (size_t i = 0; i < r1.curve.points.size(); ++i)
        EXPECT_EQ(r1.curve.points[i].value, r2.curve.points[i].value);
}

TEST(Run, ThinUniverseNamesTheDate) {
    // DDD only starts trading on 2015-01-08, so the first rebalance
    // (2015-01-07) has a three-stock universe against k2 = 4.
    auto data = base_universe();
    data.push_back(make_series(
        "DDD", {std::nullopt, std::nullopt, std::nullopt, 10, 10.5, 11, 10.8, 11.2, 11.5, 11.9}));

    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 4;
    cfg.start_date = days[2];
    cfg.end_date = days[9];

    try {
        run(data, one_hot_embed(), cfg);
        FAIL() << "expected a thin-universe error";
    } catch (const Error& e) {
        EXPECT_EQ(e.exit_code(), 4);
        EXPECT_NE(std::string(e.what()).find("2015-01-07"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("skip-thin-dates"), std::string::npos);
    }
}

TEST(Run, SkipThinDatesHoldsFlatThroughThePeriod) {
    auto data = base_universe();
    data.push_back(make_series(
        "DDD", {std::nullopt, std::nullopt, std::nullopt, 10, 10.5, 11, 10.8, 11.2, 11.5, 11.9}));

    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 4;
    cfg.start_date = days[2];
    cfg.end_date = days[9];
    cfg.skip_thin_dates = true;

    const auto result = run(data, one_hot_embed(), cfg);
    ASSERT_EQ(result.report.periods.size(), 2u);
    EXPECT_TRUE(result.report.periods[0].skipped);
    EXPECT_DOUBLE_EQ(result.report.periods[0].period_return, 0.0);
    EXPECT_FALSE(result.report.periods[1].skipped);
    ASSERT_EQ(result.report.periods[1].portfolio.holdings.size(), 4u);

    // Flat through the skipped period, then one point per hold day.
    ASSERT_EQ(result.curve.points.size(), 7u);
    for (size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(result.curve.points[i].value, 1.0);
    EXPECT_NEAR(result.curve.points.back().value,
                1.0 + result.report.periods[1].period_return, 1e-12);
}

TEST(Run, FlatFillerBridgesStrideGap) {
    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 2;
    cfg.stride = 4;
    cfg.k2 = 2;
    cfg.start_date = days[2];
    cfg.end_date = days[9];

    const auto result = run(base_universe(), one_hot_embed(), cfg);

    // Rebalances at indices 2 and 6. BBB has no bar on the second rebalance
    // date, so its formation window is incomplete and the universe there is
    // {AAA, CCC}.
    ASSERT_EQ(result.report.periods.size(), 2u);
    EXPECT_EQ(result.report.periods[1].formation_date, days[6]);
    ASSERT_EQ(result.report.periods[1].portfolio.holdings.size(), 2u);
    EXPECT_EQ(result.report.periods[1].portfolio.holdings[0].symbol, "AAA");
    EXPECT_EQ(result.report.periods[1].portfolio.holdings[1].symbol, "CCC");

    // Calendar-complete curve: rebalance, two hold days, two flat filler
    // days up to the next rebalance, then two more hold days.
    ASSERT_EQ(result.curve.points.size(), 7u);
    for (size_t i = 0; i < 7; ++i) EXPECT_EQ(result.curve.points[i].date, days[2 + i]);
    const double v1 = result.curve.points[2].value; // end of first holding
    EXPECT_DOUBLE_EQ(result.curve.points[3].value, v1);
    EXPECT_DOUBLE_EQ(result.curve.points[4].value, v1);
    EXPECT_NE(result.curve.points[5].value, v1); // second holding moves again
}

TEST(Run, RejectsEmptyAndTooShortData) {
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 2;
    cfg.start_date = {2015, 1, 7};
    cfg.end_date = {2015, 1, 9};

    EXPECT_THROW(run({}, one_hot_embed(), cfg), Error);

    // Five trading days cannot fit formation 3 + holding 3.
    std::vector<OhlcSeries> shallow = {
        make_series("AAA", {100, 102, 101, 103, 106}),
        make_series("BBB", {50, 51, 53, 52, 54}),
    };
    try {
        run(shallow, one_hot_embed(), cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.exit_code(), 4);
        EXPECT_NE(std::string(e.what()).find("no complete holding period"), std::string::npos);
    }
}

TEST(BacktestIo, EquityCurveRoundTripsExactly) {
    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 2;
    cfg.start_date = days[2];
    cfg.end_date = days[9];
    const auto result = run(base_universe(), one_hot_embed(), cfg);

    const auto path = (std::filesystem::temp_directory_path() / "cf_equity.csv").string();
    write_equity_csv(path, result.curve, {"config_hash=deadbeef"});
    const auto loaded = read_equity_csv(path);
    ASSERT_EQ(loaded.points.size(), result.curve.points.size());
    for (size_t i = 0; i < loaded.points.size(); ++i) {
        EXPECT_EQ(loaded.points[i].date, result.curve.points[i].date);
        EXPECT_EQ(loaded.points[i].value, result.curve.points[i].value); // %.17g is lossless
    }
    std::filesystem::remove(path);
}

TEST(BacktestIo, MetricsAndTradesFiles) {
    const auto rep = report_metrics(curve_of({1.0, 2.0, 4.0, 8.0}));
    const auto metrics_path =
        (std::filesystem::temp_directory_path() / "cf_metrics.csv").string();
    write_metrics_csv(metrics_path, rep);
    {
        std::ifstream in(metrics_path);
        const std::string content{std::istreambuf_iterator<char>(in), {}};
        EXPECT_NE(content.find("total_return,7"), std::string::npos) << content;
        EXPECT_NE(content.find("daily_sharpe,undefined"), std::string::npos) << content;
        EXPECT_NE(content.find("win_years,1"), std::string::npos) << content;
    }
    std::filesystem::remove(metrics_path);

    // Trades file with one skipped and one held period.
    auto data = base_universe();
    data.push_back(make_series(
        "DDD", {std::nullopt, std::nullopt, std::nullopt, 10, 10.5, 11, 10.8, 11.2, 11.5, 11.9}));
    const auto days = trading_days();
    BacktestConfig cfg;
    cfg.formation_window = 3;
    cfg.holding_period = 3;
    cfg.stride = 3;
    cfg.k2 = 4;
    cfg.start_date = days[2];
    cfg.end_date = days[9];
    cfg.skip_thin_dates = true;
    const auto result = run(data, one_hot_embed(), cfg);

    const auto trades_path = (std::filesystem::temp_directory_path() / "cf_trades.csv").string();
    write_trades_csv(trades_path, result.report);
    std::ifstream in(trades_path);
    const std::string content{std::istreambuf_iterator<char>(in), {}};
    // Skipped period: empty holding fields, skipped flag 1.
    EXPECT_NE(content.find("2015-01-07,2015-01-08,2015-01-12,,,,,,0,1"), std::string::npos)
        << content;
    // Held period: four holdings at weight 0.25 with skipped flag 0.
    EXPECT_NE(content.find("2015-01-12,2015-01-13,2015-01-15,AAA,0.25"), std::string::npos)
        << content;
    EXPECT_NE(content.find("DDD,0.25"), std::string::npos);
    std::filesystem::remove(trades_path);
}
