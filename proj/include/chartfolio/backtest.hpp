#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/embedding.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/graph_cluster.hpp"
#include "chartfolio/market_data.hpp"
#include "chartfolio/portfolio.hpp"

namespace chartfolio {

struct BacktestConfig {
    int formation_window = 20; // lookback used for embedding and Sharpe scoring
    int holding_period = 10;   // days each portfolio is held
    int stride = 10;           // spacing between rebalance dates
    int k2 = 5;                // portfolio size
    Date start_date;
    Date end_date;
    // Skip rebalance dates with fewer than k2 investable stocks instead of
    // aborting; skipped periods hold no position.
    bool skip_thin_dates = false;

    void validate() const {
        if (formation_window < 2) throw config_error("backtest: formation_window must be >= 2");
        if (holding_period < 1 || stride < 1 || k2 < 1)
            throw config_error("backtest: holding_period, stride and k2 must be positive");
        if (!(start_date < end_date)) throw config_error("backtest: start must precede end");
        if (stride < holding_period)
            throw config_error("backtest: stride < holding_period would overlap positions");
    }
};

struct EquityPoint {
    Date date;
    double value = 1.0;
};

// Portfolio value indexed to 1.0 at the first rebalance date.
struct EquityCurve {
    std::vector<EquityPoint> points;
};

struct HoldingOutcome {
    std::string symbol;
    double compound_return = 0.0; // prod(1 + r_d) - 1 over the holding period
};

struct PeriodRecord {
    Date formation_date; // rebalance date: last day of the formation window
    Date hold_start;
    Date hold_end;
    Portfolio portfolio;
    std::vector<HoldingOutcome> outcomes;
    double period_return = 0.0; // mean of holdings' compound returns
    bool skipped = false;       // thin universe, no position held
};

struct BacktestReport {
    double total_return = 0.0;
    std::optional<double> daily_sharpe; // annualized by sqrt(252)
    double max_drawdown = 0.0;          // in [-1, 0]
    double mean_return_daily = 0.0;     // mean daily return x 252
    double mean_return_monthly = 0.0;   // mean calendar-month return x 12
    double mean_return_yearly = 0.0;    // mean calendar-year return
    double win_years = 0.0;             // fraction of calendar years with positive return
    std::vector<PeriodRecord> periods;
};

// Worst peak-to-trough decline: min over t of (V_t - max_{u<=t} V_u) / max V_u.
inline double max_drawdown(const EquityCurve& curve) {
    if (curve.points.empty()) throw data_error("max_drawdown: empty curve");
    double peak = curve.points.front().value;
    double worst = 0.0;
    for (const auto& p : curve.points) {
        peak = std::max(peak, p.value);
        worst = std::min(worst, (p.value - peak) / peak);
    }
    return worst;
}

namespace backtest_detail {

inline std::vector<double> curve_returns(const EquityCurve& curve) {
    std::vector<double> r;
    for (size_t i = 1; i < curve.points.size(); ++i)
        r.push_back(curve.points[i].value / curve.points[i - 1].value - 1.0);
    return r;
}

// Returns over consecutive calendar buckets (month or year). The first
// bucket is measured from the curve start, so partial periods count.
inline std::vector<double> bucket_returns(const EquityCurve& curve, bool yearly) {
    std::vector<double> out;
    if (curve.points.empty()) return out;
    auto bucket = [&](const Date& d) { return yearly ? d.year * 100 : d.year * 100 + d.month; };
    double base = curve.points.front().value;
    int current = bucket(curve.points.front().date);
    double last_in_bucket = curve.points.front().value;
    for (const auto& p : curve.points) {
        if (bucket(p.date) != current) {
            out.push_back(last_in_bucket / base - 1.0);
            base = last_in_bucket;
            current = bucket(p.date);
        }
        last_in_bucket = p.value;
    }
    out.push_back(last_in_bucket / base - 1.0);
    return out;
}

} // namespace backtest_detail

// Fills the metric suite from a finished equity curve. Daily and monthly
// means are annualized (x252 / x12); the yearly mean is reported as-is.
inline BacktestReport report_metrics(const EquityCurve& curve) {
    if (curve.points.size() < 2) throw data_error("report_metrics: curve needs >= 2 points");
    BacktestReport rep;
    rep.total_return = curve.points.back().value / curve.points.front().value - 1.0;
    rep.max_drawdown = max_drawdown(curve);

    const auto daily = backtest_detail::curve_returns(curve);
    double mean = 0.0;
    for (double r : daily) mean += r;
    mean /= static_cast<double>(daily.size());
    rep.mean_return_daily = mean * 252.0;
    if (daily.size() >= 2) {
        double ss = 0.0;
        for (double r : daily) ss += (r - mean) * (r - mean);
        const double sd = std::sqrt(ss / static_cast<double>(daily.size() - 1));
        if (sd > 0.0) rep.daily_sharpe = mean / sd * std::sqrt(252.0);
    }

    const auto monthly = backtest_detail::bucket_returns(curve, false);
    double msum = 0.0;
    for (double r : monthly) msum += r;
    rep.mean_return_monthly = msum / static_cast<double>(monthly.size()) * 12.0;

    const auto yearly = backtest_detail::bucket_returns(curve, true);
    double ysum = 0.0;
    size_t wins = 0;
    for (double r : yearly) {
        ysum += r;
        if (r > 0.0) ++wins;
    }
    rep.mean_return_yearly = ysum / static_cast<double>(yearly.size());
    rep.win_years = static_cast<double>(wins) / static_cast<double>(yearly.size());
    return rep;
}

// Supplies the embedding for a formation window. Implementations must not
// look at any data after the window's last bar.
using EmbedFn = std::function<Embedding(const PriceWindow&)>;

inline EmbedFn store_embed_fn(const EmbeddingStore& store) {
    return [&store](const PriceWindow& w) -> Embedding {
        const Embedding* e = store.find(w.symbol, w.start_date());
        if (!e)
            throw missing_artifact_error(
                "no embedding for " + w.symbol + " @ " + to_string(w.start_date()) +
                "; run `encode` over a chart manifest covering the backtest span");
        return *e;
    };
}

struct BacktestResult {
    BacktestReport report;
    EquityCurve curve;
};

// Rolling protocol: every `stride` trading days, embed each stock's
// formation window ending at the rebalance date, cluster the cosine graph,
// score by in-window Sharpe, allocate k2 equally-weighted holdings, then
// hold for `holding_period` days. Holdings are bought once per period (no
// intra-period rebalancing), so the period return is exactly the mean of
// the holdings' compound returns. A symbol missing a price mid-hold is
// marked at its last available close.
inline BacktestResult run(const std::vector<OhlcSeries>& data, const EmbedFn& embed,
                          const BacktestConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw data_error("backtest: no data");

    // Trading calendar: union of dates across the universe.
    std::vector<Date> all_dates;
    for (const auto& s : data)
        for (const auto& b : s.bars) all_dates.push_back(b.date);
    const TradingCalendar calendar(std::move(all_dates));
    const auto& days = calendar.days();
    const size_t n_days = days.size();

    // First rebalance: first trading day >= start with a full formation
    // lookback behind it.
    size_t first = static_cast<size_t>(cfg.formation_window) - 1;
    while (first < n_days && days[first] < cfg.start_date) ++first;

    BacktestResult result;
    double value = 1.0;
    bool curve_started = false;

    for (size_t i = first;
         i < n_days && days[i] <= cfg.end_date &&
         i + static_cast<size_t>(cfg.holding_period) < n_days &&
         days[i + static_cast<size_t>(cfg.holding_period)] <= cfg.end_date;
         i += static_cast<size_t>(cfg.stride)) {
        const Date rebalance = days[i];

        // Investable universe: symbols with a complete contiguous
        // formation window ending exactly at the rebalance date.
        std::vector<PriceWindow> windows;
        for (const auto& series : data) {
            auto idx = series.find_date(rebalance);
            if (!idx || *idx + 1 < static_cast<size_t>(cfg.formation_window)) continue;
            const size_t begin = *idx + 1 - static_cast<size_t>(cfg.formation_window);
            bool contiguous = true;
            for (size_t b = begin; b < *idx; ++b) {
                if (!calendar.contiguous(series.bars[b].date, series.bars[b + 1].date)) {
                    contiguous = false;
                    break;
                }
            }
            if (!contiguous) continue;
            PriceWindow w;
            w.symbol = series.symbol;
            w.start_index = begin;
            w.bars.assign(series.bars.begin() + static_cast<long>(begin),
                          series.bars.begin() + static_cast<long>(*idx) + 1);
            windows.push_back(std::move(w));
        }

        if (!curve_started) {
            result.curve.points.push_back({rebalance, value});
            curve_started = true;
        } else if (result.curve.points.back().date < rebalance) {
            // Flat filler between the previous holding end and this
            // rebalance (only reachable when stride > holding_period).
            for (size_t d = 0; d < n_days; ++d) {
                if (days[d] > result.curve.points.back().date && days[d] <= rebalance)
                    result.curve.points.push_back({days[d], value});
            }
        }

        PeriodRecord record;
        record.formation_date = rebalance;
        record.hold_start = days[i + 1];
        record.hold_end = days[i + static_cast<size_t>(cfg.holding_period)];

        if (windows.size() < static_cast<size_t>(cfg.k2)) {
            if (!cfg.skip_thin_dates)
                throw data_error("backtest: universe at " + to_string(rebalance) + " has " +
                                 std::to_string(windows.size()) + " stocks, need k2=" +
                                 std::to_string(cfg.k2) + " (use --skip-thin-dates to skip)");
            record.skipped = true;
            for (int d = 1; d <= cfg.holding_period; ++d)
                result.curve.points.push_back({days[i + static_cast<size_t>(d)], value});
            result.report.periods.push_back(std::move(record));
            continue;
        }

        std::vector<Embedding> embeddings;
        embeddings.reserve(windows.size());
        std::vector<StockScore> scores;
        scores.reserve(windows.size());
        std::map<std::string, const PriceWindow*> window_of;
        for (const auto& w : windows) {
            embeddings.push_back(embed(w));
            const auto rets = close_returns(w.bars);
            scores.push_back(
                {w.symbol, sharpe_ratio(rets), w.start_date(), w.end_date()});
            window_of[w.symbol] = &w;
        }

        SimilarityGraph graph = build_graph(embeddings);
        ClusterAssignment assignment = cluster(graph);
        assignment.rebalance_date = rebalance;
        record.portfolio = allocate(assignment, scores, cfg.k2);

        // Buy-and-hold within the period: track each holding's cumulative
        // factor day by day; the portfolio path is their equal-dollar mean.
        const size_t nh = record.portfolio.holdings.size();
        std::vector<double> factor(nh, 1.0);
        std::vector<double> last_close(nh);
        std::vector<const OhlcSeries*> series_of(nh);
        for (size_t h = 0; h < nh; ++h) {
            const auto& sym = record.portfolio.holdings[h].symbol;
            series_of[h] = nullptr;
            for (const auto& s : data)
                if (s.symbol == sym) series_of[h] = &s;
            last_close[h] = window_of.at(sym)->bars.back().close;
        }

        for (int d = 1; d <= cfg.holding_period; ++d) {
            const Date day = days[i + static_cast<size_t>(d)];
            double mean_factor = 0.0;
            for (size_t h = 0; h < nh; ++h) {
                if (auto idx = series_of[h]->find_date(day)) {
                    const double close = series_of[h]->bars[*idx].close;
                    factor[h] *= close / last_close[h];
                    last_close[h] = close;
                }
                mean_factor += factor[h];
            }
            mean_factor /= static_cast<double>(nh);
            result.curve.points.push_back({day, value * mean_factor});
        }

        for (size_t h = 0; h < nh; ++h)
            record.outcomes.push_back({record.portfolio.holdings[h].symbol, factor[h] - 1.0});
        double mean_compound = 0.0;
        for (const auto& o : record.outcomes) mean_compound += o.compound_return;
        record.period_return = mean_compound / static_cast<double>(nh);
        value = result.curve.points.back().value;
        result.report.periods.push_back(std::move(record));
    }

    if (result.curve.points.size() < 2)
        throw data_error("backtest: no complete holding period inside the configured span");

    auto metrics = report_metrics(result.curve);
    metrics.periods = std::move(result.report.periods);
    result.report = std::move(metrics);
    return result;
}

inline void write_equity_csv(const std::string& path, const EquityCurve& curve,
                             const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("date,value");
    for (const auto& p : curve.points) writer.row({to_string(p.date), format_double(p.value)});
    writer.close();
}

inline EquityCurve read_equity_csv(const std::string& path) {
    CsvReader reader(path);
    auto header = reader.next();
    if (!header || header->size() < 2) throw data_error(path + ": not an equity curve CSV");
    EquityCurve curve;
    while (auto row = reader.next()) {
        auto d = parse_date((*row)[0]);
        auto v = parse_double((*row)[1]);
        if (!d || !v) throw data_error(path + ": malformed curve row");
        curve.points.push_back({*d, *v});
    }
    return curve;
}

inline void write_metrics_csv(const std::string& path, const BacktestReport& report,
                              const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("metric,value");
    writer.row({"total_return", format_double(report.total_return)});
    writer.row({"daily_sharpe",
                report.daily_sharpe ? format_double(*report.daily_sharpe) : "undefined"});
    writer.row({"max_drawdown", format_double(report.max_drawdown)});
    writer.row({"mean_return_daily", format_double(report.mean_return_daily)});
    writer.row({"mean_return_monthly", format_double(report.mean_return_monthly)});
    writer.row({"mean_return_yearly", format_double(report.mean_return_yearly)});
    writer.row({"win_years", format_double(report.win_years)});
    writer.close();
}

inline void write_trades_csv(const std::string& path, const BacktestReport& report,
                             const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("formation_date,hold_start,hold_end,symbol,weight,community_id,sharpe,"
                "compound_return,period_return,skipped");
    for (const auto& period : report.periods) {
        if (period.skipped) {
            writer.row({to_string(period.formation_date), to_string(period.hold_start),
                        to_string(period.hold_end), "", "", "", "", "",
                        format_double(period.period_return), "1"});
            continue;
        }
        for (size_t h = 0; h < period.portfolio.holdings.size(); ++h) {
            const auto& holding = period.portfolio.holdings[h];
            writer.row({to_string(period.formation_date), to_string(period.hold_start),
                        to_string(period.hold_end), holding.symbol,
                        format_double(holding.weight), std::to_string(holding.community_id),
                        holding.sharpe ? format_double(*holding.sharpe) : "undefined",
                        format_double(period.outcomes[h].compound_return),
                        format_double(period.period_return), "0"});
        }
    }
    writer.close();
}

} // namespace chartfolio
