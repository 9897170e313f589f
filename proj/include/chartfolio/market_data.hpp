#pragma once

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/error.hpp"

namespace chartfolio {

// One trading day of split/dividend-adjusted prices.
struct OhlcBar {
    Date date;
    double low = 0;
    double high = 0;
    double open = 0;
    double close = 0;
};

// Returns the violated constraint, or nullopt if the bar is well-formed.
inline std::optional<std::string> bar_violation(const OhlcBar& bar) {
    if (!(bar.low > 0 && bar.high > 0 && bar.open > 0 && bar.close > 0))
        return "prices must be strictly positive";
    if (bar.low > std::min(bar.open, bar.close)) return "low exceeds min(open, close)";
    if (bar.high < std::max(bar.open, bar.close)) return "high below max(open, close)";
    if (bar.low > bar.high) return "low exceeds high";
    return std::nullopt;
}

// The set of valid trading days. Two dates are contiguous when they occupy
// consecutive slots here, so a Friday -> Monday step is not a gap.
class TradingCalendar {
  public:
    TradingCalendar() = default;
    explicit TradingCalendar(std::vector<Date> days) : days_(std::move(days)) {
        std::sort(days_.begin(), days_.end());
        days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
        for (size_t i = 0; i < days_.size(); ++i) index_[days_[i]] = i;
    }

    const std::vector<Date>& days() const { return days_; }
    size_t size() const { return days_.size(); }

    std::optional<size_t> index_of(const Date& d) const {
        auto it = index_.find(d);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contiguous(const Date& a, const Date& b) const {
        auto ia = index_of(a);
        auto ib = index_of(b);
        return ia && ib && *ib == *ia + 1;
    }

  private:
    std::vector<Date> days_;
    std::map<Date, size_t> index_;
};

// Date-ordered bars for one ticker. The calendar (shared across the loaded
// universe) defines which consecutive-bar steps count as contiguous.
struct OhlcSeries {
    std::string symbol;
    std::vector<OhlcBar> bars;
    std::shared_ptr<const TradingCalendar> calendar;

    std::optional<size_t> find_date(const Date& d) const {
        auto it = std::lower_bound(bars.begin(), bars.end(), d,
                                   [](const OhlcBar& b, const Date& x) { return b.date < x; });
        if (it == bars.end() || it->date != d) return std::nullopt;
        return static_cast<size_t>(it - bars.begin());
    }
};

// Exactly `window` consecutive trading-day bars from one series.
struct PriceWindow {
    std::string symbol;
    std::vector<OhlcBar> bars;
    size_t start_index = 0;

    Date start_date() const { return bars.front().date; }
    Date end_date() const { return bars.back().date; }
};

struct LoadOptions {
    // Rejected-row diagnostics go here, one line per row: <file>:<line>: <reason>
    std::ostream* diagnostics = &std::cerr;
    // When absent, the calendar is the union of accepted dates in the file.
    std::shared_ptr<const TradingCalendar> calendar;
};

// Loads `date,symbol,open,high,low,close` rows into per-symbol series.
// Malformed rows and rows violating bar constraints are rejected with a
// diagnostic; duplicate (symbol, date) rows keep the first occurrence.
inline std::vector<OhlcSeries> load_csv(const std::string& path, const LoadOptions& opts = {}) {
    CsvReader reader(path);

    auto header = reader.next();
    if (!header) throw data_error(path + ": empty file");

    // Column order is taken from the header so reordered files load too.
    std::map<std::string, size_t> col;
    for (size_t i = 0; i < header->size(); ++i) col[strip_cr((*header)[i])] = i;
    for (const char* name : {"date", "symbol", "open", "high", "low", "close"}) {
        if (!col.count(name))
            throw data_error(path + ": header is missing required column '" + std::string(name) +
                             "'");
    }
    const size_t ncols = header->size();

    auto diag = [&](size_t line, const std::string& reason) {
        if (opts.diagnostics) *opts.diagnostics << path << ":" << line << ": " << reason << "\n";
    };

    std::map<std::string, OhlcSeries> by_symbol;
    std::vector<Date> all_dates;
    while (auto fields = reader.next()) {
        const size_t line = reader.line_number();
        if (fields->size() != ncols) {
            diag(line, "expected " + std::to_string(ncols) + " fields, got " +
                           std::to_string(fields->size()));
            continue;
        }
        auto date = parse_date(strip_cr((*fields)[col["date"]]));
        if (!date) {
            diag(line, "unparseable date '" + (*fields)[col["date"]] + "'");
            continue;
        }
        const std::string symbol = strip_cr((*fields)[col["symbol"]]);
        if (symbol.empty()) {
            diag(line, "empty symbol");
            continue;
        }
        OhlcBar bar;
        bar.date = *date;
        bool numeric_ok = true;
        struct {
            const char* name;
            double OhlcBar::*member;
        } price_cols[] = {{"open", &OhlcBar::open},
                          {"high", &OhlcBar::high},
                          {"low", &OhlcBar::low},
                          {"close", &OhlcBar::close}};
        for (const auto& pc : price_cols) {
            auto v = parse_double((*fields)[col[pc.name]]);
            if (!v) {
                diag(line, std::string("unparseable ") + pc.name + " '" +
                               (*fields)[col[pc.name]] + "'");
                numeric_ok = false;
                break;
            }
            bar.*(pc.member) = *v;
        }
        if (!numeric_ok) continue;
        if (auto why = bar_violation(bar)) {
            diag(line, *why);
            continue;
        }
        by_symbol[symbol].symbol = symbol;
        by_symbol[symbol].bars.push_back(bar);
        all_dates.push_back(bar.date);
    }

    if (by_symbol.empty()) throw data_error(path + ": no valid rows");

    auto calendar = opts.calendar
                        ? opts.calendar
                        : std::make_shared<const TradingCalendar>(std::move(all_dates));

    std::vector<OhlcSeries> result;
    result.reserve(by_symbol.size());
    for (auto& [symbol, series] : by_symbol) {
        std::sort(series.bars.begin(), series.bars.end(),
                  [](const OhlcBar& a, const OhlcBar& b) { return a.date < b.date; });
        // Keep the first row for a duplicated date.
        series.bars.erase(std::unique(series.bars.begin(), series.bars.end(),
                                      [](const OhlcBar& a, const OhlcBar& b) {
                                          return a.date == b.date;
                                      }),
                          series.bars.end());
        series.calendar = calendar;
        result.push_back(std::move(series));
    }
    return result;
}

inline void write_csv(const std::string& path, const std::vector<OhlcSeries>& universe,
                      const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("date,symbol,open,high,low,close");
    for (const auto& series : universe) {
        for (const auto& bar : series.bars) {
            writer.row({to_string(bar.date), series.symbol, format_double(bar.open),
                        format_double(bar.high), format_double(bar.low),
                        format_double(bar.close)});
        }
    }
    writer.close();
}

// Windows start at offsets 0, stride, 2*stride, ... Only complete windows are
// returned, and windows spanning a calendar gap are dropped rather than
// forward-filled.
inline std::vector<PriceWindow> extract_windows(const OhlcSeries& series, int window, int stride) {
    if (window < 1 || stride < 1) throw config_error("window and stride must be >= 1");
    std::vector<PriceWindow> out;
    if (series.bars.size() < static_cast<size_t>(window)) return out;

    auto contiguous = [&](size_t i) {
        if (!series.calendar) return true;
        return series.calendar->contiguous(series.bars[i].date, series.bars[i + 1].date);
    };

    for (size_t offset = 0; offset + window <= series.bars.size();
         offset += static_cast<size_t>(stride)) {
        bool ok = true;
        for (size_t i = offset; i + 1 < offset + window; ++i) {
            if (!contiguous(i)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        PriceWindow w;
        w.symbol = series.symbol;
        w.start_index = offset;
        w.bars.assign(series.bars.begin() + offset, series.bars.begin() + offset + window);
        out.push_back(std::move(w));
    }
    return out;
}

// returns[t] = close[t]/close[t-1] - 1
inline std::vector<std::pair<Date, double>> daily_returns(const OhlcSeries& series) {
    if (series.bars.size() < 2) throw data_error(series.symbol + ": need at least 2 bars");
    std::vector<std::pair<Date, double>> out;
    out.reserve(series.bars.size() - 1);
    for (size_t i = 1; i < series.bars.size(); ++i) {
        out.emplace_back(series.bars[i].date,
                         (series.bars[i].close - series.bars[i - 1].close) /
                             series.bars[i - 1].close);
    }
    return out;
}

inline std::vector<double> close_returns(const std::vector<OhlcBar>& bars) {
    std::vector<double> out;
    if (bars.size() < 2) return out;
    out.reserve(bars.size() - 1);
    for (size_t i = 1; i < bars.size(); ++i)
        out.push_back((bars[i].close - bars[i - 1].close) / bars[i - 1].close);
    return out;
}

} // namespace chartfolio
