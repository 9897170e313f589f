#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/graph_cluster.hpp"

namespace chartfolio {

// Mean daily return over sample standard deviation (n-1 denominator), no
// risk-free term. Zero variance has no defined ratio; callers must rank the
// nullopt sentinel below every finite value.
inline std::optional<double> sharpe_ratio(std::span<const double> returns) {
    if (returns.size() < 2) throw data_error("sharpe_ratio: need at least 2 returns");
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(returns.size() - 1));
    if (sd == 0.0) return std::nullopt;
    return mean / sd;
}

struct StockScore {
    std::string symbol;
    std::optional<double> sharpe;
    Date window_start;
    Date window_end;
};

// Total order used everywhere a "best Sharpe" pick happens: higher Sharpe
// first, undefined last, ties by ticker.
inline bool score_before(const StockScore& a, const StockScore& b) {
    if (a.sharpe.has_value() != b.sharpe.has_value()) return a.sharpe.has_value();
    if (a.sharpe && b.sharpe && *a.sharpe != *b.sharpe) return *a.sharpe > *b.sharpe;
    return a.symbol < b.symbol;
}

struct Holding {
    std::string symbol;
    double weight = 0.0;
    int community_id = -1;
    std::optional<double> sharpe;
};

struct Portfolio {
    std::vector<Holding> holdings;
    Date formation_date;
};

// Fund allocation rule: with K1 communities and a K2-stock budget, take
// Q = floor(K2/K1) top-Sharpe stocks from each community, then fill the
// remaining R = K2 mod K1 slots with the best unselected stocks across the
// whole universe. Communities smaller than Q spill their shortfall into the
// remainder pool. Every holding receives weight 1/K2.
inline Portfolio allocate(const ClusterAssignment& clusters,
                          const std::vector<StockScore>& scores, int k2) {
    if (k2 < 1) throw config_error("allocate: k2 must be positive");
    if (clusters.symbols.size() < static_cast<size_t>(k2))
        throw data_error("allocate: universe of " + std::to_string(clusters.symbols.size()) +
                         " is smaller than k2=" + std::to_string(k2));

    std::map<std::string, const StockScore*> score_of;
    for (const auto& s : scores) score_of[s.symbol] = &s;
    for (const auto& sym : clusters.symbols)
        if (!score_of.count(sym)) throw data_error("allocate: no score for symbol " + sym);

    const int k1 = clusters.community_count();
    const int per_cluster = k2 / k1;

    std::vector<std::vector<StockScore>> pools(static_cast<size_t>(k1));
    for (size_t i = 0; i < clusters.symbols.size(); ++i)
        pools[static_cast<size_t>(clusters.labels[i])].push_back(
            *score_of.at(clusters.symbols[i]));
    for (auto& pool : pools) std::sort(pool.begin(), pool.end(), score_before);

    std::vector<Holding> picked;
    std::map<std::string, bool> taken;
    for (int c = 0; c < k1; ++c) {
        const auto& pool = pools[static_cast<size_t>(c)];
        const size_t take = std::min<size_t>(static_cast<size_t>(per_cluster), pool.size());
        for (size_t i = 0; i < take; ++i) {
            picked.push_back({pool[i].symbol, 0.0, c, pool[i].sharpe});
            taken[pool[i].symbol] = true;
        }
    }

    // Remainder pool: R slots plus any shortfall from undersized communities.
    std::vector<StockScore> rest;
    for (size_t i = 0; i < clusters.symbols.size(); ++i)
        if (!taken.count(clusters.symbols[i])) rest.push_back(*score_of.at(clusters.symbols[i]));
    std::sort(rest.begin(), rest.end(), score_before);
    for (size_t i = 0; picked.size() < static_cast<size_t>(k2); ++i) {
        if (i >= rest.size()) throw data_error("allocate: universe exhausted before k2 holdings");
        picked.push_back({rest[i].symbol, 0.0, clusters.label_of(rest[i].symbol),
                          rest[i].sharpe});
    }

    Portfolio out;
    out.formation_date = clusters.rebalance_date;
    out.holdings = std::move(picked);
    for (auto& h : out.holdings) h.weight = 1.0 / static_cast<double>(k2);
    std::sort(out.holdings.begin(), out.holdings.end(),
              [](const Holding& a, const Holding& b) { return a.symbol < b.symbol; });
    return out;
}

inline void write_portfolio(const std::string& path, const Portfolio& portfolio,
                            const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("formation_date,symbol,weight,community_id,sharpe");
    for (const auto& h : portfolio.holdings)
        writer.row({to_string(portfolio.formation_date), h.symbol, format_double(h.weight),
                    std::to_string(h.community_id),
                    h.sharpe ? format_double(*h.sharpe) : "undefined"});
    writer.close();
}

} // namespace chartfolio
