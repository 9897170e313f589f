#pragma once

// Independent reference implementations used only by tests. Each oracle
// re-derives its result from definitions with straight-line code, sharing
// no logic with the library implementations it checks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "chartfolio/chart_render.hpp"
#include "chartfolio/graph_cluster.hpp"
#include "chartfolio/market_data.hpp"

namespace testsupport {

// Q = (1/2m) * sum_ij (A_ij - k_i k_j / 2m) * [c_i == c_j], straight from
// the definition, over all ordered pairs.
inline double brute_force_modularity(const Eigen::MatrixXd& weights,
                                     const std::vector<int>& labels) {
    const long n = weights.rows();
    double two_m = 0.0;
    std::vector<double> degree(static_cast<size_t>(n), 0.0);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            degree[static_cast<size_t>(i)] += weights(i, j);
            two_m += weights(i, j);
        }
    if (two_m == 0.0) return 0.0;
    double q = 0.0;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            if (labels[static_cast<size_t>(i)] != labels[static_cast<size_t>(j)]) continue;
            q += weights(i, j) - degree[static_cast<size_t>(i)] *
                                     degree[static_cast<size_t>(j)] / two_m;
        }
    return q / two_m;
}

namespace detail {

template <typename Fn>
void partition_rec(std::vector<int>& labels, int i, int max_so_far, Fn& fn) {
    const int n = static_cast<int>(labels.size());
    if (i == n) {
        fn(const_cast<const std::vector<int>&>(labels));
        return;
    }
    for (int v = 0; v <= max_so_far + 1; ++v) {
        labels[static_cast<size_t>(i)] = v;
        partition_rec(labels, i + 1, std::max(max_so_far, v), fn);
    }
}

} // namespace detail

// Enumerates every partition of {0..n-1} as restricted growth strings
// (labels[0] = 0; labels[i] <= max(labels[0..i-1]) + 1) and invokes
// fn(labels) for each. Bell(8) = 4140, so n <= 8 stays cheap.
template <typename Fn>
void for_each_partition(int n, Fn&& fn) {
    if (n <= 0) return;
    std::vector<int> labels(static_cast<size_t>(n), 0);
    detail::partition_rec(labels, 1, 0, fn);
}

inline double exhaustive_max_modularity(const Eigen::MatrixXd& weights) {
    double best = -1.0;
    for_each_partition(static_cast<int>(weights.rows()), [&](const std::vector<int>& labels) {
        best = std::max(best, brute_force_modularity(weights, labels));
    });
    return best;
}

inline Eigen::MatrixXd random_weighted_graph(int n, std::mt19937_64& rng) {
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            // ~1/3 of edges absent so sparse structures appear too.
            const double u = uniform();
            const double v = u < (1.0 / 3.0) ? 0.0 : uniform() * 2.0;
            w(i, j) = v;
            w(j, i) = v;
        }
    return w;
}

// Max drawdown straight from the acceptance wording: min over all i < j of
// (V_j - V_i)/V_i restricted to V_i being a running maximum.
inline double mdd_oracle(const std::vector<double>& values) {
    double worst = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        bool running_max = true;
        for (size_t k = 0; k < i; ++k)
            if (values[k] > values[i]) running_max = false;
        if (!running_max) continue;
        for (size_t j = i + 1; j < values.size(); ++j)
            worst = std::min(worst, (values[j] - values[i]) / values[i]);
    }
    return worst;
}

// Point-sampling rasterizer: classifies each pixel independently instead
// of painting shapes. Geometry conventions (pixel-center body membership,
// round-half-away price rows, wick column at floor(center)) re-derived
// here so a disagreement in either implementation shows up as a diff.
inline chartfolio::Rgb reference_pixel(const chartfolio::PriceWindow& window,
                                       const chartfolio::RenderConfig& cfg, int px, int py) {
    using chartfolio::Rgb;
    const int n = static_cast<int>(window.bars.size());
    const int mx = static_cast<int>(std::llround(cfg.margin_fraction * cfg.width));
    const int my = static_cast<int>(std::llround(cfg.margin_fraction * cfg.height));
    const double col_w = static_cast<double>(cfg.width - 2 * mx) / n;
    const int row_top = my;
    const int row_bot = cfg.height - 1 - my;

    double pmin = window.bars[0].low, pmax = window.bars[0].high;
    for (const auto& b : window.bars) {
        pmin = std::min(pmin, b.low);
        pmax = std::max(pmax, b.high);
    }

    auto row_of = [&](double price) {
        if (!(pmax > pmin))
            return static_cast<int>(std::llround((row_top + row_bot) / 2.0));
        const double t = (price - pmin) / (pmax - pmin);
        return static_cast<int>(std::llround(row_bot - t * (row_bot - row_top)));
    };

    // Simulate paint order (per day: wick, then body on top); the last
    // shape covering the pixel decides its color.
    Rgb color = cfg.background;
    for (int d = 0; d < n; ++d) {
        const auto& bar = window.bars[static_cast<size_t>(d)];
        const double center = mx + (d + 0.5) * col_w;
        const double half_body = cfg.candle_body_fraction * col_w / 2.0;
        // A pixel belongs to the body when its center falls inside the
        // half-open interval [center - h, center + h).
        const double pixel_center = px + 0.5;
        const bool in_body_x =
            pixel_center >= center - half_body && pixel_center < center + half_body;
        const int wick_x = static_cast<int>(std::floor(center));

        const int high_row = row_of(bar.high);
        const int low_row = row_of(bar.low);
        if (px == wick_x && py >= std::min(high_row, low_row) &&
            py <= std::max(high_row, low_row))
            color = cfg.wick_color;

        const int open_row = row_of(bar.open);
        const int close_row = row_of(bar.close);
        const bool doji = bar.open == bar.close;
        if (!doji && in_body_x && py >= std::min(open_row, close_row) &&
            py <= std::max(open_row, close_row))
            color = bar.close > bar.open ? cfg.up_color : cfg.down_color;
        if (doji && in_body_x && py == close_row) color = cfg.wick_color;
    }
    return color;
}

// Sharpe from first principles: mean over sample standard deviation.
inline double plain_sharpe(const std::vector<double>& returns) {
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    return mean / std::sqrt(ss / static_cast<double>(returns.size() - 1));
}

} // namespace testsupport
