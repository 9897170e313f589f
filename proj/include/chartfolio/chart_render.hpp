#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/market_data.hpp"
#include "chartfolio/png_io.hpp"

namespace chartfolio {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

struct RenderConfig {
    int width = 224;
    int height = 224;
    double candle_body_fraction = 0.8; // share of a day column the body occupies
    double margin_fraction = 0.05;     // blank border on each side
    Rgb up_color{0, 255, 0};
    Rgb down_color{255, 0, 0};
    Rgb wick_color{0, 0, 0};
    Rgb background{255, 255, 255};

    void validate() const {
        if (width <= 0 || height <= 0) throw config_error("render: dimensions must be positive");
        if (!(candle_body_fraction > 0 && candle_body_fraction <= 1))
            throw config_error("render: candle_body_fraction must be in (0, 1]");
        if (!(margin_fraction >= 0 && margin_fraction < 0.5))
            throw config_error("render: margin_fraction must be in [0, 0.5)");
    }
};

struct ChartImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // row-major RGB
    std::string symbol;
    Date start_date;

    Rgb at(int x, int y) const {
        const size_t o = (static_cast<size_t>(y) * width + x) * 3;
        return {pixels[o], pixels[o + 1], pixels[o + 2]};
    }
};

namespace render_detail {

// The price -> row map rounds ties away from zero, never to even.
inline long round_half_away(double v) { return std::llround(v); }

inline void fill_pixel(ChartImage& img, long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    const size_t o = (static_cast<size_t>(y) * img.width + x) * 3;
    img.pixels[o] = c.r;
    img.pixels[o + 1] = c.g;
    img.pixels[o + 2] = c.b;
}

} // namespace render_detail

// Rasterizes one price window as a candlestick chart. Bit-exact deterministic:
// the price axis is normalized per window (min(low)..max(high) spans the
// margin-inset plot area), each day occupies one of W equal-width columns, and
// all pixel snapping is round-half-away-from-zero. No anti-aliasing.
inline ChartImage render(const PriceWindow& window, const RenderConfig& config) {
    config.validate();
    if (window.bars.empty()) throw data_error("render: empty window");

    ChartImage img;
    img.width = config.width;
    img.height = config.height;
    img.symbol = window.symbol;
    img.start_date = window.start_date();
    img.pixels.assign(static_cast<size_t>(config.width) * config.height * 3, 0);
    for (size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = config.background.r;
        img.pixels[i + 1] = config.background.g;
        img.pixels[i + 2] = config.background.b;
    }

    double pmin = window.bars[0].low;
    double pmax = window.bars[0].high;
    for (const auto& bar : window.bars) {
        pmin = std::min(pmin, bar.low);
        pmax = std::max(pmax, bar.high);
    }

    const long mx = render_detail::round_half_away(config.margin_fraction * config.width);
    const long my = render_detail::round_half_away(config.margin_fraction * config.height);
    const long row_top = my;
    const long row_bot = config.height - 1 - my;
    const double plot_w = static_cast<double>(config.width) - 2.0 * static_cast<double>(mx);
    const double col_w = plot_w / static_cast<double>(window.bars.size());

    // All prices equal: every candle collapses onto the vertical center row.
    const bool degenerate = !(pmax > pmin);
    auto price_to_row = [&](double p) -> long {
        if (degenerate)
            return render_detail::round_half_away((row_top + row_bot) / 2.0);
        const double t = (p - pmin) / (pmax - pmin);
        return render_detail::round_half_away(row_bot - t * (row_bot - row_top));
    };

    for (size_t d = 0; d < window.bars.size(); ++d) {
        const OhlcBar& bar = window.bars[d];
        const double center_x = mx + (static_cast<double>(d) + 0.5) * col_w;
        const double half_body = config.candle_body_fraction * col_w / 2.0;

        // Body columns: pixels whose center lies inside [center-h, center+h).
        const long body_x0 = static_cast<long>(std::ceil(center_x - half_body - 0.5));
        const long body_x1 = static_cast<long>(std::ceil(center_x + half_body - 0.5)) - 1;

        // Wick first so the body paints over it inside its own span.
        const long wick_x = static_cast<long>(std::floor(center_x));
        const long wick_y0 = price_to_row(bar.high);
        const long wick_y1 = price_to_row(bar.low);
        for (long y = wick_y0; y <= wick_y1; ++y)
            render_detail::fill_pixel(img, wick_x, y, config.wick_color);

        if (bar.close == bar.open) {
            // Doji: one-pixel horizontal line across the body span.
            const long y = price_to_row(bar.close);
            for (long x = body_x0; x <= body_x1; ++x)
                render_detail::fill_pixel(img, x, y, config.wick_color);
        } else {
            const Rgb body = bar.close > bar.open ? config.up_color : config.down_color;
            const long y0 = price_to_row(std::max(bar.open, bar.close));
            const long y1 = price_to_row(std::min(bar.open, bar.close));
            for (long y = y0; y <= y1; ++y)
                for (long x = body_x0; x <= body_x1; ++x)
                    render_detail::fill_pixel(img, x, y, body);
        }
    }
    return img;
}

struct ManifestEntry {
    std::string symbol;
    Date start_date;
    Date end_date; // last bar covered by the chart
    std::string path;
};

inline std::string chart_file_name(const std::string& symbol, const Date& start) {
    return symbol + "_" + to_string(start) + ".png";
}

// Rasterizes every window to <out_dir>/<symbol>_<start>.png and writes a
// manifest CSV next to them. Idempotent: identical inputs rewrite identical
// bytes. Entries are sorted by (symbol, start date) regardless of input order.
inline std::vector<ManifestEntry> render_universe(const std::vector<PriceWindow>& windows,
                                                  const RenderConfig& config,
                                                  const std::string& out_dir,
                                                  const std::string& manifest_path,
                                                  const std::vector<std::string>& comments = {}) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir))
        throw data_error("render: cannot create output directory " + out_dir);

    std::vector<ManifestEntry> manifest;
    manifest.reserve(windows.size());
    for (const auto& window : windows) {
        ChartImage img = render(window, config);
        const std::string name = chart_file_name(window.symbol, window.start_date());
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        write_png(path, img.width, img.height, img.pixels);
        manifest.push_back({window.symbol, window.start_date(), window.end_date(), path});
    }
    std::sort(manifest.begin(), manifest.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        return std::tie(a.symbol, a.start_date) < std::tie(b.symbol, b.start_date);
    });

    CsvWriter writer(manifest_path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("symbol,start_date,end_date,path");
    for (const auto& e : manifest)
        writer.row({e.symbol, to_string(e.start_date), to_string(e.end_date), e.path});
    writer.close();
    return manifest;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    CsvReader reader(path);
    auto header = reader.next();
    if (!header || header->size() < 4 || (*header)[0] != "symbol")
        throw data_error(path + ": not a chart manifest");
    std::vector<ManifestEntry> entries;
    while (auto row = reader.next()) {
        if (row->size() != 4) throw data_error(path + ": malformed manifest row");
        auto start = parse_date((*row)[1]);
        auto end = parse_date((*row)[2]);
        if (!start || !end) throw data_error(path + ": bad date in manifest row");
        entries.push_back({(*row)[0], *start, *end, (*row)[3]});
    }
    return entries;
}

} // namespace chartfolio
