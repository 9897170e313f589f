// Generates the committed test fixtures:
//   reference_window.csv   20-bar all-up window with integer prices
//   golden_224.png         default-config render of the reference window
//   synthetic_market.csv   12 stocks, 140 weekdays, 2 planted regimes
//   desk_checkpoint.ckpt   desk CAE trained on the synthetic market's
//                          first 100 days (64x64 charts, seed 42)
//   golden_embedding.csv   every synthetic 64x64 chart embedded with it
//
// Run from the repository root: build/tools/make_goldens [out_dir]

#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "chartfolio/chartfolio.hpp"

using namespace chartfolio;

namespace {

bool is_weekday(const Date& d) {
    const int dow = static_cast<int>((to_serial(d) % 7 + 7 + 4) % 7); // 0 = Sunday
    return dow >= 1 && dow <= 5;
}

std::vector<Date> weekday_calendar(Date start, int count) {
    std::vector<Date> days;
    Date d = start;
    while (static_cast<int>(days.size()) < count) {
        if (is_weekday(d)) days.push_back(d);
        d = from_serial(to_serial(d) + 1);
    }
    return days;
}

OhlcSeries reference_window_series(const std::vector<Date>& days) {
    OhlcSeries s;
    s.symbol = "REF";
    for (int i = 0; i < 20; ++i) {
        OhlcBar b;
        b.date = days[static_cast<size_t>(i)];
        b.open = 99.0 + i;
        b.close = 100.0 + i;
        b.low = b.open;      // = close - 1
        b.high = b.close + 1;
        s.bars.push_back(b);
    }
    return s;
}

// Two regimes with opposite chart signatures. UP01..UP06 compound at
// ~+0.2%/day with small symbol-seeded noise and open deep below close, so
// every session is a tall green candle filling most of the canvas.
// FL01..FL06 have constant closes (undefined Sharpe, zero holding return)
// with open far above close, so every session is an identical tall red
// candle. Within a regime the charts are near-identical once the render
// normalizes scale; across regimes the dominant ink color flips. That
// keeps within-community cosines near 1 while the cross-community cosine
// drops well below the modularity break-even, so the planted split is
// recoverable from the embeddings.
std::vector<OhlcSeries> synthetic_market(const std::vector<Date>& days) {
    std::vector<OhlcSeries> universe;
    for (int k = 1; k <= 6; ++k) {
        char name[8];
        std::snprintf(name, sizeof name, "UP%02d", k);
        OhlcSeries s;
        s.symbol = name;
        std::mt19937_64 rng(fnv1a64(s.symbol));
        auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
        double close = 50.0 + 5.0 * k;
        for (size_t t = 0; t < days.size(); ++t) {
            OhlcBar b;
            b.date = days[t];
            if (t > 0) close *= 1.002 + (uniform() - 0.5) * 0.001;
            b.close = close;
            b.open = close * 0.70;
            b.high = close * 1.01;
            b.low = b.open * 0.99;
            s.bars.push_back(b);
        }
        universe.push_back(std::move(s));
    }
    for (int k = 1; k <= 6; ++k) {
        char name[8];
        std::snprintf(name, sizeof name, "FL%02d", k);
        OhlcSeries s;
        s.symbol = name;
        const double close = 100.0 + 2.0 * k;
        for (const Date& d : days)
            s.bars.push_back({d, close * 0.98, close * 4.08, close * 4.0, close});
        universe.push_back(std::move(s));
    }
    return universe;
}

PipelineConfig fixture_config(const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.data_csv = out_dir + "/synthetic_market.csv";
    cfg.arch = "desk";
    cfg.render.width = 64;
    cfg.render.height = 64;
    // Near-full-bleed rendering: minimal white so the pooled features are
    // driven by the candle ink rather than the shared background.
    cfg.render.candle_body_fraction = 0.95;
    cfg.render.margin_fraction = 0.02;
    cfg.seed = 42;
    // Trained far enough that the bottleneck codes actually separate the
    // two chart regimes instead of emitting the sigmoid-gray fixed point.
    cfg.train.epochs = 60;
    cfg.train.batch_size = 8;
    cfg.train.learning_rate = 0.05;
    cfg.train.plateau_min_delta = 1e-6;
    cfg.train.plateau_patience = 10;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "tests/data";
    std::filesystem::create_directories(out_dir);

    const auto ref_days = weekday_calendar({2015, 1, 5}, 20);
    const OhlcSeries ref = reference_window_series(ref_days);
    write_csv(out_dir + "/reference_window.csv", {ref}, {"reference 20-bar all-up window"});

    PriceWindow ref_window;
    ref_window.symbol = ref.symbol;
    ref_window.bars = ref.bars;
    ref_window.start_index = 0;
    const ChartImage golden = render(ref_window, RenderConfig{});
    write_png(out_dir + "/golden_224.png", golden.width, golden.height, golden.pixels);
    std::cout << "wrote reference window and golden PNG\n";

    const auto days = weekday_calendar({2015, 1, 5}, 140);
    const auto market = synthetic_market(days);
    const PipelineConfig cfg = fixture_config(out_dir);
    write_csv(cfg.data_csv, market, {"synthetic 2-regime market fixture"});
    std::cout << "wrote synthetic market (" << market.size() << " symbols, " << days.size()
              << " days)\n";

    // Train the committed desk checkpoint on windows that end within the
    // first 100 trading days, leaving the rest for out-of-sample tests.
    const Date train_end = days[99];
    RenderConfig rc = cfg.render;
    std::vector<cae::Tensor> train_images;
    std::vector<PriceWindow> all_windows;
    for (const auto& s : market) {
        for (auto& w : extract_windows(s, cfg.window, cfg.stride)) {
            if (w.end_date() <= train_end)
                train_images.push_back(cae::image_to_tensor(render(w, rc)));
            all_windows.push_back(std::move(w));
        }
    }
    std::cout << "training desk checkpoint on " << train_images.size() << " charts\n";

    cae::CaeNetwork net(cae::desk_architecture(), cfg.seed);
    cae::TrainConfig tc = cfg.train;
    tc.shuffle_seed = cfg.seed;
    const auto result = cae::train(net, train_images, tc, &std::cout);

    cae::CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epochs_trained = static_cast<uint32_t>(tc.epochs);
    meta.batch_size = static_cast<uint32_t>(tc.batch_size);
    meta.initial_lr = tc.learning_rate;
    meta.final_lr = result.final_learning_rate;
    meta.lr_decay_factor = tc.decay_factor;
    meta.final_loss = result.final_loss;
    meta.config_hash = config_hash(cfg);
    meta.train_data_end = train_end;
    const std::string ckpt_path = out_dir + "/desk_checkpoint.ckpt";
    cae::save_checkpoint(ckpt_path, net, meta);
    const auto ck = cae::load_checkpoint(ckpt_path);
    std::cout << "wrote checkpoint (model_id " << ck.model_id << ", final loss "
              << result.final_loss << ")\n";

    EmbeddingStore store;
    store.model_id = ck.model_id;
    store.config_hash = meta.config_hash;
    store.train_data_end = train_end;
    for (const auto& w : all_windows) {
        Embedding e;
        e.symbol = w.symbol;
        e.window_start = w.start_date();
        e.window_end = w.end_date();
        e.model_id = ck.model_id;
        e.vector = net.encode(cae::image_to_tensor(render(w, rc)));
        store.rows.push_back(std::move(e));
    }
    std::sort(store.rows.begin(), store.rows.end(), [](const Embedding& a, const Embedding& b) {
        return std::tie(a.symbol, a.window_start) < std::tie(b.symbol, b.window_start);
    });
    write_embedding_store(out_dir + "/golden_embedding.csv", store,
                          {"seed=" + std::to_string(cfg.seed)});
    std::cout << "wrote embedding store (" << store.rows.size() << " rows)\n";
    return 0;
}
