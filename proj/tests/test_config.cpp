#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "chartfolio/config.hpp"

using namespace chartfolio;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

} // namespace

TEST(ConfigDefaults, MatchReferenceProtocol) {
    const PipelineConfig cfg;
    EXPECT_EQ(cfg.window, 20);
    EXPECT_EQ(cfg.stride, 10);
    EXPECT_EQ(cfg.formation_window, 20);
    EXPECT_EQ(cfg.holding_period, 10);
    EXPECT_EQ(cfg.backtest_stride, 10);
    EXPECT_EQ(cfg.k2, 5);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.arch, "paper");
    EXPECT_EQ(cfg.render.width, 224);
    EXPECT_EQ(cfg.render.height, 224);
    EXPECT_DOUBLE_EQ(cfg.render.candle_body_fraction, 0.8);
    EXPECT_DOUBLE_EQ(cfg.render.margin_fraction, 0.05);
    EXPECT_EQ(cfg.train.epochs, 50);
    EXPECT_EQ(cfg.train.batch_size, 64);
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.001);
    EXPECT_DOUBLE_EQ(cfg.train.decay_factor, 0.1);
    EXPECT_FALSE(cfg.paper_mode);
    EXPECT_FALSE(cfg.skip_thin_dates);
    EXPECT_FALSE(cfg.start.has_value());
    EXPECT_NO_THROW(cfg.validate());
}

TEST(ConfigApply, SetsTypedValues) {
    PipelineConfig cfg;
    apply_config_value(cfg, "backtest.k2", "7");
    EXPECT_EQ(cfg.k2, 7);
    apply_config_value(cfg, "seed", "123456789012345");
    EXPECT_EQ(cfg.seed, 123456789012345u);
    apply_config_value(cfg, "train.learning_rate", "0.01");
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.01);
    apply_config_value(cfg, "backtest.paper_mode", "true");
    EXPECT_TRUE(cfg.paper_mode);
    apply_config_value(cfg, "backtest.paper_mode", "0");
    EXPECT_FALSE(cfg.paper_mode);
    apply_config_value(cfg, "backtest.start", "2016-02-29");
    ASSERT_TRUE(cfg.start.has_value());
    EXPECT_EQ(*cfg.start, (Date{2016, 2, 29}));
    apply_config_value(cfg, "backtest.start", "");
    EXPECT_FALSE(cfg.start.has_value());
    apply_config_value(cfg, "cae.arch", "tiny");
    EXPECT_EQ(cfg.arch, "tiny");
    apply_config_value(cfg, "paths.report", "/tmp/out");
    EXPECT_EQ(cfg.report_dir, "/tmp/out");
}

TEST(ConfigApply, RejectsUnknownKeysAndBadValues) {
    PipelineConfig cfg;
    auto expect_config_error = [&](const std::string& key, const std::string& value,
                                   const std::string& needle) {
        try {
            apply_config_value(cfg, key, value);
            FAIL() << key << "=" << value;
        } catch (const Error& e) {
            EXPECT_EQ(e.exit_code(), 2);
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_config_error("backtest.K2", "5", "unknown config key");
    expect_config_error("train.epochs", "ten", "integer");
    expect_config_error("train.epochs", "10x", "integer");
    expect_config_error("train.learning_rate", "fast", "number");
    expect_config_error("backtest.paper_mode", "yes", "true/false");
    expect_config_error("backtest.start", "2015/01/05", "YYYY-MM-DD");
    expect_config_error("backtest.start", "2015-02-30", "YYYY-MM-DD");
    expect_config_error("seed", "-1", "unsigned");
}

TEST(ConfigFile, ParsesCommentsBlanksAndSpacing) {
    const auto path = temp_file("cf_config_ok.cfg");
    write_text(path,
               "# pipeline overrides\n"
               "\n"
               "backtest.k2 = 3   # trailing comment\n"
               "\ttrain.epochs=7\n"
               "cae.arch = desk\n");
    PipelineConfig cfg;
    load_config_file(cfg, path.string());
    EXPECT_EQ(cfg.k2, 3);
    EXPECT_EQ(cfg.train.epochs, 7);
    EXPECT_EQ(cfg.arch, "desk");
    // Untouched keys keep their defaults.
    EXPECT_EQ(cfg.window, 20);
    std::filesystem::remove(path);
}

TEST(ConfigFile, ErrorsCarryFileAndLine) {
    const auto path = temp_file("cf_config_bad.cfg");
    write_text(path, "backtest.k2 = 3\n\nthis line has no equals\n");
    PipelineConfig cfg;
    try {
        load_config_file(cfg, path.string());
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.exit_code(), 2);
        EXPECT_NE(std::string(e.what()).find(path.string() + ":3"), std::string::npos)
            << e.what();
    }

    write_text(path, "train.epochs = soon\n");
    try {
        load_config_file(cfg, path.string());
        FAIL() << "expected a value error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(path.string() + ":1"), std::string::npos)
            << e.what();
        EXPECT_NE(std::string(e.what()).find("integer"), std::string::npos);
    }

    EXPECT_THROW(load_config_file(cfg, "/nonexistent/config.cfg"), Error);
    std::filesystem::remove(path);
}

TEST(ConfigCanonical, TextIsStableAndComplete) {
    const PipelineConfig cfg;
    const std::string text = canonical_config_text(cfg);
    EXPECT_EQ(text, canonical_config_text(cfg));
    EXPECT_NE(text.find("backtest.k2=5\n"), std::string::npos);
    EXPECT_NE(text.find("render.width=224\n"), std::string::npos);
    EXPECT_NE(text.find("backtest.start=\n"), std::string::npos); // unset date serializes empty
    // One line per key in the table.
    const size_t lines = static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
    EXPECT_EQ(lines, config_detail::key_table().size());
}

TEST(ConfigHash, TracksEveryKey) {
    PipelineConfig cfg;
    const std::string base = config_hash(cfg);
    EXPECT_EQ(base.size(), 16u);
    EXPECT_EQ(base, config_hash(PipelineConfig{}));

    // Any single key change must move the hash.
    for (const auto& key : config_detail::key_table()) {
        PipelineConfig changed;
        if (key.name == "backtest.paper_mode" || key.name == "backtest.skip_thin_dates") {
            apply_config_value(changed, key.name, "true");
        } else if (key.name == "backtest.start" || key.name == "backtest.end") {
            apply_config_value(changed, key.name, "2019-07-04");
        } else if (key.name == "cae.arch") {
            apply_config_value(changed, key.name, "desk");
        } else if (key.name == "seed" || key.name == "data.window" ||
                   key.name == "data.stride" || key.name.rfind("render.", 0) == 0 ||
                   key.name.rfind("train.", 0) == 0 || key.name.rfind("backtest.", 0) == 0) {
            apply_config_value(changed, key.name, "77");
        } else {
            apply_config_value(changed, key.name, "elsewhere");
        }
        EXPECT_NE(config_hash(changed), base) << key.name;
    }
}

TEST(ConfigFile, WriteLoadRoundTrip) {
    PipelineConfig cfg;
    apply_config_value(cfg, "backtest.k2", "9");
    apply_config_value(cfg, "cae.arch", "tiny");
    apply_config_value(cfg, "train.learning_rate", "0.0625");
    apply_config_value(cfg, "backtest.start", "2015-01-05");
    apply_config_value(cfg, "paths.data", "data/prices.csv");

    const auto path = temp_file("cf_config_roundtrip.cfg");
    write_config_file(cfg, path.string());
    PipelineConfig loaded;
    load_config_file(loaded, path.string());
    EXPECT_EQ(canonical_config_text(loaded), canonical_config_text(cfg));
    EXPECT_EQ(config_hash(loaded), config_hash(cfg));
    std::filesystem::remove(path);
}

TEST(ConfigValidate, CatchesCrossFieldProblems) {
    auto expect_rejects = [](const std::string& key, const std::string& value) {
        PipelineConfig cfg;
        apply_config_value(cfg, key, value);
        EXPECT_THROW(cfg.validate(), Error) << key << "=" << value;
    };
    expect_rejects("data.window", "1");
    expect_rejects("data.stride", "0");
    expect_rejects("render.width", "0");
    expect_rejects("cae.arch", "resnet");
    expect_rejects("train.epochs", "0");
    expect_rejects("backtest.k2", "0");

    PipelineConfig cfg;
    apply_config_value(cfg, "backtest.start", "2016-01-01");
    apply_config_value(cfg, "backtest.end", "2015-01-01");
    EXPECT_THROW(cfg.validate(), Error);
}
