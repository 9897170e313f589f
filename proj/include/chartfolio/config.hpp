#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chartfolio/cae/arch.hpp"
#include "chartfolio/cae/trainer.hpp"
#include "chartfolio/chart_render.hpp"
#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/hash.hpp"

namespace chartfolio {

// Single source of truth for a pipeline run. Every default matches the
// reference protocol: 20-day windows, stride 10, 10-day hold, K2 = 5,
// batch 64, learning rate 0.001, decay 0.1, 224x224 charts.
struct PipelineConfig {
    // paths
    std::string data_csv;
    std::string chart_dir = "artifacts/charts";
    std::string checkpoint_path = "artifacts/cae.ckpt";
    std::string embedding_path = "artifacts/embeddings.csv";
    std::string report_dir = "artifacts/report";

    uint64_t seed = 42; // governs weight init and shuffle order

    // chart windowing
    int window = 20;
    int stride = 10;

    RenderConfig render; // 224x224, fractions 0.8 / 0.05

    std::string arch = "paper";
    cae::TrainConfig train; // epochs 50, batch 64, lr 0.001, decay 0.1

    // backtest protocol
    int formation_window = 20;
    int holding_period = 10;
    int backtest_stride = 10;
    int k2 = 5;
    std::optional<Date> start;
    std::optional<Date> end;
    bool paper_mode = false;      // allow train/backtest span overlap
    bool skip_thin_dates = false; // skip rebalances with a thin universe

    void validate() const {
        if (window < 2) throw config_error("data.window: must be >= 2");
        if (stride < 1) throw config_error("data.stride: must be >= 1");
        render.validate();
        architecture_check();
        train.validate();
        if (formation_window < 2) throw config_error("backtest.formation_window: must be >= 2");
        if (holding_period < 1) throw config_error("backtest.holding_period: must be >= 1");
        if (backtest_stride < 1) throw config_error("backtest.stride: must be >= 1");
        if (k2 < 1) throw config_error("backtest.k2: must be >= 1");
        if (start && end && !(*start < *end)) throw config_error("backtest.start must precede backtest.end");
    }

    cae::CaeArchitecture architecture() const { return cae::architecture_by_name(arch); }

  private:
    void architecture_check() const { (void)cae::architecture_by_name(arch); }
};

namespace config_detail {

struct Key {
    std::string name;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error(key + ": expected an integer, got '" + v + "'");
    }
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    // stoull accepts a leading '-' and wraps, so digits are checked up front.
    try {
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument(v);
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& key, const std::string& v) {
    auto d = parse_double(v);
    if (!d) throw config_error(key + ": expected a number, got '" + v + "'");
    return *d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error(key + ": expected true/false, got '" + v + "'");
}

inline std::optional<Date> parse_opt_date(const std::string& key, const std::string& v) {
    if (v.empty()) return std::nullopt;
    auto d = parse_date(v);
    if (!d) throw config_error(key + ": expected YYYY-MM-DD, got '" + v + "'");
    return d;
}

// The key table drives parsing, canonical serialization, and hashing, so
// the three can never disagree about what a config contains.
inline const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        {"paths.data", [](const PipelineConfig& c) { return c.data_csv; },
         [](PipelineConfig& c, const std::string& v) { c.data_csv = v; }},
        {"paths.charts", [](const PipelineConfig& c) { return c.chart_dir; },
         [](PipelineConfig& c, const std::string& v) { c.chart_dir = v; }},
        {"paths.checkpoint", [](const PipelineConfig& c) { return c.checkpoint_path; },
         [](PipelineConfig& c, const std::string& v) { c.checkpoint_path = v; }},
        {"paths.embeddings", [](const PipelineConfig& c) { return c.embedding_path; },
         [](PipelineConfig& c, const std::string& v) { c.embedding_path = v; }},
        {"paths.report", [](const PipelineConfig& c) { return c.report_dir; },
         [](PipelineConfig& c, const std::string& v) { c.report_dir = v; }},
        {"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
         [](PipelineConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
        {"data.window", [](const PipelineConfig& c) { return std::to_string(c.window); },
         [](PipelineConfig& c, const std::string& v) { c.window = parse_int("data.window", v); }},
        {"data.stride", [](const PipelineConfig& c) { return std::to_string(c.stride); },
         [](PipelineConfig& c, const std::string& v) { c.stride = parse_int("data.stride", v); }},
        {"render.width", [](const PipelineConfig& c) { return std::to_string(c.render.width); },
         [](PipelineConfig& c, const std::string& v) { c.render.width = parse_int("render.width", v); }},
        {"render.height", [](const PipelineConfig& c) { return std::to_string(c.render.height); },
         [](PipelineConfig& c, const std::string& v) { c.render.height = parse_int("render.height", v); }},
        {"render.body_fraction",
         [](const PipelineConfig& c) { return format_double(c.render.candle_body_fraction); },
         [](PipelineConfig& c, const std::string& v) {
             c.render.candle_body_fraction = parse_real("render.body_fraction", v);
         }},
        {"render.margin_fraction",
         [](const PipelineConfig& c) { return format_double(c.render.margin_fraction); },
         [](PipelineConfig& c, const std::string& v) {
             c.render.margin_fraction = parse_real("render.margin_fraction", v);
         }},
        {"cae.arch", [](const PipelineConfig& c) { return c.arch; },
         [](PipelineConfig& c, const std::string& v) { c.arch = v; }},
        {"train.epochs", [](const PipelineConfig& c) { return std::to_string(c.train.epochs); },
         [](PipelineConfig& c, const std::string& v) { c.train.epochs = parse_int("train.epochs", v); }},
        {"train.batch_size",
         [](const PipelineConfig& c) { return std::to_string(c.train.batch_size); },
         [](PipelineConfig& c, const std::string& v) {
             c.train.batch_size = parse_int("train.batch_size", v);
         }},
        {"train.learning_rate",
         [](const PipelineConfig& c) { return format_double(c.train.learning_rate); },
         [](PipelineConfig& c, const std::string& v) {
             c.train.learning_rate = parse_real("train.learning_rate", v);
         }},
        {"train.decay_factor",
         [](const PipelineConfig& c) { return format_double(c.train.decay_factor); },
         [](PipelineConfig& c, const std::string& v) {
             c.train.decay_factor = parse_real("train.decay_factor", v);
         }},
        {"train.plateau_min_delta",
         [](const PipelineConfig& c) { return format_double(c.train.plateau_min_delta); },
         [](PipelineConfig& c, const std::string& v) {
             c.train.plateau_min_delta = parse_real("train.plateau_min_delta", v);
         }},
        {"train.plateau_patience",
         [](const PipelineConfig& c) { return std::to_string(c.train.plateau_patience); },
         [](PipelineConfig& c, const std::string& v) {
             c.train.plateau_patience = parse_int("train.plateau_patience", v);
         }},
        {"backtest.formation_window",
         [](const PipelineConfig& c) { return std::to_string(c.formation_window); },
         [](PipelineConfig& c, const std::string& v) {
             c.formation_window = parse_int("backtest.formation_window", v);
         }},
        {"backtest.holding_period",
         [](const PipelineConfig& c) { return std::to_string(c.holding_period); },
         [](PipelineConfig& c, const std::string& v) {
             c.holding_period = parse_int("backtest.holding_period", v);
         }},
        {"backtest.stride",
         [](const PipelineConfig& c) { return std::to_string(c.backtest_stride); },
         [](PipelineConfig& c, const std::string& v) {
             c.backtest_stride = parse_int("backtest.stride", v);
         }},
        {"backtest.k2", [](const PipelineConfig& c) { return std::to_string(c.k2); },
         [](PipelineConfig& c, const std::string& v) { c.k2 = parse_int("backtest.k2", v); }},
        {"backtest.start",
         [](const PipelineConfig& c) { return c.start ? to_string(*c.start) : std::string(); },
         [](PipelineConfig& c, const std::string& v) { c.start = parse_opt_date("backtest.start", v); }},
        {"backtest.end",
         [](const PipelineConfig& c) { return c.end ? to_string(*c.end) : std::string(); },
         [](PipelineConfig& c, const std::string& v) { c.end = parse_opt_date("backtest.end", v); }},
        {"backtest.paper_mode",
         [](const PipelineConfig& c) { return std::string(c.paper_mode ? "true" : "false"); },
         [](PipelineConfig& c, const std::string& v) {
             c.paper_mode = parse_bool("backtest.paper_mode", v);
         }},
        {"backtest.skip_thin_dates",
         [](const PipelineConfig& c) { return std::string(c.skip_thin_dates ? "true" : "false"); },
         [](PipelineConfig& c, const std::string& v) {
             c.skip_thin_dates = parse_bool("backtest.skip_thin_dates", v);
         }},
    };
    return keys;
}

inline const Key* find_key(const std::string& name) {
    for (const auto& k : key_table())
        if (k.name == name) return &k;
    return nullptr;
}

} // namespace config_detail

inline void apply_config_value(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    const auto* k = config_detail::find_key(key);
    if (!k) throw config_error("unknown config key '" + key + "'");
    k->set(cfg, value);
}

// File format: one `key = value` per line; '#' starts a comment; blank
// lines ignored. Unknown keys are errors so typos cannot silently fall
// back to defaults.
inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        try {
            apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw config_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

// Full key=value listing in table order (already alphabetical enough to
// be stable; the order is fixed by the table, not by caller input).
inline std::string canonical_config_text(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& k : config_detail::key_table()) {
        out += k.name;
        out += '=';
        out += k.get(cfg);
        out += '\n';
    }
    return out;
}

// Identity embedded in every artifact this config produces.
inline std::string config_hash(const PipelineConfig& cfg) {
    return to_hex(fnv1a64(canonical_config_text(cfg)));
}

inline void write_config_file(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write config file: " + path);
    for (const auto& k : config_detail::key_table())
        out << k.name << " = " << k.get(cfg) << "\n";
    if (!out) throw data_error("short write on config file: " + path);
}

} // namespace chartfolio
