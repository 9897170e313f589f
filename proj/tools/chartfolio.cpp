// Command-line front end for the chart-embedding portfolio pipeline:
//   ingest -> render -> train -> encode -> cluster/backtest -> report
// Each command reads a config file plus flag overrides (flag wins) and
// writes artifacts stamped with the config hash and seed.

#include <CLI11.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chartfolio/chartfolio.hpp"

namespace fs = std::filesystem;
using namespace chartfolio;

namespace {

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw missing_artifact_error("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (!fs::is_directory(parent))
        throw data_error("cannot create directory " + parent.string());
}

// Leading `# key=value` comments of a CSV artifact.
std::map<std::string, std::string> artifact_header(const std::string& path) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(std::move(line));
        if (line.empty()) continue;
        if (line[0] != '#') break;
        for (const char* key :
             {"config_hash", "seed", "inputs_hash", "model_id", "train_data_end"})
            if (auto v = comment_value(line, key)) out[key] = *v;
    }
    return out;
}

void warn_on_hash_mismatch(const std::string& artifact, const std::string& current_hash) {
    const auto header = artifact_header(artifact);
    const auto it = header.find("config_hash");
    if (it != header.end() && !it->second.empty() && it->second != current_hash)
        std::cerr << "warning: " << artifact << " was produced under config hash "
                  << it->second << ", current config hashes to " << current_hash << "\n";
}

// Exclusive lock on the report directory; one writing command at a time.
class DirLock {
  public:
    explicit DirLock(const std::string& dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        path_ = (fs::path(dir) / ".lock").string();
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw config_error("report directory is locked by another command (" + path_ +
                               " exists; delete it if the owner crashed)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] ssize_t n = ::write(fd_, pid.data(), pid.size());
    }

    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }

    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::string path_;
    int fd_ = -1;
};

std::vector<std::string> provenance_comments(const PipelineConfig& cfg) {
    return {"config_hash=" + config_hash(cfg), "seed=" + std::to_string(cfg.seed)};
}

std::vector<OhlcSeries> load_market(const PipelineConfig& cfg) {
    if (cfg.data_csv.empty())
        throw config_error("paths.data is not set (use --data or the config file)");
    LoadOptions opts;
    return load_csv(cfg.data_csv, opts);
}

// ---------------------------------------------------------------- commands

int cmd_ingest(const PipelineConfig& cfg, const std::string& out_path) {
    if (cfg.data_csv.empty()) throw config_error("paths.data is not set (use --data)");
    std::ostringstream diag;
    LoadOptions opts;
    opts.diagnostics = &diag;
    const auto series = load_csv(cfg.data_csv, opts);
    std::cerr << diag.str();

    size_t bars = 0, rejected = 0;
    for (const auto& s : series) bars += s.bars.size();
    {
        std::istringstream lines(diag.str());
        std::string l;
        while (std::getline(lines, l)) ++rejected;
    }
    Date lo = series.front().bars.front().date, hi = lo;
    for (const auto& s : series)
        for (const auto& b : s.bars) {
            lo = std::min(lo, b.date);
            hi = std::max(hi, b.date);
        }

    auto comments = provenance_comments(cfg);
    comments.push_back("source=" + cfg.data_csv);
    comments.push_back("source_hash=" + file_hash(cfg.data_csv));
    ensure_parent_dir(out_path);
    write_csv(out_path, series, comments);
    std::cout << "ingest: " << series.size() << " symbols, " << bars << " bars ("
              << to_string(lo) << " .. " << to_string(hi) << "), " << rejected
              << " rows rejected -> " << out_path << "\n";
    return 0;
}

std::string render_inputs_hash(const PipelineConfig& cfg) {
    std::string text = file_hash(cfg.data_csv) + "|" + std::to_string(cfg.window) + "|" +
                       std::to_string(cfg.stride) + "|" + std::to_string(cfg.render.width) +
                       "|" + std::to_string(cfg.render.height) + "|" +
                       format_double(cfg.render.candle_body_fraction) + "|" +
                       format_double(cfg.render.margin_fraction);
    return to_hex(fnv1a64(text));
}

int cmd_render(const PipelineConfig& cfg) {
    const std::string manifest_path = (fs::path(cfg.chart_dir) / "manifest.csv").string();
    const std::string inputs = render_inputs_hash(cfg);
    if (fs::exists(manifest_path)) {
        const auto header = artifact_header(manifest_path);
        const auto it = header.find("inputs_hash");
        if (it != header.end() && it->second == inputs) {
            std::cout << "render: manifest up to date (" << manifest_path << "), skipping\n";
            return 0;
        }
    }

    const auto series = load_market(cfg);
    std::vector<PriceWindow> windows;
    for (const auto& s : series) {
        auto w = extract_windows(s, cfg.window, cfg.stride);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    if (windows.empty())
        throw data_error("render: no complete " + std::to_string(cfg.window) +
                         "-day windows in " + cfg.data_csv);

    auto comments = provenance_comments(cfg);
    comments.push_back("inputs_hash=" + inputs);
    const auto manifest = render_universe(windows, cfg.render, cfg.chart_dir, manifest_path,
                                          comments);
    std::cout << "render: wrote " << manifest.size() << " charts to " << cfg.chart_dir
              << "\n";
    return 0;
}

int cmd_train(PipelineConfig cfg, const std::string& train_end_flag) {
    const std::string manifest_path = (fs::path(cfg.chart_dir) / "manifest.csv").string();
    if (!fs::exists(manifest_path))
        throw missing_artifact_error("chart manifest " + manifest_path +
                                     " not found; run `render` first");
    warn_on_hash_mismatch(manifest_path, config_hash(cfg));

    auto entries = load_manifest(manifest_path);
    std::optional<Date> train_end;
    if (!train_end_flag.empty()) {
        train_end = parse_date(train_end_flag);
        if (!train_end) throw config_error("--train-end: expected YYYY-MM-DD");
        std::erase_if(entries, [&](const ManifestEntry& e) { return e.end_date > *train_end; });
    }
    if (entries.empty())
        throw data_error("train: no charts" +
                         (train_end ? " ending on or before " + to_string(*train_end) : ""));

    const auto arch = cfg.architecture();
    std::vector<cae::Tensor> images;
    images.reserve(entries.size());
    Date last_bar = entries.front().end_date;
    for (const auto& e : entries) {
        const PngImage png = read_png(e.path);
        if (png.width != arch.input_size || png.height != arch.input_size)
            throw data_error("train: " + e.path + " is " + std::to_string(png.width) + "x" +
                             std::to_string(png.height) + " but architecture '" + arch.name +
                             "' expects " + std::to_string(arch.input_size) + "x" +
                             std::to_string(arch.input_size) +
                             " (set render.width/height to match)");
        images.push_back(cae::image_to_tensor(png));
        last_bar = std::max(last_bar, e.end_date);
    }

    cae::CaeNetwork net(arch, cfg.seed);
    cae::TrainConfig tc = cfg.train;
    tc.shuffle_seed = cfg.seed;
    std::cout << "train: " << images.size() << " charts, arch '" << arch.name << "' ("
              << net.parameter_count() << " parameters)\n";
    const auto result = cae::train(net, images, tc, &std::cout);

    cae::CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epochs_trained = static_cast<uint32_t>(tc.epochs);
    meta.batch_size = static_cast<uint32_t>(tc.batch_size);
    meta.initial_lr = tc.learning_rate;
    meta.final_lr = result.final_learning_rate;
    meta.lr_decay_factor = tc.decay_factor;
    meta.final_loss = result.final_loss;
    meta.config_hash = config_hash(cfg);
    meta.train_data_end = last_bar;
    ensure_parent_dir(cfg.checkpoint_path);
    cae::save_checkpoint(cfg.checkpoint_path, net, meta);
    std::cout << "train: checkpoint " << cfg.checkpoint_path << " (model_id "
              << cae::checkpoint_model_id(cfg.checkpoint_path) << ", final loss "
              << result.final_loss << ", data through " << to_string(last_bar) << ")\n";
    return 0;
}

int cmd_encode(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.checkpoint_path))
        throw missing_artifact_error("checkpoint " + cfg.checkpoint_path +
                                     " not found; run `train` first");
    const std::string manifest_path = (fs::path(cfg.chart_dir) / "manifest.csv").string();
    if (!fs::exists(manifest_path))
        throw missing_artifact_error("chart manifest " + manifest_path +
                                     " not found; run `render` first");

    const auto ck = cae::load_checkpoint(cfg.checkpoint_path);
    const std::string current_hash = config_hash(cfg);
    if (!ck.meta.config_hash.empty() && ck.meta.config_hash != current_hash)
        std::cerr << "warning: checkpoint was trained under config hash " << ck.meta.config_hash
                  << ", current config hashes to " << current_hash << "\n";
    warn_on_hash_mismatch(manifest_path, current_hash);

    const std::string inputs = to_hex(fnv1a64(ck.model_id + "|" + file_hash(manifest_path)));
    if (fs::exists(cfg.embedding_path)) {
        const auto header = artifact_header(cfg.embedding_path);
        const auto it = header.find("inputs_hash");
        if (it != header.end() && it->second == inputs) {
            std::cout << "encode: embedding store up to date (" << cfg.embedding_path
                      << "), skipping\n";
            return 0;
        }
    }

    auto net = cae::restore_network(ck);
    const auto entries = load_manifest(manifest_path);
    if (entries.empty()) throw data_error("encode: chart manifest is empty");

    EmbeddingStore store;
    store.model_id = ck.model_id;
    store.config_hash = current_hash;
    store.train_data_end = ck.meta.train_data_end;
    for (const auto& e : entries) {
        const PngImage png = read_png(e.path);
        if (png.width != ck.arch.input_size || png.height != ck.arch.input_size)
            throw data_error("encode: " + e.path + " does not match checkpoint input size " +
                             std::to_string(ck.arch.input_size));
        Embedding emb;
        emb.symbol = e.symbol;
        emb.window_start = e.start_date;
        emb.window_end = e.end_date;
        emb.model_id = ck.model_id;
        emb.vector = net.encode(cae::image_to_tensor(png));
        store.rows.push_back(std::move(emb));
    }
    ensure_parent_dir(cfg.embedding_path);
    write_embedding_store(cfg.embedding_path, store,
                          {"seed=" + std::to_string(cfg.seed), "inputs_hash=" + inputs});
    std::cout << "encode: " << store.rows.size() << " embeddings (dim "
              << store.rows.front().vector.size() << ", model " << ck.model_id << ") -> "
              << cfg.embedding_path << "\n";
    return 0;
}

EmbeddingStore load_store(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.embedding_path))
        throw missing_artifact_error("embedding store " + cfg.embedding_path +
                                     " not found; run `encode` first");
    warn_on_hash_mismatch(cfg.embedding_path, config_hash(cfg));
    return read_embedding_store(cfg.embedding_path);
}

int cmd_cluster(const PipelineConfig& cfg, const std::string& date_flag,
                const std::string& out_flag, const std::string& graph_flag) {
    const auto store = load_store(cfg);
    auto date = parse_date(date_flag);
    if (!date) throw config_error("--date: expected YYYY-MM-DD, got '" + date_flag + "'");

    std::vector<Embedding> selected;
    std::set<std::string> ends;
    for (const auto& e : store.rows) {
        if (e.window_end == *date) selected.push_back(e);
        ends.insert(to_string(e.window_end));
    }
    if (selected.empty()) {
        std::string available;
        int shown = 0;
        for (const auto& d : ends) {
            if (shown++ == 6) {
                available += " ...";
                break;
            }
            available += (available.empty() ? "" : " ") + d;
        }
        throw data_error("cluster: no embeddings for windows ending " + to_string(*date) +
                         " (available: " + available + ")");
    }

    const SimilarityGraph graph = build_graph(selected);
    ClusterAssignment assignment = cluster(graph);
    assignment.rebalance_date = *date;

    const std::string out = out_flag.empty()
                                ? "artifacts/clusters_" + to_string(*date) + ".csv"
                                : out_flag;
    ensure_parent_dir(out);
    auto comments = provenance_comments(cfg);
    comments.push_back("model_id=" + store.model_id);
    comments.push_back("modularity=" + format_double(assignment.modularity));
    write_assignment(out, assignment, comments);
    if (!graph_flag.empty()) {
        ensure_parent_dir(graph_flag);
        write_graph(graph_flag, graph, comments);
    }
    std::cout << "cluster: " << selected.size() << " stocks -> "
              << assignment.community_count() << " communities (Q = "
              << assignment.modularity << ") -> " << out << "\n";
    return 0;
}

int cmd_backtest(const PipelineConfig& cfg) {
    if (!cfg.start || !cfg.end)
        throw config_error("backtest.start and backtest.end must be set (flags --start/--end)");
    const auto data = load_market(cfg);
    const auto store = load_store(cfg);

    if (!cfg.paper_mode) {
        if (!store.train_data_end)
            throw config_error(
                "embedding store does not record train_data_end; re-run `encode` from a fresh "
                "checkpoint, or pass --paper-mode to accept train/test overlap");
        if (!(*store.train_data_end < *cfg.start))
            throw config_error("model was trained on data through " +
                               to_string(*store.train_data_end) +
                               ", which overlaps the backtest span starting " +
                               to_string(*cfg.start) +
                               "; move --start later or pass --paper-mode");
    }

    BacktestConfig bc;
    bc.formation_window = cfg.formation_window;
    bc.holding_period = cfg.holding_period;
    bc.stride = cfg.backtest_stride;
    bc.k2 = cfg.k2;
    bc.start_date = *cfg.start;
    bc.end_date = *cfg.end;
    bc.skip_thin_dates = cfg.skip_thin_dates;

    const auto result = run(data, store_embed_fn(store), bc);

    DirLock lock(cfg.report_dir);
    auto comments = provenance_comments(cfg);
    comments.push_back("model_id=" + store.model_id);
    const fs::path dir(cfg.report_dir);
    write_equity_csv((dir / "equity.csv").string(), result.curve, comments);
    write_metrics_csv((dir / "metrics.csv").string(), result.report, comments);
    write_trades_csv((dir / "trades.csv").string(), result.report, comments);

    const auto& r = result.report;
    std::cout << "backtest: " << r.periods.size() << " periods, total return "
              << format_double(r.total_return) << ", max drawdown "
              << format_double(r.max_drawdown) << ", daily sharpe "
              << (r.daily_sharpe ? format_double(*r.daily_sharpe) : "undefined") << "\n"
              << "backtest: report written to " << cfg.report_dir << "\n";
    return 0;
}

// Minimal deterministic SVG line plot of the equity curve, optionally
// against a benchmark normalized to 1.0 at its first point.
void write_equity_svg(const std::string& path, const EquityCurve& curve,
                      const EquityCurve* benchmark) {
    const double W = 900, H = 420, ml = 70, mr = 20, mt = 20, mb = 40;
    double lo = curve.points.front().value, hi = lo;
    auto scan = [&](const EquityCurve& c, double scale) {
        for (const auto& p : c.points) {
            lo = std::min(lo, p.value * scale);
            hi = std::max(hi, p.value * scale);
        }
    };
    scan(curve, 1.0);
    double bench_scale = 1.0;
    if (benchmark && !benchmark->points.empty()) {
        bench_scale = 1.0 / benchmark->points.front().value;
        scan(*benchmark, bench_scale);
    }
    if (hi <= lo) hi = lo + 1.0;

    char buf[256];
    std::string svg;
    auto emit = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof buf, fmt, args...);
        svg += buf;
    };
    auto x_of = [&](size_t i, size_t n) {
        return ml + (W - ml - mr) * (n <= 1 ? 0.0 : double(i) / double(n - 1));
    };
    auto y_of = [&](double v) { return H - mb - (H - mt - mb) * (v - lo) / (hi - lo); };

    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 900 420\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"900\" height=\"420\" fill=\"white\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        const double y = y_of(v);
        emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", ml, y,
             W - mr, y);
        emit("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n", ml - 6, y + 4, v);
    }
    auto polyline = [&](const EquityCurve& c, double scale, const char* color) {
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < c.points.size(); ++i)
            emit("%.2f,%.2f ", x_of(i, c.points.size()), y_of(c.points[i].value * scale));
        svg += "\"/>\n";
    };
    polyline(curve, 1.0, "#1f6fb4");
    if (benchmark && !benchmark->points.empty()) polyline(*benchmark, bench_scale, "#c23b3b");

    emit("<text x=\"%.1f\" y=\"%.1f\">%s</text>\n", ml, H - 10,
         to_string(curve.points.front().date).c_str());
    emit("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%s</text>\n", W - mr, H - 10,
         to_string(curve.points.back().date).c_str());
    emit("<text x=\"%.1f\" y=\"%.1f\" fill=\"#1f6fb4\">portfolio</text>\n", W - 180.0, mt + 14);
    if (benchmark)
        emit("<text x=\"%.1f\" y=\"%.1f\" fill=\"#c23b3b\">benchmark</text>\n", W - 100.0,
             mt + 14);
    svg += "</svg>\n";

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    out << svg;
    if (!out) throw data_error("short write on " + path);
}

int cmd_report(const PipelineConfig& cfg, const std::string& benchmark_flag) {
    const fs::path dir(cfg.report_dir);
    const std::string equity_path = (dir / "equity.csv").string();
    const std::string metrics_path = (dir / "metrics.csv").string();
    for (const auto& p : {equity_path, metrics_path})
        if (!fs::exists(p))
            throw missing_artifact_error(p + " not found; run `backtest` first");

    const EquityCurve curve = read_equity_csv(equity_path);
    std::optional<EquityCurve> benchmark;
    if (!benchmark_flag.empty()) benchmark = read_equity_csv(benchmark_flag);

    CsvReader metrics_reader(metrics_path);
    std::vector<std::pair<std::string, std::string>> metrics;
    auto header = metrics_reader.next();
    if (!header) throw data_error(metrics_path + ": empty metrics file");
    while (auto row = metrics_reader.next()) {
        if (row->size() >= 2) metrics.emplace_back((*row)[0], (*row)[1]);
    }
    const auto provenance = artifact_header(metrics_path);

    DirLock lock(cfg.report_dir);
    write_equity_svg((dir / "equity.svg").string(), curve,
                     benchmark ? &*benchmark : nullptr);

    std::ofstream md((dir / "report.md").string(), std::ios::trunc);
    if (!md) throw data_error("cannot write report.md");
    md << "# Backtest report\n\n";
    md << "Annualization conventions: Sharpe uses sqrt(252); daily and monthly mean returns "
          "are scaled by 252 and 12; yearly is unscaled. These conventions are this "
          "toolkit's interpretation, stated here because the source protocol leaves them "
          "open.\n\n";
    md << "| metric | value |\n|---|---|\n";
    for (const auto& [k, v] : metrics) md << "| " << k << " | " << v << " |\n";
    md << "\n![equity curve](equity.svg)\n\n";
    md << "Span: " << to_string(curve.points.front().date) << " to "
       << to_string(curve.points.back().date) << " (" << curve.points.size()
       << " daily points)\n\n";
    for (const char* key : {"config_hash", "seed", "model_id"}) {
        const auto it = provenance.find(key);
        if (it != provenance.end()) md << "- " << key << ": `" << it->second << "`\n";
    }
    md.close();
    if (!md) throw data_error("short write on report.md");
    std::cout << "report: wrote " << (dir / "report.md").string() << " and equity.svg\n";
    return 0;
}

// ------------------------------------------------------------------- main

struct KeyedOption {
    CLI::Option* opt;
    std::string key;
    std::string* value;
};

int run_cli(int argc, char** argv) {
    CLI::App app{"candlestick-chart embedding, clustering and portfolio backtesting"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path,
                   "config file (key = value per line); defaults to $CHARTFOLIO_CONFIG")
        ->envname("CHARTFOLIO_CONFIG");
    std::vector<std::string> sets;
    app.add_option("--set", sets, "override any config key, e.g. --set backtest.k2=3");

    const PipelineConfig defaults;
    std::deque<std::string> flag_storage; // deque: stable addresses for CLI11 bindings
    std::vector<KeyedOption> keyed;

    auto add_key_option = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                              const std::string& help) {
        const auto* k = config_detail::find_key(key);
        if (!k) throw config_error("internal: unknown config key " + key);
        flag_storage.emplace_back();
        CLI::Option* o = cmd->add_option(flag, flag_storage.back(), help);
        o->default_str(k->get(defaults));
        keyed.push_back({o, key, &flag_storage.back()});
    };

    auto* ingest = app.add_subcommand("ingest", "validate a raw OHLC CSV and normalize it");
    std::string ingest_out = "artifacts/data.csv";
    add_key_option(ingest, "--data", "paths.data", "raw OHLC CSV");
    ingest->add_option("--out", ingest_out, "normalized output CSV")->capture_default_str();

    auto* render = app.add_subcommand("render", "rasterize rolling windows to chart PNGs");
    add_key_option(render, "--data", "paths.data", "OHLC CSV");
    add_key_option(render, "--charts", "paths.charts", "output chart directory");
    add_key_option(render, "--window", "data.window", "bars per chart");
    add_key_option(render, "--stride", "data.stride", "bars between window starts");
    add_key_option(render, "--width", "render.width", "image width");
    add_key_option(render, "--height", "render.height", "image height");

    auto* train = app.add_subcommand("train", "train the autoencoder on rendered charts");
    std::string train_end;
    add_key_option(train, "--charts", "paths.charts", "chart directory with manifest.csv");
    add_key_option(train, "--checkpoint", "paths.checkpoint", "output checkpoint");
    add_key_option(train, "--preset", "cae.arch", "architecture preset (paper, desk, tiny)");
    add_key_option(train, "--epochs", "train.epochs", "training epochs");
    add_key_option(train, "--batch-size", "train.batch_size", "mini-batch size");
    add_key_option(train, "--learning-rate", "train.learning_rate", "SGD learning rate");
    add_key_option(train, "--decay-factor", "train.decay_factor", "plateau LR multiplier");
    add_key_option(train, "--seed", "seed", "weight init and shuffle seed");
    train->add_option("--train-end", train_end,
                      "use only charts whose last bar is on or before this date");

    auto* encode = app.add_subcommand("encode", "embed every chart with a trained checkpoint");
    add_key_option(encode, "--charts", "paths.charts", "chart directory with manifest.csv");
    add_key_option(encode, "--checkpoint", "paths.checkpoint", "trained checkpoint");
    add_key_option(encode, "--embeddings", "paths.embeddings", "output embedding store CSV");

    auto* cluster_cmd = app.add_subcommand("cluster", "cluster one date's embeddings");
    std::string cluster_date, cluster_out, cluster_graph;
    add_key_option(cluster_cmd, "--embeddings", "paths.embeddings", "embedding store CSV");
    cluster_cmd->add_option("--date", cluster_date, "formation window end date (YYYY-MM-DD)")
        ->required();
    cluster_cmd->add_option("--out", cluster_out,
                            "assignment CSV (default artifacts/clusters_<date>.csv)");
    cluster_cmd->add_option("--export-graph", cluster_graph,
                            "also write the similarity matrix CSV here");

    auto* backtest = app.add_subcommand("backtest", "run the rolling formation/holding protocol");
    add_key_option(backtest, "--data", "paths.data", "OHLC CSV");
    add_key_option(backtest, "--embeddings", "paths.embeddings", "embedding store CSV");
    add_key_option(backtest, "--report-dir", "paths.report", "output directory");
    add_key_option(backtest, "--start", "backtest.start", "first rebalance date (YYYY-MM-DD)");
    add_key_option(backtest, "--end", "backtest.end", "last holding date (YYYY-MM-DD)");
    add_key_option(backtest, "--formation-window", "backtest.formation_window",
                   "lookback bars per rebalance");
    add_key_option(backtest, "--holding-period", "backtest.holding_period", "bars held");
    add_key_option(backtest, "--stride", "backtest.stride", "bars between rebalances");
    add_key_option(backtest, "--k2", "backtest.k2", "portfolio size");
    bool paper_mode = false, skip_thin = false;
    backtest->add_flag("--paper-mode", paper_mode,
                       "allow the model's training span to overlap the backtest");
    backtest->add_flag("--skip-thin-dates", skip_thin,
                       "skip rebalances with fewer than k2 investable stocks");

    auto* report = app.add_subcommand("report", "render tables and an equity plot");

    // Let --config/--set appear after the subcommand name as well as before.
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();
    std::string benchmark_path;
    add_key_option(report, "--report-dir", "paths.report", "backtest output directory");
    report->add_option("--benchmark", benchmark_path, "benchmark curve CSV (date,value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    PipelineConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects key=value, got '" + s + "'");
        apply_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [opt, key, value] : keyed)
        if (opt->count() > 0) apply_config_value(cfg, key, *value);
    if (paper_mode) cfg.paper_mode = true;
    if (skip_thin) cfg.skip_thin_dates = true;
    cfg.validate();

    if (ingest->parsed()) return cmd_ingest(cfg, ingest_out);
    if (render->parsed()) return cmd_render(cfg);
    if (train->parsed()) return cmd_train(cfg, train_end);
    if (encode->parsed()) return cmd_encode(cfg);
    if (cluster_cmd->parsed()) return cmd_cluster(cfg, cluster_date, cluster_out, cluster_graph);
    if (backtest->parsed()) return cmd_backtest(cfg);
    if (report->parsed()) return cmd_report(cfg, benchmark_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
