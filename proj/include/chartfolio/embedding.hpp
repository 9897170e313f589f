#pragma once

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/error.hpp"

namespace chartfolio {

// Encoder bottleneck vector for one (symbol, window) pair. model_id is the
// checksum of the producing checkpoint so downstream consumers can detect
// mixed-model stores.
struct Embedding {
    std::string symbol;
    Date window_start;
    Date window_end; // last bar the chart covers
    Eigen::VectorXd vector;
    std::string model_id;

    bool finite() const {
        for (Eigen::Index i = 0; i < vector.size(); ++i)
            if (!std::isfinite(vector[i])) return false;
        return true;
    }
};

struct EmbeddingStore {
    std::vector<Embedding> rows;
    // Provenance carried in the store header.
    std::string model_id;
    std::string config_hash;
    std::optional<Date> train_data_end;

    const Embedding* find(const std::string& symbol, const Date& window_start) const {
        for (const auto& e : rows)
            if (e.symbol == symbol && e.window_start == window_start) return &e;
        return nullptr;
    }

    const Embedding* find_by_end(const std::string& symbol, const Date& window_end) const {
        for (const auto& e : rows)
            if (e.symbol == symbol && e.window_end == window_end) return &e;
        return nullptr;
    }
};

inline void write_embedding_store(const std::string& path, const EmbeddingStore& store,
                                  const std::vector<std::string>& extra_comments = {}) {
    if (store.rows.empty()) throw data_error("embedding store is empty");
    const Eigen::Index dim = store.rows.front().vector.size();
    CsvWriter writer(path);
    writer.comment("config_hash=" + store.config_hash);
    writer.comment("model_id=" + store.model_id);
    if (store.train_data_end) writer.comment("train_data_end=" + to_string(*store.train_data_end));
    for (const auto& c : extra_comments) writer.comment(c);
    std::string header = "symbol,window_start,window_end,model_id";
    for (Eigen::Index i = 0; i < dim; ++i) header += ",v" + std::to_string(i);
    writer.line(header);
    for (const auto& e : store.rows) {
        if (e.vector.size() != dim) throw data_error("embedding store: mixed dimensions");
        std::vector<std::string> fields = {e.symbol, to_string(e.window_start),
                                           to_string(e.window_end), e.model_id};
        for (Eigen::Index i = 0; i < dim; ++i) fields.push_back(format_double(e.vector[i]));
        writer.row(fields);
    }
    writer.close();
}

inline EmbeddingStore read_embedding_store(const std::string& path) {
    CsvReader reader(path);
    EmbeddingStore store;
    auto header = reader.next();
    if (!header || header->size() < 5 || (*header)[0] != "symbol")
        throw data_error(path + ": not an embedding store");
    const size_t dim = header->size() - 4;
    while (auto row = reader.next()) {
        if (row->size() != dim + 4) throw data_error(path + ": malformed embedding row");
        Embedding e;
        e.symbol = (*row)[0];
        auto start = parse_date((*row)[1]);
        auto end = parse_date((*row)[2]);
        if (!start || !end) throw data_error(path + ": bad date in embedding row");
        e.window_start = *start;
        e.window_end = *end;
        e.model_id = (*row)[3];
        e.vector.resize(static_cast<Eigen::Index>(dim));
        for (size_t i = 0; i < dim; ++i) {
            auto v = parse_double((*row)[i + 4]);
            if (!v) throw data_error(path + ": bad embedding value: " + (*row)[i + 4]);
            e.vector[static_cast<Eigen::Index>(i)] = *v;
        }
        store.rows.push_back(std::move(e));
    }
    for (const auto& c : reader.comments()) {
        if (auto v = comment_value(c, "config_hash")) store.config_hash = *v;
        if (auto v = comment_value(c, "train_data_end")) {
            if (auto d = parse_date(*v)) store.train_data_end = *d;
        }
        if (auto v = comment_value(c, "model_id")) store.model_id = *v;
    }
    if (store.model_id.empty() && !store.rows.empty()) store.model_id = store.rows[0].model_id;
    return store;
}

} // namespace chartfolio
