#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "chartfolio/csv.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/embedding.hpp"
#include "chartfolio/error.hpp"

namespace chartfolio {

// Dense weighted stock graph. Node order is the sorted ticker order; that
// ordering is what makes everything downstream deterministic.
struct SimilarityGraph {
    std::vector<std::string> nodes;
    Eigen::MatrixXd weights; // symmetric, non-negative, zero diagonal

    double total_weight() const { return weights.sum() / 2.0; }

    void validate() const {
        const Eigen::Index n = weights.rows();
        if (n != weights.cols() || static_cast<size_t>(n) != nodes.size())
            throw data_error("graph: dimension mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (weights(i, i) != 0.0) throw data_error("graph: nonzero diagonal");
            for (Eigen::Index j = 0; j < n; ++j) {
                if (!std::isfinite(weights(i, j)) || weights(i, j) < 0.0)
                    throw data_error("graph: weights must be finite and non-negative");
                if (weights(i, j) != weights(j, i)) throw data_error("graph: asymmetric weights");
            }
        }
    }
};

// Partition of the graph for one rebalance date. Community ids are dense,
// 0-based, and ordered by each community's smallest member ticker.
struct ClusterAssignment {
    std::vector<std::string> symbols; // sorted ticker order
    std::vector<int> labels;          // parallel to symbols
    double modularity = 0.0;
    Date rebalance_date;

    int community_count() const {
        return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    }

    int label_of(const std::string& symbol) const {
        auto it = std::lower_bound(symbols.begin(), symbols.end(), symbol);
        if (it == symbols.end() || *it != symbol)
            throw data_error("assignment: unknown symbol " + symbol);
        return labels[static_cast<size_t>(it - symbols.begin())];
    }
};

// w_ij = max(0, cos(v_i, v_j)). Negative cosines are clamped to zero because
// the modularity objective is defined over non-negative weights.
inline SimilarityGraph build_graph(const std::vector<Embedding>& embeddings) {
    if (embeddings.size() < 2) throw data_error("build_graph: need at least 2 tickers");

    std::vector<size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return embeddings[a].symbol < embeddings[b].symbol; });

    const Eigen::Index dim = embeddings.front().vector.size();
    const std::string& model = embeddings.front().model_id;
    SimilarityGraph g;
    g.nodes.reserve(embeddings.size());
    std::vector<Eigen::VectorXd> unit;
    unit.reserve(embeddings.size());
    for (size_t k : order) {
        const Embedding& e = embeddings[k];
        if (e.vector.size() != dim)
            throw data_error("build_graph: dimension mismatch for " + e.symbol);
        if (e.model_id != model)
            throw data_error("build_graph: model_id mismatch for " + e.symbol);
        if (!e.finite()) throw data_error("build_graph: non-finite embedding for " + e.symbol);
        const double norm = e.vector.norm();
        if (norm == 0.0) throw data_error("build_graph: zero-norm embedding for " + e.symbol);
        if (!g.nodes.empty() && g.nodes.back() == e.symbol)
            throw data_error("build_graph: duplicate symbol " + e.symbol);
        g.nodes.push_back(e.symbol);
        unit.push_back(e.vector / norm);
    }

    const Eigen::Index n = static_cast<Eigen::Index>(g.nodes.size());
    g.weights = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = std::max(0.0, unit[i].dot(unit[j]));
            g.weights(i, j) = w;
            g.weights(j, i) = w;
        }
    }
    return g;
}

// Newman modularity of a labeled partition:
//   Q = (1/2m) * sum_ij [w_ij - s_i s_j / 2m] delta(c_i, c_j)
// An edgeless graph has Q = 0 by convention.
inline double modularity(const SimilarityGraph& graph, const std::vector<int>& labels) {
    const Eigen::Index n = graph.weights.rows();
    if (labels.size() != static_cast<size_t>(n))
        throw data_error("modularity: labels do not cover all nodes");
    const double two_m = graph.weights.sum();
    if (two_m == 0.0) return 0.0;

    Eigen::VectorXd degree = graph.weights.rowwise().sum();
    double q = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (labels[i] == labels[j]) q += graph.weights(i, j) - degree[i] * degree[j] / two_m;
    return q / two_m;
}

// Deterministic greedy agglomeration. Starts from singletons and repeatedly
// merges the community pair with the largest modularity gain; ties break on
// the lexicographically smallest (i, j) id pair under the current dense
// labeling. Stops when no merge has positive gain. The result depends only
// on the graph, never on traversal order or seeds.
inline ClusterAssignment cluster(const SimilarityGraph& graph) {
    graph.validate();
    const size_t n = graph.nodes.size();
    const double two_m = graph.weights.sum();

    // members[c] = node indices of community c; communities keep dense ids.
    std::vector<std::vector<int>> members(n);
    for (size_t i = 0; i < n; ++i) members[i] = {static_cast<int>(i)};

    if (two_m > 0.0) {
        // e(i,j): fraction of total edge weight between communities i and j;
        // a(i): fraction of edge ends touching community i.
        Eigen::MatrixXd e = graph.weights / two_m;
        Eigen::VectorXd a = e.rowwise().sum();

        while (members.size() > 1) {
            const size_t k = members.size();
            double best_gain = 0.0;
            size_t best_i = 0, best_j = 0;
            bool found = false;
            for (size_t i = 0; i < k; ++i) {
                for (size_t j = i + 1; j < k; ++j) {
                    const double gain = 2.0 * (e(i, j) - a[i] * a[j]);
                    if (!found || gain > best_gain) {
                        best_gain = gain;
                        best_i = i;
                        best_j = j;
                        found = true;
                    }
                }
            }
            if (!found || best_gain <= 0.0) break;

            // Merge j into i, then erase j; ids above j shift down by one.
            const Eigen::Index ii = static_cast<Eigen::Index>(best_i);
            const Eigen::Index jj = static_cast<Eigen::Index>(best_j);
            for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
                if (c == ii || c == jj) continue;
                e(ii, c) += e(jj, c);
                e(c, ii) = e(ii, c);
            }
            e(ii, ii) += e(jj, jj) + 2.0 * e(ii, jj);
            e(ii, jj) = e(jj, ii) = 0.0;
            a[ii] += a[jj];

            const Eigen::Index last = static_cast<Eigen::Index>(k) - 1;
            // Compact row/column jj out of e and a.
            for (Eigen::Index c = jj; c < last; ++c) {
                e.row(c) = e.row(c + 1);
            }
            for (Eigen::Index c = jj; c < last; ++c) {
                e.col(c) = e.col(c + 1);
            }
            for (Eigen::Index c = jj; c < last; ++c) a[c] = a[c + 1];
            e.conservativeResize(last, last);
            a.conservativeResize(last);

            auto moved = std::move(members[best_j]);
            members[best_i].insert(members[best_i].end(), moved.begin(), moved.end());
            members.erase(members.begin() + static_cast<long>(best_j));
        }
    }

    // Dense relabel ordered by each community's smallest member ticker, which
    // (given sorted nodes) is its smallest node index.
    for (auto& m : members) std::sort(m.begin(), m.end());
    std::sort(members.begin(), members.end(),
              [](const std::vector<int>& x, const std::vector<int>& y) {
                  return x.front() < y.front();
              });

    ClusterAssignment out;
    out.symbols = graph.nodes;
    out.labels.assign(n, -1);
    for (size_t c = 0; c < members.size(); ++c)
        for (int idx : members[c]) out.labels[static_cast<size_t>(idx)] = static_cast<int>(c);
    out.modularity = modularity(graph, out.labels);
    return out;
}

inline void write_assignment(const std::string& path, const ClusterAssignment& assignment,
                             const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    writer.line("rebalance_date,symbol,community_id");
    for (size_t i = 0; i < assignment.symbols.size(); ++i)
        writer.row({to_string(assignment.rebalance_date), assignment.symbols[i],
                    std::to_string(assignment.labels[i])});
    writer.close();
}

inline void write_graph(const std::string& path, const SimilarityGraph& graph,
                        const std::vector<std::string>& comments = {}) {
    CsvWriter writer(path);
    for (const auto& c : comments) writer.comment(c);
    std::vector<std::string> header = {"symbol"};
    header.insert(header.end(), graph.nodes.begin(), graph.nodes.end());
    writer.row(header);
    for (Eigen::Index i = 0; i < graph.weights.rows(); ++i) {
        std::vector<std::string> row = {graph.nodes[static_cast<size_t>(i)]};
        for (Eigen::Index j = 0; j < graph.weights.cols(); ++j)
            row.push_back(format_double(graph.weights(i, j)));
        writer.row(row);
    }
    writer.close();
}

} // namespace chartfolio
