#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "chartfolio/cae/network.hpp"
#include "chartfolio/error.hpp"

namespace chartfolio::cae {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 0.001;
    // Plateau schedule: when the epoch loss fails to improve on the best
    // seen by at least min_delta for `patience` consecutive epochs, the
    // learning rate is multiplied by decay_factor.
    double decay_factor = 0.1;
    double plateau_min_delta = 1e-4;
    int plateau_patience = 3;
    uint64_t shuffle_seed = 0;

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw config_error("train: epochs and batch_size must be positive");
        if (learning_rate <= 0.0) throw config_error("train: learning_rate must be positive");
        if (decay_factor <= 0.0 || decay_factor >= 1.0)
            throw config_error("train: decay_factor must lie in (0, 1)");
        if (plateau_patience < 1) throw config_error("train: plateau_patience must be positive");
    }
};

struct EpochLog {
    int epoch = 0;        // 1-based
    double mean_loss = 0; // mean per-sample reconstruction MSE
    double learning_rate = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double final_learning_rate = 0;
    double final_loss = 0;
};

namespace train_detail {

// Fisher-Yates with explicit draws; std::shuffle's sequence is
// implementation defined, which would break run-to-run determinism
// guarantees across toolchains.
inline void shuffle_indices(std::vector<size_t>& idx, std::mt19937_64& rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace train_detail

// Mini-batch SGD over the reconstruction objective. Images are (C, H*W)
// tensors in [0, 1] matching the network's input shape. Deterministic for
// a fixed network seed, shuffle seed and image order.
inline TrainResult train(CaeNetwork& net, const std::vector<Tensor>& images,
                         const TrainConfig& cfg, std::ostream* progress = nullptr) {
    cfg.validate();
    if (images.empty()) throw data_error("train: no training images");
    const TensorShape want = net.input_shape();
    for (const auto& img : images)
        if (img.rows() != want.channels || img.cols() != static_cast<long>(want.pixels()))
            throw data_error("train: image tensor does not match network input " + want.str());

    std::mt19937_64 rng(cfg.shuffle_seed);
    std::vector<size_t> order(images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    double lr = cfg.learning_rate;
    double best_loss = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        train_detail::shuffle_indices(order, rng);
        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            net.zero_grads();
            for (size_t s = start; s < end; ++s)
                loss_sum += net.loss_and_gradients(images[order[s]]);
            net.sgd_step(lr, 1.0 / static_cast<double>(end - start));
        }
        const double mean_loss = loss_sum / static_cast<double>(images.size());
        if (!std::isfinite(mean_loss))
            throw numeric_error("train: loss diverged at epoch " + std::to_string(epoch) +
                                "; lower the learning rate");
        result.log.push_back({epoch, mean_loss, lr});
        if (progress)
            (*progress) << "epoch " << epoch << "/" << cfg.epochs << " loss " << mean_loss
                        << " lr " << lr << "\n";

        if (mean_loss < best_loss - cfg.plateau_min_delta) {
            best_loss = mean_loss;
            stale_epochs = 0;
        } else {
            best_loss = std::min(best_loss, mean_loss);
            if (++stale_epochs >= cfg.plateau_patience) {
                lr *= cfg.decay_factor;
                stale_epochs = 0;
                if (progress) (*progress) << "plateau: learning rate -> " << lr << "\n";
            }
        }
    }
    result.final_learning_rate = lr;
    result.final_loss = result.log.back().mean_loss;
    return result;
}

} // namespace chartfolio::cae
