#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "chartfolio/cae/arch.hpp"
#include "chartfolio/cae/layers.hpp"
#include "chartfolio/chart_render.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/png_io.hpp"

namespace chartfolio::cae {

// Converts row-major RGB bytes to a (3, H*W) activation in [0, 1].
inline Tensor tensor_from_rgb(const std::vector<uint8_t>& rgb, int width, int height) {
    if (rgb.size() != static_cast<size_t>(width) * height * 3)
        throw data_error("tensor_from_rgb: buffer does not match dimensions");
    Tensor t(3, static_cast<long>(width) * height);
    for (long p = 0; p < t.cols(); ++p)
        for (int c = 0; c < 3; ++c)
            t(c, p) = static_cast<double>(rgb[static_cast<size_t>(p) * 3 + c]) / 255.0;
    return t;
}

inline Tensor image_to_tensor(const ChartImage& image) {
    return tensor_from_rgb(image.pixels, image.width, image.height);
}

inline Tensor image_to_tensor(const PngImage& image) {
    return tensor_from_rgb(image.rgb, image.width, image.height);
}

// Convolutional autoencoder assembled from an architecture descriptor.
// All activations and parameters are double precision; every operation is
// sequential and deterministic for a fixed seed.
class CaeNetwork {
  public:
    explicit CaeNetwork(CaeArchitecture arch, uint64_t seed = 0) : arch_(std::move(arch)) {
        arch_.validate();
        build();
        init_params(seed);
    }

    const CaeArchitecture& arch() const { return arch_; }
    TensorShape input_shape() const {
        return {arch_.input_channels, arch_.input_size, arch_.input_size};
    }

    struct ForwardResult {
        Eigen::VectorXd embedding;
        Tensor output; // (input_channels, input_size^2), sigmoid range
    };

    ForwardResult forward(const Tensor& x) {
        check_input(x);
        Tensor a = x;
        for (auto& layer : encoder_) a = layer->forward(a);
        ForwardResult r;
        r.embedding = a.col(0);
        for (auto& layer : decoder_) a = layer->forward(a);
        r.output = std::move(a);
        return r;
    }

    Eigen::VectorXd encode(const Tensor& x) {
        check_input(x);
        Tensor a = x;
        for (auto& layer : encoder_) a = layer->forward(a);
        return a.col(0);
    }

    // Reconstruction loss against the input itself (mean squared error
    // over all pixel channels). Parameter gradients are accumulated, not
    // overwritten, so batches sum sample gradients between zero_grads()
    // and sgd_step().
    double loss_and_gradients(const Tensor& x) {
        ForwardResult r = forward(x);
        const double n = static_cast<double>(r.output.size());
        Tensor diff = r.output - x;
        const double loss = diff.squaredNorm() / n;
        Tensor grad = (2.0 / n) * diff;
        for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it)
            grad = (*it)->backward(grad);
        for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it)
            grad = (*it)->backward(grad);
        return loss;
    }

    // Loss only, no gradient bookkeeping.
    double loss(const Tensor& x) {
        ForwardResult r = forward(x);
        Tensor diff = r.output - x;
        return diff.squaredNorm() / static_cast<double>(r.output.size());
    }

    std::vector<ParamBlock*> parameters() {
        std::vector<ParamBlock*> out;
        for (auto& layer : encoder_)
            for (ParamBlock* p : layer->params()) out.push_back(p);
        for (auto& layer : decoder_)
            for (ParamBlock* p : layer->params()) out.push_back(p);
        return out;
    }

    size_t parameter_count() {
        size_t n = 0;
        for (ParamBlock* p : parameters()) n += static_cast<size_t>(p->value.size());
        return n;
    }

    void zero_grads() {
        for (ParamBlock* p : parameters()) p->zero_grad();
    }

    // value -= lr * scale * grad (scale is typically 1 / batch_size).
    void sgd_step(double lr, double scale) {
        for (ParamBlock* p : parameters()) p->value -= (lr * scale) * p->grad;
    }

    std::vector<std::string> layer_summary() const {
        std::vector<std::string> out;
        for (const auto& layer : encoder_) out.push_back("encoder: " + layer->describe());
        for (const auto& layer : decoder_) out.push_back("decoder: " + layer->describe());
        return out;
    }

  private:
    void check_input(const Tensor& x) const {
        if (x.rows() != arch_.input_channels ||
            x.cols() != static_cast<long>(arch_.input_size) * arch_.input_size)
            throw data_error("cae: input tensor is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", expected " +
                             input_shape().str() + " (did the render size change?)");
    }

    void build() {
        TensorShape shape = input_shape();
        int stage_id = 0;
        for (const auto& stage : arch_.encoder) {
            for (int c = 0; c < stage.convs; ++c) {
                auto conv = std::make_unique<Conv2D>(
                    "enc" + std::to_string(stage_id) + "_" + std::to_string(c), shape,
                    stage.out_channels, 3);
                shape = conv->output_shape();
                encoder_.push_back(std::move(conv));
                encoder_.push_back(std::make_unique<ReLU>(shape));
            }
            if (stage.pool_after) {
                auto pool = std::make_unique<MaxPool2x2>(shape);
                shape = pool->output_shape();
                encoder_.push_back(std::move(pool));
            }
            ++stage_id;
        }
        if (arch_.projection_channels > 0) {
            auto proj = std::make_unique<Conv2D>("enc_proj", shape, arch_.projection_channels, 1);
            shape = proj->output_shape();
            encoder_.push_back(std::move(proj));
            encoder_.push_back(std::make_unique<ReLU>(shape));
        }
        encoder_.push_back(std::make_unique<GlobalAvgPool>(shape));
        shape = encoder_.back()->output_shape();

        decoder_.push_back(
            std::make_unique<Dense>("dec_fc", arch_.embedding_dim, arch_.fc_out()));
        decoder_.push_back(std::make_unique<ReLU>(TensorShape{arch_.fc_out(), 1, 1}));
        shape = {arch_.fc_channels, arch_.fc_size, arch_.fc_size};
        decoder_.push_back(std::make_unique<Reshape>(shape));
        for (size_t s = 0; s < arch_.decoder.size(); ++s) {
            const auto& stage = arch_.decoder[s];
            if (stage.upsample_before) {
                auto up = std::make_unique<Upsample2x>(shape);
                shape = up->output_shape();
                decoder_.push_back(std::move(up));
            }
            auto conv = std::make_unique<Conv2D>("dec" + std::to_string(s), shape,
                                                 stage.out_channels, 3);
            shape = conv->output_shape();
            decoder_.push_back(std::move(conv));
            if (s + 1 < arch_.decoder.size())
                decoder_.push_back(std::make_unique<ReLU>(shape));
        }
        decoder_.push_back(std::make_unique<Sigmoid>(shape));
    }

    // Glorot-uniform weights, zero biases. The generator is consumed in a
    // fixed layer-by-layer, row-by-row order, so a seed fully determines
    // every parameter.
    void init_params(uint64_t seed) {
        std::mt19937_64 rng(seed);
        auto uniform = [&rng]() {
            // 53-bit mantissa draw in [0, 1); avoids distribution objects
            // whose sequences vary across standard libraries.
            return static_cast<double>(rng() >> 11) * 0x1.0p-53;
        };
        for (ParamBlock* p : parameters()) {
            if (p->name.find(".bias") != std::string::npos) continue;
            // Fan counts are taken from the stored matrix dims: for convs
            // (out_c, in_c*k*k) that makes fan_in exact and treats fan_out
            // as out_c, which only shifts the scale, not determinism.
            const double fan_in = static_cast<double>(p->value.cols());
            const double fan_out = static_cast<double>(p->value.rows());
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (long r = 0; r < p->value.rows(); ++r)
                for (long c = 0; c < p->value.cols(); ++c)
                    p->value(r, c) = (2.0 * uniform() - 1.0) * limit;
        }
    }

    CaeArchitecture arch_;
    std::vector<std::unique_ptr<Layer>> encoder_;
    std::vector<std::unique_ptr<Layer>> decoder_;
};

} // namespace chartfolio::cae
