#pragma once

#include <string>
#include <vector>

#include "chartfolio/error.hpp"

namespace chartfolio::cae {

// One encoder block: `convs` 3x3 stride-1 same-padding convolutions with
// ReLU, optionally followed by a 2x2 stride-2 max pool.
struct EncoderStage {
    int out_channels = 0;
    int convs = 1;
    bool pool_after = true;
};

// One decoder block: optional 2x nearest-neighbor upsample, then a 3x3
// same-padding convolution. Every stage but the last is followed by ReLU;
// the last feeds the sigmoid output.
struct DecoderStage {
    int out_channels = 0;
    bool upsample_before = false;
};

struct CaeArchitecture {
    std::string name;
    int input_size = 224; // square images
    int input_channels = 3;
    std::vector<EncoderStage> encoder;
    // Optional 1x1 convolution applied before global average pooling to
    // set the embedding width independently of the last stage's channels
    // (0 disables it).
    int projection_channels = 0;
    int embedding_dim = 0; // global-average-pool output width

    // Decoder entry: fully connected layer from the embedding, reshaped to
    // a (fc_channels, fc_size, fc_size) tensor.
    int fc_channels = 1;
    int fc_size = 28;
    std::vector<DecoderStage> decoder;

    int fc_out() const { return fc_channels * fc_size * fc_size; }

    // Verifies that the layer stack is internally consistent and that the
    // decoder lands back on the input geometry.
    void validate() const {
        if (input_size < 1 || input_channels < 1)
            throw config_error("cae: invalid input geometry");
        if (encoder.empty() || decoder.empty())
            throw config_error("cae: encoder and decoder must be non-empty");
        int size = input_size;
        for (const auto& stage : encoder) {
            if (stage.out_channels < 1 || stage.convs < 1)
                throw config_error("cae: bad encoder stage");
            if (stage.pool_after) {
                if (size % 2 != 0)
                    throw config_error("cae: pooling an odd spatial size (" +
                                       std::to_string(size) + ") in '" + name + "'");
                size /= 2;
            }
        }
        const int gap_channels =
            projection_channels > 0 ? projection_channels : encoder.back().out_channels;
        if (embedding_dim != gap_channels)
            throw config_error("cae: embedding_dim " + std::to_string(embedding_dim) +
                               " does not match the channel count entering the pool (" +
                               std::to_string(gap_channels) + ")");
        if (fc_channels < 1 || fc_size < 1) throw config_error("cae: bad decoder entry shape");
        int dsize = fc_size;
        for (const auto& stage : decoder) {
            if (stage.out_channels < 1) throw config_error("cae: bad decoder stage");
            if (stage.upsample_before) dsize *= 2;
        }
        if (decoder.back().out_channels != input_channels)
            throw config_error("cae: decoder must end with " + std::to_string(input_channels) +
                               " channels");
        if (dsize != input_size)
            throw config_error("cae: decoder reaches " + std::to_string(dsize) + "x" +
                               std::to_string(dsize) + ", input is " +
                               std::to_string(input_size) + "x" + std::to_string(input_size));
    }
};

// Full-size configuration: VGG16 convolutional encoder over 224x224x3
// charts, 512-wide embedding, and a six-stage upsampling decoder seeded by
// a 784-unit fully connected layer reshaped to 28x28x1.
inline CaeArchitecture paper_architecture() {
    CaeArchitecture a;
    a.name = "paper";
    a.input_size = 224;
    a.input_channels = 3;
    a.encoder = {
        {64, 2, true}, {128, 2, true}, {256, 3, true}, {512, 3, true}, {512, 3, true},
    };
    a.projection_channels = 0;
    a.embedding_dim = 512;
    a.fc_channels = 1;
    a.fc_size = 28;
    // 28 -> 28 -> 56 -> 56 -> 112 -> 224 with channel reduction to RGB.
    a.decoder = {
        {256, false}, {128, true}, {64, false}, {32, true}, {16, true}, {3, false},
    };
    a.validate();
    return a;
}

// Scaled-down configuration for 64x64 charts. Trains in minutes on one
// core while exercising every layer type the full network uses.
inline CaeArchitecture desk_architecture() {
    CaeArchitecture a;
    a.name = "desk";
    a.input_size = 64;
    a.input_channels = 3;
    a.encoder = {
        {16, 1, true}, {32, 1, true}, {64, 1, true}, {128, 1, true},
    };
    a.projection_channels = 64;
    a.embedding_dim = 64;
    a.fc_channels = 128;
    a.fc_size = 4;
    a.decoder = {
        {64, true}, {32, true}, {16, true}, {3, true},
    };
    a.validate();
    return a;
}

// Minimal configuration for 8x8 inputs, small enough to finite-difference
// every parameter.
inline CaeArchitecture tiny_architecture() {
    CaeArchitecture a;
    a.name = "tiny";
    a.input_size = 8;
    a.input_channels = 3;
    a.encoder = {
        {4, 1, true}, {8, 1, true},
    };
    a.projection_channels = 0;
    a.embedding_dim = 8;
    a.fc_channels = 8;
    a.fc_size = 2;
    a.decoder = {
        {4, true}, {3, true},
    };
    a.validate();
    return a;
}

inline CaeArchitecture architecture_by_name(const std::string& name) {
    if (name == "paper") return paper_architecture();
    if (name == "desk") return desk_architecture();
    if (name == "tiny") return tiny_architecture();
    throw config_error("cae: unknown architecture '" + name + "' (paper, desk, tiny)");
}

} // namespace chartfolio::cae
