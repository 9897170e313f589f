#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chartfolio/cae/arch.hpp"
#include "chartfolio/cae/network.hpp"
#include "chartfolio/date.hpp"
#include "chartfolio/error.hpp"
#include "chartfolio/hash.hpp"

namespace chartfolio::cae {

namespace ckpt_detail {

// Little-endian byte builder / parser. Explicit byte order keeps the file
// format and its checksum platform independent.
struct Writer {
    std::vector<uint8_t> bytes;

    void u8(uint8_t v) { bytes.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
};

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw data_error("checkpoint: truncated file");
    }
    uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(bytes.begin() + static_cast<long>(pos),
                      bytes.begin() + static_cast<long>(pos + n));
        pos += n;
        return s;
    }
};

inline void put_arch(Writer& w, const CaeArchitecture& a) {
    w.str(a.name);
    w.i32(a.input_size);
    w.i32(a.input_channels);
    w.u32(static_cast<uint32_t>(a.encoder.size()));
    for (const auto& s : a.encoder) {
        w.i32(s.out_channels);
        w.i32(s.convs);
        w.u8(s.pool_after ? 1 : 0);
    }
    w.i32(a.projection_channels);
    w.i32(a.embedding_dim);
    w.i32(a.fc_channels);
    w.i32(a.fc_size);
    w.u32(static_cast<uint32_t>(a.decoder.size()));
    for (const auto& s : a.decoder) {
        w.i32(s.out_channels);
        w.u8(s.upsample_before ? 1 : 0);
    }
}

inline CaeArchitecture get_arch(Reader& r) {
    CaeArchitecture a;
    a.name = r.str();
    a.input_size = r.i32();
    a.input_channels = r.i32();
    a.encoder.resize(r.u32());
    for (auto& s : a.encoder) {
        s.out_channels = r.i32();
        s.convs = r.i32();
        s.pool_after = r.u8() != 0;
    }
    a.projection_channels = r.i32();
    a.embedding_dim = r.i32();
    a.fc_channels = r.i32();
    a.fc_size = r.i32();
    a.decoder.resize(r.u32());
    for (auto& s : a.decoder) {
        s.out_channels = r.i32();
        s.upsample_before = r.u8() != 0;
    }
    return a;
}

} // namespace ckpt_detail

struct CheckpointMeta {
    uint64_t seed = 0;
    uint32_t epochs_trained = 0;
    uint32_t batch_size = 0;
    double initial_lr = 0.0;
    double final_lr = 0.0;
    double lr_decay_factor = 0.0;
    double final_loss = 0.0;
    std::string config_hash;
    // Last market date whose bars influenced the weights; backtests use it
    // to reject spans that overlap the training data.
    std::optional<Date> train_data_end;
};

struct Checkpoint {
    CaeArchitecture arch;
    CheckpointMeta meta;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> blocks;
    std::string model_id; // hex of the file checksum; names the weights exactly
};

inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'C', 'F', 'C', 'K'};

inline void save_checkpoint(const std::string& path, CaeNetwork& net,
                            const CheckpointMeta& meta) {
    ckpt_detail::Writer w;
    w.bytes.insert(w.bytes.end(), kCheckpointMagic, kCheckpointMagic + 4);
    w.u32(kCheckpointVersion);
    ckpt_detail::put_arch(w, net.arch());
    w.u64(meta.seed);
    w.u32(meta.epochs_trained);
    w.u32(meta.batch_size);
    w.f64(meta.initial_lr);
    w.f64(meta.final_lr);
    w.f64(meta.lr_decay_factor);
    w.f64(meta.final_loss);
    w.str(meta.config_hash);
    w.u8(meta.train_data_end ? 1 : 0);
    if (meta.train_data_end) w.i64(to_serial(*meta.train_data_end));

    const auto params = net.parameters();
    w.u64(params.size());
    for (const ParamBlock* p : params) {
        w.str(p->name);
        w.u64(static_cast<uint64_t>(p->value.rows()));
        w.u64(static_cast<uint64_t>(p->value.cols()));
        for (long r = 0; r < p->value.rows(); ++r)
            for (long c = 0; c < p->value.cols(); ++c) w.f64(p->value(r, c));
    }

    const uint64_t checksum = fnv1a64(w.bytes.data(), w.bytes.size());
    w.u64(checksum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    out.close();
    if (!out) throw data_error("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw missing_artifact_error("checkpoint not found: " + path +
                                     "; run `train` to produce one");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw data_error(path + ": not a checkpoint file");

    const size_t body = bytes.size() - 8;
    uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<uint64_t>(bytes[body + i]) << (8 * i);
    const uint64_t computed = fnv1a64(bytes.data(), body);
    if (stored != computed) throw data_error(path + ": checksum mismatch, file is corrupt");

    ckpt_detail::Reader r{bytes};
    r.pos = 4;
    Checkpoint ck;
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw data_error(path + ": unsupported checkpoint version " + std::to_string(version));
    ck.arch = ckpt_detail::get_arch(r);
    ck.arch.validate();
    ck.meta.seed = r.u64();
    ck.meta.epochs_trained = r.u32();
    ck.meta.batch_size = r.u32();
    ck.meta.initial_lr = r.f64();
    ck.meta.final_lr = r.f64();
    ck.meta.lr_decay_factor = r.f64();
    ck.meta.final_loss = r.f64();
    ck.meta.config_hash = r.str();
    if (r.u8() != 0) ck.meta.train_data_end = from_serial(r.i64());

    const uint64_t n_blocks = r.u64();
    ck.blocks.reserve(n_blocks);
    for (uint64_t b = 0; b < n_blocks; ++b) {
        std::string name = r.str();
        const auto rows = static_cast<long>(r.u64());
        const auto cols = static_cast<long>(r.u64());
        if (rows < 0 || cols < 0 || rows * cols > (1l << 31))
            throw data_error(path + ": implausible parameter block size");
        Eigen::MatrixXd m(rows, cols);
        for (long rr = 0; rr < rows; ++rr)
            for (long cc = 0; cc < cols; ++cc) m(rr, cc) = r.f64();
        ck.blocks.emplace_back(std::move(name), std::move(m));
    }
    ck.model_id = to_hex(computed);
    return ck;
}

// Rebuilds a network carrying the checkpoint's weights.
inline CaeNetwork restore_network(const Checkpoint& ck) {
    CaeNetwork net(ck.arch, ck.meta.seed);
    auto params = net.parameters();
    if (params.size() != ck.blocks.size())
        throw data_error("checkpoint: parameter block count does not match architecture");
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& [name, value] = ck.blocks[i];
        if (params[i]->name != name || params[i]->value.rows() != value.rows() ||
            params[i]->value.cols() != value.cols())
            throw data_error("checkpoint: block '" + name + "' does not match layer '" +
                             params[i]->name + "'");
        params[i]->value = value;
    }
    return net;
}

// Checkpoint identity without loading the parameters into a network.
inline std::string checkpoint_model_id(const std::string& path) {
    return load_checkpoint(path).model_id;
}

} // namespace chartfolio::cae
