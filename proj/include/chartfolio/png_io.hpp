#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "chartfolio/error.hpp"

namespace chartfolio {

namespace png {

inline uint32_t crc32_table_entry(uint32_t n) {
    uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    return c;
}

inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) t[n] = crc32_table_entry(n);
        return t;
    }();
    uint32_t c = crc ^ 0xffffffffu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

inline uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void append_chunk(std::vector<uint8_t>& out, const char type[4],
                         const std::vector<uint8_t>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32_be(out, crc32(out.data() + crc_start, out.size() - crc_start));
}

// zlib stream made of stored (uncompressed) deflate blocks. Bytes are fully
// pinned by the format itself, which keeps golden-image tests platform-proof;
// no compressor implementation details can leak into the output.
inline std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> out;
    out.push_back(0x78); // CM=8, CINFO=7
    out.push_back(0x01); // FCHECK, no dict, fastest
    size_t pos = 0;
    do {
        const size_t n = std::min<size_t>(raw.size() - pos, 65535);
        const bool final = pos + n == raw.size();
        out.push_back(final ? 0x01 : 0x00);
        out.push_back(static_cast<uint8_t>(n & 0xff));
        out.push_back(static_cast<uint8_t>(n >> 8));
        out.push_back(static_cast<uint8_t>(~n & 0xff));
        out.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
        out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    } while (pos < raw.size());
    put_u32_be(out, adler32(raw.data(), raw.size()));
    return out;
}

} // namespace png

// Encodes 8-bit RGB pixels (row-major, 3 bytes per pixel) as a PNG byte
// stream. Deterministic: identical pixels always produce identical bytes.
inline std::vector<uint8_t> encode_png(int width, int height,
                                       const std::vector<uint8_t>& rgb) {
    if (width <= 0 || height <= 0 ||
        rgb.size() != static_cast<size_t>(width) * height * 3)
        throw data_error("encode_png: pixel buffer does not match dimensions");

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

    std::vector<uint8_t> ihdr;
    png::put_u32_be(ihdr, static_cast<uint32_t>(width));
    png::put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: truecolor
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // interlace
    png::append_chunk(out, "IHDR", ihdr);

    // Filter type 0 (None) on every scanline.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const uint8_t* row = rgb.data() + static_cast<size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    png::append_chunk(out, "IDAT", png::zlib_stored(raw));
    png::append_chunk(out, "IEND", {});
    return out;
}

inline void write_png(const std::string& path, int width, int height,
                      const std::vector<uint8_t>& rgb) {
    auto bytes = encode_png(width, height, rgb);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw data_error("write failed: " + path);
}

struct PngImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb; // 3 bytes per pixel
};

namespace png {

inline uint32_t read_u32_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

inline std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    int rc = uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK || out_len != expected) throw data_error("PNG: corrupt zlib stream");
    return out;
}

inline uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
    if (pb <= pc) return static_cast<uint8_t>(b);
    return static_cast<uint8_t>(c);
}

} // namespace png

// Decodes non-interlaced 8-bit PNG (grayscale, RGB or RGBA) to RGB pixels.
// Supports all five scanline filters; ancillary chunks are skipped.
inline PngImage decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw data_error("not a PNG file");

    PngImage img;
    int bit_depth = 0, color_type = 0, channels = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_end = false;
    while (pos + 12 <= bytes.size() && !saw_end) {
        const uint32_t len = png::read_u32_be(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw data_error("PNG: truncated chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* payload = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw data_error("PNG: bad IHDR");
            img.width = static_cast<int>(png::read_u32_be(payload));
            img.height = static_cast<int>(png::read_u32_be(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw data_error("PNG: interlaced images unsupported");
            if (bit_depth != 8) throw data_error("PNG: only 8-bit depth supported");
            switch (color_type) {
            case 0: channels = 1; break;
            case 2: channels = 3; break;
            case 6: channels = 4; break;
            default: throw data_error("PNG: unsupported color type");
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_end = true;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0 || idat.empty())
        throw data_error("PNG: missing IHDR or IDAT");

    const size_t stride = static_cast<size_t>(img.width) * channels;
    auto raw = png::zlib_inflate(idat, static_cast<size_t>(img.height) * (stride + 1));

    std::vector<uint8_t> prior(stride, 0);
    std::vector<uint8_t> line(stride);
    img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
        const uint8_t filter = src[0];
        ++src;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<size_t>(channels) ? line[i - channels] : 0;
            const int b = prior[i];
            const int c = i >= static_cast<size_t>(channels) ? prior[i - channels] : 0;
            int v = src[i];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += png::paeth(a, b, c); break;
            default: throw data_error("PNG: unknown filter type");
            }
            line[i] = static_cast<uint8_t>(v);
        }
        for (int x = 0; x < img.width; ++x) {
            uint8_t r, g, bl;
            if (channels == 1) {
                r = g = bl = line[x];
            } else {
                r = line[static_cast<size_t>(x) * channels];
                g = line[static_cast<size_t>(x) * channels + 1];
                bl = line[static_cast<size_t>(x) * channels + 2];
            }
            const size_t o = (static_cast<size_t>(y) * img.width + x) * 3;
            img.rgb[o] = r;
            img.rgb[o + 1] = g;
            img.rgb[o + 2] = bl;
        }
        prior = line;
    }
    return img;
}

inline PngImage read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw missing_artifact_error("cannot open PNG: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

} // namespace chartfolio
