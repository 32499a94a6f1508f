// png_io.hpp -- minimal PNG encode/decode on top of zlib.
//
// Supports what the renderer emits: 8- or 16-bit, gray / RGB / RGBA, no
// interlacing. The writer uses filter 0 scanlines; the reader reconstructs
// all five standard filters so it can also read files from other encoders.
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "eipart/geom.hpp"

namespace eipart {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;   // 1 gray, 3 RGB, 4 RGBA
    int bit_depth = 8;  // 8 or 16
    std::vector<double> samples;  // row-major, channel-interleaved, values in [0,1]

    double at(int x, int y, int c) const {
        return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double& at(int x, int y, int c) {
        return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

inline int png_color_type(int channels) {
    switch (channels) {
        case 1: return 0;
        case 3: return 2;
        case 4: return 6;
        default: throw Error("png: unsupported channel count " + std::to_string(channels));
    }
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw Error("png: empty image");
    if (img.bit_depth != 8 && img.bit_depth != 16) throw Error("png: bit depth must be 8 or 16");
    const int bytes_per_sample = img.bit_depth / 8;
    const std::size_t row_bytes =
        static_cast<std::size_t>(img.width) * img.channels * bytes_per_sample;
    const double scale = img.bit_depth == 8 ? 255.0 : 65535.0;

    std::vector<std::uint8_t> raw;
    raw.reserve(img.height * (row_bytes + 1));
    std::size_t si = 0;
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.width * img.channels; ++x) {
            const double v = std::clamp(img.samples[si++], 0.0, 1.0);
            const auto q = static_cast<std::uint32_t>(std::lround(v * scale));
            if (img.bit_depth == 16) raw.push_back(static_cast<std::uint8_t>(q >> 8));
            raw.push_back(static_cast<std::uint8_t>(q & 0xFF));
        }
    }

    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, raw.data(),
                  static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK)
        throw Error("png: zlib compression failed");
    compressed.resize(compressed_size);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    std::vector<std::uint8_t> ihdr;
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(static_cast<std::uint8_t>(img.bit_depth));
    ihdr.push_back(static_cast<std::uint8_t>(detail::png_color_type(img.channels)));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    detail::put_chunk(out, "IHDR", ihdr);
    detail::put_chunk(out, "IDAT", compressed);
    detail::put_chunk(out, "IEND", {});
    return out;
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    auto bad = [&](const char* why) { return ParseError(std::string("png: ") + why + " in " + origin); };
    static const std::uint8_t magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 8) != 0) throw bad("bad signature");
    auto u32 = [&](std::size_t off) -> std::uint32_t {
        if (off + 4 > bytes.size()) throw ParseError("png: truncated file in " + origin);
        return (static_cast<std::uint32_t>(bytes[off]) << 24) |
               (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
               static_cast<std::uint32_t>(bytes[off + 3]);
    };

    Image img;
    std::vector<std::uint8_t> idat;
    std::size_t off = 8;
    while (off + 8 <= bytes.size()) {
        const std::uint32_t len = u32(off);
        const std::string type(bytes.begin() + off + 4, bytes.begin() + off + 8);
        off += 8;
        if (off + len + 4 > bytes.size()) throw bad("truncated chunk");
        if (type == "IHDR") {
            img.width = static_cast<int>(u32(off));
            img.height = static_cast<int>(u32(off + 4));
            img.bit_depth = bytes[off + 8];
            const int color = bytes[off + 9];
            img.channels = color == 0 ? 1 : (color == 2 ? 3 : (color == 6 ? 4 : -1));
            if (img.channels < 0) throw bad("unsupported color type");
            if (img.bit_depth != 8 && img.bit_depth != 16) throw bad("unsupported bit depth");
            if (bytes[off + 12] != 0) throw bad("interlaced images unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), bytes.begin() + off, bytes.begin() + off + len);
        } else if (type == "IEND") {
            break;
        }
        off += len + 4;  // skip data + crc
    }
    if (img.width <= 0 || img.height <= 0 || idat.empty()) throw bad("missing IHDR/IDAT");

    const int bytes_per_sample = img.bit_depth / 8;
    const std::size_t stride =
        static_cast<std::size_t>(img.width) * img.channels * bytes_per_sample;
    std::vector<std::uint8_t> raw(img.height * (stride + 1));
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_size != raw.size())
        throw bad("zlib stream corrupt");

    // undo per-row filters (0 none, 1 sub, 2 up, 3 average, 4 paeth)
    const int bpp = img.channels * bytes_per_sample;
    std::vector<std::uint8_t> prev(stride, 0);
    std::vector<std::uint8_t> cur(stride, 0);
    const double scale = img.bit_depth == 8 ? 255.0 : 65535.0;
    img.samples.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    std::size_t si = 0;
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t* row = raw.data() + y * (stride + 1);
        const int filter = row[0];
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = row[1 + i];
            const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
            int value = x;
            switch (filter) {
                case 0: break;
                case 1: value = x + a; break;
                case 2: value = x + b; break;
                case 3: value = x + (a + b) / 2; break;
                case 4: {
                    const int p = a + b - c;
                    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    value = x + (pa <= pb && pa <= pc ? a : (pb <= pc ? b : c));
                    break;
                }
                default: throw bad("unknown filter");
            }
            cur[i] = static_cast<std::uint8_t>(value & 0xFF);
        }
        for (int x = 0; x < img.width * img.channels; ++x) {
            std::uint32_t q = cur[x * bytes_per_sample];
            if (img.bit_depth == 16)
                q = (q << 8) | cur[x * bytes_per_sample + 1];
            img.samples[si++] = q / scale;
        }
        prev = cur;
    }
    return img;
}

inline Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes, path.string());
}

}  // namespace eipart
