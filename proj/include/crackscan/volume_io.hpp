#ifndef CRACKSCAN_VOLUME_IO_HPP
#define CRACKSCAN_VOLUME_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "crackscan/errors.hpp"
#include "crackscan/volume.hpp"

namespace crackscan {

enum class SampleFormat { U8, U16, F32 };

inline SampleFormat parse_format(const std::string& s) {
    if (s == "u8") return SampleFormat::U8;
    if (s == "u16") return SampleFormat::U16;
    if (s == "f32") return SampleFormat::F32;
    throw ParamError("unknown sample format '" + s + "' (expected u8, u16 or f32)");
}

inline const char* format_name(SampleFormat f) {
    switch (f) {
        case SampleFormat::U8: return "u8";
        case SampleFormat::U16: return "u16";
        default: return "f32";
    }
}

inline std::size_t bytes_per_sample(SampleFormat f) {
    switch (f) {
        case SampleFormat::U8: return 1;
        case SampleFormat::U16: return 2;
        default: return 4;
    }
}

/// Headerless raw volume, x fastest. Integer samples map affinely to [0,1]
/// (u8: v/255, u16: v/65535); f32 is taken as-is and clamped to [0,1].
inline ScalarVolume load_raw(const std::string& path, int nx, int ny, int nz,
                             SampleFormat fmt) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "' for reading");
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    const std::size_t expect = n * bytes_per_sample(fmt);
    in.seekg(0, std::ios::end);
    const std::size_t actual = static_cast<std::size_t>(in.tellg());
    if (actual != expect)
        throw DataError("'" + path + "': file size " + std::to_string(actual) +
                        " does not match dims " + Volume<float>::dims_str(nx, ny, nz) +
                        " * " + format_name(fmt) + " = " + std::to_string(expect));
    in.seekg(0, std::ios::beg);

    ScalarVolume v(nx, ny, nz);
    switch (fmt) {
        case SampleFormat::U8: {
            std::vector<std::uint8_t> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
            for (std::size_t i = 0; i < n; ++i) v[i] = buf[i] / 255.0f;
            break;
        }
        case SampleFormat::U16: {
            std::vector<std::uint16_t> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
            for (std::size_t i = 0; i < n; ++i) v[i] = buf[i] / 65535.0f;
            break;
        }
        case SampleFormat::F32: {
            in.read(reinterpret_cast<char*>(v.data().data()), static_cast<std::streamsize>(4 * n));
            for (std::size_t i = 0; i < n; ++i)
                v[i] = std::clamp(v[i], 0.0f, 1.0f);
            break;
        }
    }
    if (!in)
        throw DataError("short read from '" + path + "'");
    return v;
}

/// Writes the raw f32 payload plus a sidecar JSON descriptor at <path>.json.
inline void save_raw(const ScalarVolume& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(v.data().data()),
              static_cast<std::streamsize>(4 * v.size()));
    if (!out)
        throw DataError("short write to '" + path + "'");
    nlohmann::json desc = {{"dims", {v.nx(), v.ny(), v.nz()}}, {"format", "f32"}};
    std::ofstream jd(path + ".json");
    jd << desc.dump(2) << "\n";
}

inline void save_mask(const BinaryVolume& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size()));
    nlohmann::json desc = {{"dims", {m.nx(), m.ny(), m.nz()}}, {"format", "u8"}, {"binary", true}};
    std::ofstream jd(path + ".json");
    jd << desc.dump(2) << "\n";
}

/// Loads a u8 mask written by save_mask; any nonzero sample counts as foreground.
inline BinaryVolume load_mask(const std::string& path, int nx, int ny, int nz) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "' for reading");
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    in.seekg(0, std::ios::end);
    if (static_cast<std::size_t>(in.tellg()) != n)
        throw DataError("'" + path + "': size does not match dims for a u8 mask");
    in.seekg(0, std::ios::beg);
    BinaryVolume m(nx, ny, nz);
    in.read(reinterpret_cast<char*>(m.data().data()), static_cast<std::streamsize>(n));
    for (std::size_t i = 0; i < n; ++i) m[i] = m[i] ? 1 : 0;
    return m;
}

/// Reads the sidecar descriptor and dispatches to load_raw / load_mask.
inline ScalarVolume load_described(const std::string& raw_path) {
    std::ifstream jd(raw_path + ".json");
    if (!jd)
        throw DataError("missing descriptor '" + raw_path + ".json'");
    nlohmann::json desc;
    jd >> desc;
    auto dims = desc.at("dims");
    return load_raw(raw_path, dims.at(0), dims.at(1), dims.at(2),
                    parse_format(desc.at("format")));
}

inline BinaryVolume load_described_mask(const std::string& raw_path) {
    std::ifstream jd(raw_path + ".json");
    if (!jd)
        throw DataError("missing descriptor '" + raw_path + ".json'");
    nlohmann::json desc;
    jd >> desc;
    auto dims = desc.at("dims");
    return load_mask(raw_path, dims.at(0), dims.at(1), dims.at(2));
}

enum class Axis { X, Y, Z };

inline Axis parse_axis(const std::string& s) {
    if (s == "x") return Axis::X;
    if (s == "y") return Axis::Y;
    if (s == "z") return Axis::Z;
    throw ParamError("unknown axis '" + s + "'");
}

namespace detail {

inline void write_pgm(const std::vector<std::uint8_t>& pixels, int w, int h,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

template <typename T, typename Map>
void export_slice_impl(const Volume<T>& v, Axis axis, int index,
                       const std::string& path, Map to_byte) {
    int limit = axis == Axis::X ? v.nx() : axis == Axis::Y ? v.ny() : v.nz();
    if (index < 0 || index >= limit)
        throw ParamError("slice index " + std::to_string(index) +
                         " out of range for axis dim " + std::to_string(limit));
    int w = 0, h = 0;
    switch (axis) {
        case Axis::X: w = v.ny(); h = v.nz(); break;
        case Axis::Y: w = v.nx(); h = v.nz(); break;
        case Axis::Z: w = v.nx(); h = v.ny(); break;
    }
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            T s;
            switch (axis) {
                case Axis::X: s = v(index, col, row); break;
                case Axis::Y: s = v(col, index, row); break;
                default: s = v(col, row, index); break;
            }
            pixels[static_cast<std::size_t>(row) * w + col] = to_byte(s);
        }
    }
    write_pgm(pixels, w, h, path);
}

} // namespace detail

/// 8-bit grayscale PGM (P5). Gray values are clamped to [0,1] and quantized.
inline void export_slice(const ScalarVolume& v, Axis axis, int index,
                         const std::string& path) {
    detail::export_slice_impl(v, axis, index, path, [](float s) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(s, 0.0f, 1.0f) * 255.0f));
    });
}

inline void export_slice(const BinaryVolume& v, Axis axis, int index,
                         const std::string& path) {
    detail::export_slice_impl(v, axis, index, path, [](std::uint8_t s) {
        return static_cast<std::uint8_t>(s ? 255 : 0);
    });
}

} // namespace crackscan

#endif
