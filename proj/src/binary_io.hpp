#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "gdfmgan/errors.hpp"

namespace gdfmgan::detail {

// Little-endian primitives for the tensor container and model checkpoints.

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
    }
    void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed for '" + path_ + "'");
    }

private:
    void le(std::uint64_t v, int width) {
        char buf[8];
        for (int i = 0; i < width; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out_.write(buf, width);
    }
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open '" + path + "' for reading");
    }
    void bytes(char* data, std::size_t n) {
        in_.read(data, static_cast<std::streamsize>(n));
        if (!in_) throw IoError("truncated file '" + path_ + "'");
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    const std::string& path() const { return path_; }

private:
    std::uint64_t le(int width) {
        unsigned char buf[8];
        in_.read(reinterpret_cast<char*>(buf), width);
        if (!in_) throw IoError("truncated file '" + path_ + "'");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        return v;
    }
    std::string path_;
    std::ifstream in_;
};

// Tensor container: magic, version, kind, four u64 dims, dt, then payload.
inline constexpr char kTensorMagic[8] = {'G', 'D', 'F', 'M', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kTensorVersion = 1;

enum class TensorKind : std::uint32_t { CrossSpectrum = 1, FilterBank = 2 };

struct TensorHeader {
    TensorKind kind{};
    std::array<std::uint64_t, 4> dims{};
    double dt = 0.0;
};

inline void write_tensor_header(BinaryWriter& w, const TensorHeader& h) {
    w.bytes(kTensorMagic, sizeof kTensorMagic);
    w.u32(kTensorVersion);
    w.u32(static_cast<std::uint32_t>(h.kind));
    for (auto d : h.dims) w.u64(d);
    w.f64(h.dt);
}

inline TensorHeader read_tensor_header(BinaryReader& r, TensorKind expected) {
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (!std::equal(magic, magic + 8, kTensorMagic)) throw IoError("'" + r.path() + "' is not a tensor file");
    if (const auto v = r.u32(); v != kTensorVersion)
        throw IoError("unsupported tensor file version " + std::to_string(v) + " in '" + r.path() + "'");
    TensorHeader h;
    h.kind = static_cast<TensorKind>(r.u32());
    if (h.kind != expected) throw IoError("unexpected tensor kind in '" + r.path() + "'");
    for (auto& d : h.dims) d = r.u64();
    h.dt = r.f64();
    return h;
}

}  // namespace gdfmgan::detail
