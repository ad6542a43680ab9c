#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "calabi/field.hpp"
#include "calabi/flow.hpp"

namespace calabi {

inline constexpr const char* kCsvHeader =
    "t,Ca,Cam,V,S,dissip,lam,Lam,sup_phi,sup_ric,sup_F,tail,dt";

// 17 significant digits round-trip a double exactly
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string csv_line(const DiagnosticsRecord& r) {
    const double cols[13] = {r.t,      r.Ca,    r.Ca_mod, r.V,     r.S,    r.dissip, r.lam,
                             r.Lam,    r.sup_phi, r.sup_ric, r.sup_F, r.tail, r.dt};
    std::string line;
    for (int i = 0; i < 13; ++i) {
        if (i) line += ',';
        line += format_g17(cols[i]);
    }
    return line;
}

namespace detail {

class FileHandle {
public:
    FileHandle(const std::string& path, const char* mode) : f_(std::fopen(path.c_str(), mode)) {
        if (!f_) throw ConfigError("cannot open '" + path + "'");
    }
    ~FileHandle() {
        if (f_) std::fclose(f_);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
    std::FILE* get() const { return f_; }

private:
    std::FILE* f_;
};

inline void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::vector<unsigned char>& out, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

} // namespace detail

inline void write_csv(const std::string& path, const std::vector<DiagnosticsRecord>& records) {
    detail::FileHandle f(path, "wb");
    std::string text = kCsvHeader;
    text += '\n';
    for (const auto& r : records) {
        text += csv_line(r);
        text += '\n';
    }
    if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
        throw ConfigError("short write to '" + path + "'");
}

// Binary field container: magic CFSF, version, n, N as little-endian u32,
// then the values as little-endian doubles in row-major axis order.
struct SnapshotData {
    std::uint32_t n = 0;
    std::uint32_t N = 0;
    std::vector<double> values;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

inline void write_snapshot(const std::string& path, const SnapshotData& s) {
    std::vector<unsigned char> out;
    out.reserve(16 + 8 * s.values.size());
    out.push_back('C');
    out.push_back('F');
    out.push_back('S');
    out.push_back('F');
    detail::put_u32_le(out, kSnapshotVersion);
    detail::put_u32_le(out, s.n);
    detail::put_u32_le(out, s.N);
    for (double x : s.values) detail::put_f64_le(out, x);
    detail::FileHandle f(path, "wb");
    if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size())
        throw ConfigError("short write to '" + path + "'");
}

inline void write_snapshot(const std::string& path, const RealField& field) {
    SnapshotData s;
    s.n = static_cast<std::uint32_t>(field.grid.n());
    s.N = static_cast<std::uint32_t>(field.grid.N());
    s.values = field.v;
    write_snapshot(path, s);
}

inline SnapshotData read_snapshot(const std::string& path) {
    detail::FileHandle f(path, "rb");
    std::vector<unsigned char> raw;
    unsigned char buf[65536];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f.get())) > 0)
        raw.insert(raw.end(), buf, buf + got);
    if (raw.size() < 16 || raw[0] != 'C' || raw[1] != 'F' || raw[2] != 'S' || raw[3] != 'F')
        throw ConfigError("'" + path + "' is not a field snapshot");
    if (detail::get_u32_le(raw.data() + 4) != kSnapshotVersion)
        throw ConfigError("unsupported snapshot version in '" + path + "'");
    SnapshotData s;
    s.n = detail::get_u32_le(raw.data() + 8);
    s.N = detail::get_u32_le(raw.data() + 12);
    if (s.n < 1 || s.n > 2 || s.N < 2 || s.N > 4096)
        throw ConfigError("snapshot header out of range in '" + path + "'");
    std::size_t count = 1;
    for (std::uint32_t a = 0; a < 2 * s.n; ++a) count *= s.N;
    if (raw.size() != 16 + 8 * count)
        throw ConfigError("snapshot size mismatch in '" + path + "'");
    s.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        s.values[i] = detail::get_f64_le(raw.data() + 16 + 8 * i);
    return s;
}

// Snapshot restricted to torus fields: validates the grid parameters.
inline RealField load_torus_snapshot(const std::string& path) {
    SnapshotData s = read_snapshot(path);
    TorusGrid g(static_cast<int>(s.n), static_cast<int>(s.N));
    RealField f(g);
    f.v = std::move(s.values);
    require_finite(f, ("snapshot " + path).c_str());
    return f;
}

} // namespace calabi
