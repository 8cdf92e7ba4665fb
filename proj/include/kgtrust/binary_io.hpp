#ifndef KGTRUST_BINARY_IO_HPP
#define KGTRUST_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace kgt::io {

// All multi-byte values are little-endian on disk.

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
    void str(std::string_view s) {
        u64(s.size());
        bytes(s);
    }
    void f64s(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    void u32s(std::span<const std::uint32_t> v) {
        for (auto x : v) u32(x);
    }

private:
    template <class T>
    void put(T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        out_.write(reinterpret_cast<const char*>(buf), sizeof(T));
    }
    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (!in_) fail("truncated");
        return s;
    }
    std::string str() {
        auto n = u64();
        if (n > (1ULL << 32)) fail("implausible string length");
        return bytes(static_cast<std::size_t>(n));
    }
    void f64s(std::span<double> v) {
        for (auto& x : v) x = f64();
    }
    void u32s(std::span<std::uint32_t> v) {
        for (auto& x : v) x = u32();
    }
    void expect_magic(std::string_view magic) {
        if (bytes(magic.size()) != magic) fail("bad magic, expected " + std::string(magic));
    }
    [[noreturn]] void fail(const std::string& what) const { throw InputError(source_ + ": " + what); }

private:
    template <class T>
    T get() {
        unsigned char buf[sizeof(T)];
        in_.read(reinterpret_cast<char*>(buf), sizeof(T));
        if (!in_) fail("truncated");
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }
    std::istream& in_;
    std::string source_;
};

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partially written file.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                         bool binary = true) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        body(out);
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// 64-bit FNV-1a, used for cache keys and config fingerprints.
class Fnv1a {
public:
    Fnv1a& add(std::string_view s) {
        for (unsigned char c : s) {
            h_ ^= c;
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= static_cast<unsigned char>(v >> (8 * i));
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }
    std::uint64_t value() const noexcept { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace kgt::io

#endif // KGTRUST_BINARY_IO_HPP
