#pragma once

// Little-endian helpers for the on-disk formats.

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "pqtable/common.hpp"

namespace pqtable::detail {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) {
        PQTABLE_THROW(io, "write failed");
    }
}

inline void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        PQTABLE_THROW(format, std::string("truncated input while reading ") + what);
    }
}

inline void write_magic(std::ostream& out, std::string_view magic) {
    write_bytes(out, magic.data(), magic.size());
}

inline void expect_magic(std::istream& in, std::string_view magic) {
    std::array<char, 4> buf{};
    read_bytes(in, buf.data(), 4, "magic");
    if (std::string_view(buf.data(), 4) != magic) {
        PQTABLE_THROW(format, "bad magic, expected " + std::string(magic));
    }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    const std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                                        static_cast<std::uint8_t>(v >> 16),
                                        static_cast<std::uint8_t>(v >> 24)};
    write_bytes(out, b.data(), 4);
}

inline std::uint32_t decode_u32(const std::uint8_t* b) noexcept {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    std::array<std::uint8_t, 4> b{};
    read_bytes(in, b.data(), 4, what);
    return decode_u32(b.data());
}

inline void write_f32_array(std::ostream& out, std::span<const float> values) {
    std::vector<std::uint8_t> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &values[i], 4);
        buf[4 * i] = static_cast<std::uint8_t>(bits);
        buf[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
        buf[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
        buf[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
    }
    write_bytes(out, buf.data(), buf.size());
}

inline std::vector<float> read_f32_array(std::istream& in, std::size_t n, const char* what) {
    std::vector<std::uint8_t> buf(n * 4);
    read_bytes(in, buf.data(), buf.size(), what);
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = decode_u32(buf.data() + 4 * i);
        std::memcpy(&values[i], &bits, 4);
    }
    return values;
}

/// True when the next four bytes equal `magic`; the stream position is left
/// untouched. False at end of stream.
inline bool peek_magic(std::istream& in, std::string_view magic) {
    const auto start = in.tellg();
    std::array<char, 4> buf{};
    in.read(buf.data(), 4);
    const bool ok = in.gcount() == 4 && std::string_view(buf.data(), 4) == magic;
    in.clear();
    in.seekg(start);
    return ok;
}

}  // namespace pqtable::detail
