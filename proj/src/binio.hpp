#pragma once

// Little-endian scalar I/O for the binary file formats (amplitude bank,
// checkpoints). Byte-wise packing keeps the formats host-order independent.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "bevdg/errors.hpp"

namespace bevdg::binio {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(what + ": truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw FormatError(what + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& in, const std::string& what) {
    return std::bit_cast<double>(read_u64(in, what));
}

} // namespace bevdg::binio
