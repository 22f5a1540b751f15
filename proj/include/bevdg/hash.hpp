#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace bevdg {

// FNV-1a 64-bit; used for arch hashes, trace fingerprints and config hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    return fnv1a(s.data(), s.size(), h);
}

} // namespace bevdg
