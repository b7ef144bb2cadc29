#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace smi {

/// FNV-1a 64-bit, used for configuration digests (change detection, not crypto).
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

inline std::string digest_hex(std::string_view text) { return to_hex(fnv1a64(text)); }

} // namespace smi
