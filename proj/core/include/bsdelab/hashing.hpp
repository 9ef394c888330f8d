#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bsdelab {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

/// FNV-1a 64-bit over a byte range; used for config and artifact hashes
/// (integrity / reproducibility checks, not cryptographic).
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t state = kFnvOffsetBasis) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state ^= p[i];
        state *= kFnvPrime;
    }
    return state;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t state = kFnvOffsetBasis) noexcept {
    return fnv1a64(s.data(), s.size(), state);
}

std::string to_hex(std::uint64_t value);

/// Streaming hash of a file's bytes. Throws std::runtime_error if unreadable.
std::uint64_t fnv1a64_file(const std::string& path);

} // namespace bsdelab
