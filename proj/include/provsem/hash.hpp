// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace provsem {

// Hex-encoded SHA-256 digest of a byte string (content-address keys, manifests).
std::string sha256_hex(std::string_view data);

// Hex-encoded SHA-256 digest of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

// FNV-1a 64 over bytes, optionally chained from a prior state/seed.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t state = kFnvOffsetBasis) {
    for (unsigned char c : s) {
        state ^= static_cast<std::uint64_t>(c);
        state *= kFnvPrime;
    }
    return state;
}

// Finalizer borrowed from splitmix64; decorrelates bucket and sign bits.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace provsem
