#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace repsim {

/// Stable 64-bit FNV-1a; used to derive per-task seeds that do not depend
/// on scheduling order.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace detail {
constexpr std::uint64_t fold(std::uint64_t h, std::uint64_t v) noexcept { return mix64(h ^ mix64(v)); }
constexpr std::uint64_t fold(std::uint64_t h, std::string_view s) noexcept { return mix64(h ^ fnv1a(s)); }
}  // namespace detail

/// Combine a base seed with any mix of integers and strings.
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, const Parts&... parts) noexcept {
    std::uint64_t h = mix64(seed);
    ((h = detail::fold(h, parts)), ...);
    return h;
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) without relying on the implementation-defined
/// std::uniform_int_distribution.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % n);
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

/// Uniform double in (0, 1).
inline double uniform_open(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Box-Muller standard normal; portable across standard libraries unlike
/// std::normal_distribution.
inline double standard_normal(Rng& rng) {
    const double u1 = uniform_open(rng);
    const double u2 = uniform_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace repsim
