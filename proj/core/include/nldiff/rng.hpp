#pragma once

#include <cstdint>

namespace nldiff {

/// Counter-based pseudo-random scheme. Every (seed, path) pair owns an
/// independent stream; draw k of a stream is a pure function of
/// (seed, path, k), so ensembles replay bit-identically and paths can be
/// generated on any number of workers in any order.
///
/// Construction: a 64-bit mix (the splitmix64 finalizer) is applied to
/// seed + C*(path+1) to derive the stream key, and again to key + C*(k+1)
/// to produce draw k, with C the golden-ratio increment 0x9e3779b97f4a7c15.
/// Normals come from uniforms through the inverse CDF.
namespace rng {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path) {
    return mix64(seed + kGolden * (path + 1));
}

inline std::uint64_t draw_bits(std::uint64_t key, std::uint64_t k) {
    return mix64(key + kGolden * (k + 1));
}

/// Maps 64 random bits to the open interval (0, 1).
inline double to_unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Inverse standard normal CDF: rational approximation refined by one
/// Halley step against erfc, accurate to ~1e-15 over (0, 1).
double normal_quantile(double p);

inline double normal_draw(std::uint64_t key, std::uint64_t k) {
    return normal_quantile(to_unit_open(draw_bits(key, k)));
}

} // namespace rng
} // namespace nldiff
