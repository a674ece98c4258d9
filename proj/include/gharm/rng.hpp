#ifndef GHARM_RNG_HPP
#define GHARM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gharm {

// Philox4x32-10 counter-based generator. Each (key, counter) pair maps to
// four independent 32-bit words, so draws keyed by (seed, path, step, slot)
// are reproducible no matter in which order paths are generated.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWey0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWey1 = 0xBB67AE85u;

    struct Block {
        std::uint32_t v[4];
    };

    static Block generate(std::uint64_t key, std::uint32_t c0, std::uint32_t c1,
                          std::uint32_t c2, std::uint32_t c3) {
        std::uint32_t k0 = static_cast<std::uint32_t>(key);
        std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
            std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kWey0;
            k1 += kWey1;
        }
        return Block{{c0, c1, c2, c3}};
    }
};

// Uniform in (0, 1]: the +1 keeps log() away from zero.
inline double uniform_from_u64(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Two standard normals per counter block via Box-Muller.
struct NormalPair {
    double first;
    double second;
};

inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t path,
                              std::uint64_t step, std::uint32_t slot) {
    auto blk = Philox4x32::generate(
        seed, static_cast<std::uint32_t>(path),
        static_cast<std::uint32_t>(path >> 32) ^ static_cast<std::uint32_t>(step),
        static_cast<std::uint32_t>(step >> 32) * 0x85EBCA6Bu + slot,
        0x5bd1e995u + slot);
    std::uint64_t a = (static_cast<std::uint64_t>(blk.v[0]) << 32) | blk.v[1];
    std::uint64_t b = (static_cast<std::uint64_t>(blk.v[2]) << 32) | blk.v[3];
    double u1 = uniform_from_u64(a);
    double u2 = uniform_from_u64(b);
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

// Scalar normal draw for validation sampling and the like.
inline double normal_draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                          std::uint32_t slot = 0) {
    return normal_pair(seed, a, b, slot).first;
}

inline double uniform_draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint32_t slot = 0) {
    auto blk = Philox4x32::generate(
        seed, static_cast<std::uint32_t>(a),
        static_cast<std::uint32_t>(a >> 32) ^ static_cast<std::uint32_t>(b),
        static_cast<std::uint32_t>(b >> 32) * 0x85EBCA6Bu + slot, 0x9E3779B9u + slot);
    std::uint64_t bits = (static_cast<std::uint64_t>(blk.v[0]) << 32) | blk.v[1];
    return uniform_from_u64(bits);
}

}  // namespace gharm

#endif
