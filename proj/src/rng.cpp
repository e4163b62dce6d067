#include "roughmckv/rng.hpp"

#include <cmath>

namespace rmkv {

namespace {

// Multipliers and Weyl constants from the reference Philox design.
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    const std::uint64_t prod = std::uint64_t(a) * std::uint64_t(b);
    hi = std::uint32_t(prod >> 32);
    lo = std::uint32_t(prod);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mul_hi_lo(kMul0, ctr[0], hi0, lo0);
        mul_hi_lo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double uniform_open01(std::uint32_t bits) {
    // Offset by half a grid cell so both 0 and 1 are unreachable.
    return (double(bits) + 0.5) * 0x1p-32;
}

std::array<double, 4> philox_normals(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t index) {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(stream), std::uint32_t(stream >> 32),
        std::uint32_t(index), std::uint32_t(index >> 32)};
    const std::array<std::uint32_t, 2> key = {std::uint32_t(seed),
                                              std::uint32_t(seed >> 32)};
    const auto words = philox4x32(ctr, key);

    const double u0 = uniform_open01(words[0]);
    const double u1 = uniform_open01(words[1]);
    const double u2 = uniform_open01(words[2]);
    const double u3 = uniform_open01(words[3]);

    constexpr double two_pi = 6.283185307179586476925286766559;
    const double r0 = std::sqrt(-2.0 * std::log(u0));
    const double r1 = std::sqrt(-2.0 * std::log(u2));
    return {r0 * std::cos(two_pi * u1), r0 * std::sin(two_pi * u1),
            r1 * std::cos(two_pi * u3), r1 * std::sin(two_pi * u3)};
}

}  // namespace rmkv
