#pragma once

#include <array>
#include <cstdint>

namespace rmkv {

// Counter-based block cipher style generator (Philox 4x32, 10 rounds).
// Stateless: every draw is addressed by (seed, stream, index), so parallel
// consumers and grid refinements read the same numbers without coordination.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// Uniform in the open interval (0, 1); never returns an endpoint.
double uniform_open01(std::uint32_t bits);

// Four independent standard normals for one (seed, stream, index) address.
std::array<double, 4> philox_normals(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t index);

}  // namespace rmkv
