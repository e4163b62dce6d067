#pragma once

#include <cstdint>

#include "roughmckv/path.hpp"
#include "roughmckv/rough_path.hpp"
#include "roughmckv/time_grid.hpp"

namespace rmkv {

// Brownian sample on a uniform dyadic grid, remembering its address so the
// same path can be reproduced or refined later.
struct BrownianPath {
    Path values;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    const TimeGrid& grid() const { return values.grid(); }
    int dim() const { return values.dim(); }
};

// Midpoint-refinement sampler: the endpoint is drawn first and each dyadic
// level fills segment midpoints with Brownian-bridge corrections.  Every
// draw is addressed by (level, position, component), so refining the grid
// keeps all coarse values bit for bit.
BrownianPath sample_brownian(int dim, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t stream_id = 0);

enum class LiftMode { ito, stratonovich };

// Second-level enhancement of a Brownian sample.  Per step the Ito reading
// contributes nothing (left-point sums over a single step vanish) and the
// Stratonovich reading contributes half the squared increment; anchored
// accumulation then extends both readings consistently to every grid pair.
RoughPath brownian_lift(const BrownianPath& w, LiftMode mode,
                        double alpha = 0.40);

}  // namespace rmkv
