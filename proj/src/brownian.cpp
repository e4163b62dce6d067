#include "roughmckv/brownian.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "roughmckv/rng.hpp"

namespace rmkv {

namespace {

// One standard normal per (level, position, component) address.  Packing the
// address into the Philox counter keeps draws independent of grid depth.
double bridge_normal(std::uint64_t seed, std::uint64_t stream, int level,
                     std::uint64_t position, int component) {
    const std::uint64_t index =
        (std::uint64_t(level) << 40) | (position << 4) | std::uint64_t(component);
    return philox_normals(seed, stream, index)[0];
}

}  // namespace

BrownianPath sample_brownian(int dim, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t stream_id) {
    if (dim < 1) throw std::invalid_argument("brownian dimension must be positive");
    if (dim > 16)
        throw std::invalid_argument("brownian dimension exceeds the sampler's address space");
    if (!grid.dyadic_level())
        throw std::invalid_argument("brownian sampling needs a uniform dyadic grid");

    const int level = *grid.dyadic_level();
    const double T = grid.horizon();
    const std::size_t n = grid.size();

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(Eigen::Index(n), dim);
    for (int c = 0; c < dim; ++c) {
        values(Eigen::Index(n) - 1, c) =
            std::sqrt(T) * bridge_normal(seed, stream_id, 0, 0, c);
    }

    for (int l = 1; l <= level; ++l) {
        const std::uint64_t segments = std::uint64_t(1) << (l - 1);
        const std::size_t span = (n - 1) >> (l - 1);
        const double sd = std::sqrt(T / double(segments) / 4.0);
        for (std::uint64_t q = 0; q < segments; ++q) {
            const std::size_t left = q * span;
            const std::size_t mid = left + span / 2;
            for (int c = 0; c < dim; ++c) {
                values(Eigen::Index(mid), c) =
                    0.5 * (values(Eigen::Index(left), c) +
                           values(Eigen::Index(left + span), c)) +
                    sd * bridge_normal(seed, stream_id, l, q, c);
            }
        }
    }

    return BrownianPath{Path(grid, std::move(values)), seed, stream_id};
}

RoughPath brownian_lift(const BrownianPath& w, LiftMode mode, double alpha) {
    const std::size_t n = w.grid().size();
    const int d = w.dim();

    std::vector<Eigen::MatrixXd> anchors(n, Eigen::MatrixXd::Zero(d, d));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd from_start = w.values.increment(0, i);
        const Eigen::VectorXd step = w.values.increment(i, i + 1);
        Eigen::MatrixXd seg = from_start * step.transpose();
        if (mode == LiftMode::stratonovich) seg += 0.5 * step * step.transpose();
        anchors[i + 1] = anchors[i] + seg;
    }

    return RoughPath(w.values, std::move(anchors), alpha);
}

}  // namespace rmkv
