#pragma once

// Deterministic path fixtures shared by the test binaries.

#include <cmath>
#include <random>
#include <vector>

#include "roughmckv/path.hpp"
#include "roughmckv/rough_path.hpp"
#include "roughmckv/time_grid.hpp"

namespace rmkv::testutil {

inline Path random_smooth_path(int n, int dim, unsigned seed, double amp = 1.0) {
    // Sum of a few sinusoids per component: smooth, nonmonotone, bounded.
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> freq(0.5, 4.0);
    std::uniform_real_distribution<double> phase(0.0, 6.28318);
    TimeGrid grid = TimeGrid::dyadic(1.0, static_cast<int>(std::round(std::log2(n))));
    Eigen::MatrixXd v(grid.size(), dim);
    for (int c = 0; c < dim; ++c) {
        const double f1 = freq(gen), f2 = freq(gen), p1 = phase(gen), p2 = phase(gen);
        for (std::size_t i = 0; i < grid.size(); ++i)
            v(i, c) = amp * (std::sin(f1 * grid[i] + p1) + 0.5 * std::sin(f2 * grid[i] + p2));
    }
    return Path(std::move(grid), std::move(v));
}

// Piecewise-linear lift of a path with Gaussian increments scaled like
// h^0.45: rough at every scale the grid can see.
inline RoughPath rough_scalar_path(int level, unsigned seed) {
    TimeGrid grid = TimeGrid::dyadic(1.0, level);
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double h = 1.0 / static_cast<double>(grid.size() - 1);
    std::vector<double> vals(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i)
        vals[i] = vals[i - 1] + std::pow(h, 0.45) * normal(gen);
    return lift_smooth_path(Path::scalar(grid, vals), 0.45);
}

inline RoughPath rough_vector_path(int level, int dim, unsigned seed, double alpha = 0.45,
                                   double amp = 1.0) {
    TimeGrid grid = TimeGrid::dyadic(1.0, level);
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double h = 1.0 / static_cast<double>(grid.size() - 1);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(grid.size(), dim);
    for (std::size_t i = 1; i < grid.size(); ++i)
        for (int c = 0; c < dim; ++c)
            v(i, c) = v(i - 1, c) + amp * std::pow(h, alpha) * normal(gen);
    return lift_smooth_path(Path(std::move(grid), std::move(v)), alpha);
}

}  // namespace rmkv::testutil
