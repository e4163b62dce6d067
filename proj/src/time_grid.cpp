#include "roughmckv/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmkv {

TimeGrid::TimeGrid(std::vector<double> points, std::optional<int> dyadic_level)
    : points_(std::move(points)), dyadic_level_(dyadic_level) {
    if (points_.size() < 2) throw std::invalid_argument("degenerate grid");
    if (points_.front() != 0.0) throw std::invalid_argument("grid must start at t = 0");
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (!(points_[i] > points_[i - 1]))
            throw std::invalid_argument("grid points must be strictly increasing");
    }
}

TimeGrid TimeGrid::dyadic(double T, int level) {
    if (T <= 0.0) throw std::invalid_argument("horizon must be positive");
    if (level < 0) throw std::invalid_argument("dyadic level must be nonnegative");
    const std::size_t n = std::size_t{1} << level;
    std::vector<double> pts(n + 1);
    for (std::size_t i = 0; i <= n; ++i) pts[i] = T * static_cast<double>(i) / static_cast<double>(n);
    pts[0] = 0.0;
    pts[n] = T;
    return TimeGrid(std::move(pts), level);
}

std::size_t TimeGrid::index_at(double t) const {
    auto it = std::upper_bound(points_.begin(), points_.end(), t);
    if (it == points_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(points_.begin(), it)) - 1;
}

}  // namespace rmkv
