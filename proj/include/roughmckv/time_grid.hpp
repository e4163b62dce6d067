#pragma once

#include <optional>
#include <vector>

namespace rmkv {

// Strictly increasing sample times t_0 = 0 < t_1 < ... < t_n = T.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points,
                      std::optional<int> dyadic_level = std::nullopt);

    // Uniform grid with 2^level steps on [0, T].
    static TimeGrid dyadic(double T, int level);

    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double horizon() const { return points_.back(); }
    const std::vector<double>& points() const { return points_; }
    std::optional<int> dyadic_level() const { return dyadic_level_; }

    bool operator==(const TimeGrid& other) const { return points_ == other.points_; }

    // Index of the largest grid point <= t.
    std::size_t index_at(double t) const;

private:
    std::vector<double> points_;
    std::optional<int> dyadic_level_;
};

}  // namespace rmkv
