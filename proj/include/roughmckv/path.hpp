#pragma once

#include <Eigen/Dense>

#include "roughmckv/time_grid.hpp"

namespace rmkv {

// Vector-valued path sampled on a grid; row i of values is the state at t_i.
// Between grid points paths are read as piecewise linear.
class Path {
public:
    Path(TimeGrid grid, Eigen::MatrixXd values);

    // Scalar path from a vector of samples.
    static Path scalar(TimeGrid grid, const std::vector<double>& samples);

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return static_cast<int>(values_.cols()); }
    std::size_t size() const { return grid_.size(); }

    Eigen::VectorXd at(std::size_t i) const { return values_.row(i).transpose(); }
    Eigen::VectorXd increment(std::size_t i, std::size_t j) const {
        return (values_.row(j) - values_.row(i)).transpose();
    }
    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }

    // Piecewise-linear evaluation at an arbitrary time in [0, T].
    Eigen::VectorXd eval(double t) const;

private:
    TimeGrid grid_;
    Eigen::MatrixXd values_;
};

// Rows lo..hi on the time window [t_lo, t_hi], with times shifted so the
// window starts at zero. Values keep their absolute level; only increments
// are window-independent.
Path restrict_path(const Path& p, std::size_t lo, std::size_t hi);

}  // namespace rmkv
