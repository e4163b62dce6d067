#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "roughmckv/time_grid.hpp"

namespace rmkv {

class Path;

// Two-parameter grid data g_{st}, s < t both grid points, with a fixed
// tensor shape. Values are either stored per lower-triangular index pair or
// backed by an evaluator; stored pairs win when both are present.
class TwoParamIncrement {
public:
    using Evaluator = std::function<Eigen::MatrixXd(std::size_t, std::size_t)>;

    TwoParamIncrement(TimeGrid grid, int rows, int cols);
    TwoParamIncrement(TimeGrid grid, int rows, int cols, Evaluator eval);

    const TimeGrid& grid() const { return grid_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    void set(std::size_t i, std::size_t j, Eigen::MatrixXd value);
    Eigen::MatrixXd at(std::size_t i, std::size_t j) const;
    bool has_evaluator() const { return static_cast<bool>(eval_); }

    // Pairs this increment claims to cover: the stored ones, or every i < j
    // when evaluator-backed.
    std::vector<std::pair<std::size_t, std::size_t>> covered_pairs() const;
    const std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXd>& stored() const {
        return stored_;
    }

    // Increments delta f_{st} of a path, evaluator-backed.
    static TwoParamIncrement path_increments(const Path& f);

private:
    TimeGrid grid_;
    int rows_;
    int cols_;
    Evaluator eval_;
    std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXd> stored_;
};

}  // namespace rmkv
