#include "roughmckv/two_param.hpp"

#include <stdexcept>

#include "roughmckv/path.hpp"

namespace rmkv {

TwoParamIncrement::TwoParamIncrement(TimeGrid grid, int rows, int cols)
    : grid_(std::move(grid)), rows_(rows), cols_(cols) {}

TwoParamIncrement::TwoParamIncrement(TimeGrid grid, int rows, int cols, Evaluator eval)
    : grid_(std::move(grid)), rows_(rows), cols_(cols), eval_(std::move(eval)) {}

void TwoParamIncrement::set(std::size_t i, std::size_t j, Eigen::MatrixXd value) {
    if (i >= j || j >= grid_.size()) throw std::invalid_argument("bad index pair");
    if (value.rows() != rows_ || value.cols() != cols_)
        throw std::invalid_argument("value shape mismatch");
    stored_[{i, j}] = std::move(value);
}

Eigen::MatrixXd TwoParamIncrement::at(std::size_t i, std::size_t j) const {
    if (i == j) return Eigen::MatrixXd::Zero(rows_, cols_);
    if (auto it = stored_.find({i, j}); it != stored_.end()) return it->second;
    if (eval_) return eval_(i, j);
    throw std::out_of_range("pair not covered by this increment");
}

std::vector<std::pair<std::size_t, std::size_t>> TwoParamIncrement::covered_pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (!stored_.empty() && !eval_) {
        pairs.reserve(stored_.size());
        for (const auto& kv : stored_) pairs.push_back(kv.first);
        return pairs;
    }
    const std::size_t n = grid_.size();
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return pairs;
}

TwoParamIncrement TwoParamIncrement::path_increments(const Path& f) {
    // Copy the path by value so the view owns its data.
    return TwoParamIncrement(
        f.grid(), f.dim(), 1,
        [f](std::size_t i, std::size_t j) -> Eigen::MatrixXd { return f.increment(i, j); });
}

}  // namespace rmkv
