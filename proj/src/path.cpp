#include "roughmckv/path.hpp"

#include <stdexcept>

namespace rmkv {

Path::Path(TimeGrid grid, Eigen::MatrixXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != grid_.size())
        throw std::invalid_argument("path values do not match grid size");
    if (values_.cols() < 1) throw std::invalid_argument("path dimension must be positive");
}

Path Path::scalar(TimeGrid grid, const std::vector<double>& samples) {
    Eigen::MatrixXd v(samples.size(), 1);
    for (std::size_t i = 0; i < samples.size(); ++i) v(i, 0) = samples[i];
    return Path(std::move(grid), std::move(v));
}

Eigen::VectorXd Path::eval(double t) const {
    if (t <= 0.0) return at(0);
    if (t >= grid_.horizon()) return at(grid_.size() - 1);
    const std::size_t i = grid_.index_at(t);
    const double h = grid_[i + 1] - grid_[i];
    const double theta = (t - grid_[i]) / h;
    return ((1.0 - theta) * values_.row(i) + theta * values_.row(i + 1)).transpose();
}

Path restrict_path(const Path& p, std::size_t lo, std::size_t hi) {
    if (lo >= hi || hi >= p.size())
        throw std::invalid_argument("path window must be a nonempty index range");
    if (lo == 0 && hi == p.size() - 1) return p;
    const std::size_t n = hi - lo + 1;
    std::vector<double> times(n);
    for (std::size_t k = 0; k < n; ++k) times[k] = p.grid()[lo + k] - p.grid()[lo];
    return Path(TimeGrid(std::move(times)), p.values().middleRows(Eigen::Index(lo), Eigen::Index(n)));
}

}  // namespace rmkv
