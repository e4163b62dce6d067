#include "roughmckv/norms.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rmkv {

double holder_seminorm(const TwoParamIncrement& g, double alpha, double h) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0,1]");
    const TimeGrid& grid = g.grid();
    if (!(h > 0.0 && h <= grid.horizon() + 1e-15))
        throw std::invalid_argument("window must be in (0, T]");
    double sup = 0.0;
    const std::size_t n = grid.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double span = grid[j] - grid[i];
            if (span > h * (1.0 + 1e-12)) break;
            const double v = g.at(i, j).norm() / std::pow(span, alpha);
            if (v > sup) sup = v;
        }
    }
    return sup;
}

double holder_seminorm(const Path& f, double alpha, double h) {
    return holder_seminorm(TwoParamIncrement::path_increments(f), alpha, h);
}

double p_variation(const TwoParamIncrement& g, double p, std::size_t lo, std::size_t hi) {
    if (p < 1.0) throw std::invalid_argument("p must be >= 1");
    if (lo >= hi || hi >= g.grid().size()) throw std::invalid_argument("bad interval");
    // best[j] = max over partitions of [lo, j] of sum ||g||^p; O(n^2) pairs.
    const std::size_t n = hi - lo + 1;
    std::vector<double> best(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            const double inc = std::pow(g.at(lo + i, lo + j).norm(), p);
            const double cand = best[i] + inc;
            if (cand > b) b = cand;
        }
        best[j] = b;
    }
    return std::pow(best[n - 1], 1.0 / p);
}

double p_variation(const TwoParamIncrement& g, double p) {
    return p_variation(g, p, 0, g.grid().size() - 1);
}

}  // namespace rmkv
