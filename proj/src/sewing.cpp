#include "roughmckv/sewing.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rmkv {

namespace {

Eigen::VectorXd checked_eval(const Germ& g, double s, double t) {
    Eigen::VectorXd v = g.eval(s, t);
    if (!v.allFinite()) {
        std::ostringstream os;
        os << "germ returned a non-finite value on (" << s << ", " << t << ")";
        throw std::runtime_error(os.str());
    }
    return v;
}

}  // namespace

SewResult sew(const Germ& g, const TimeGrid& grid, int refine_levels) {
    if (refine_levels < 0) throw std::invalid_argument("refine_levels must be >= 0");
    const std::size_t n = grid.size();
    const std::size_t sub = std::size_t{1} << refine_levels;

    // Riemann sums of the germ per coarse interval at each refinement level;
    // the finest level is the integral, the level-to-level gaps feed the
    // uniqueness diagnostic.
    std::vector<double> level_gaps(refine_levels, 0.0);
    Eigen::MatrixXd fine_sum(n - 1, g.dim);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = grid[i], b = grid[i + 1];
        Eigen::VectorXd prev = checked_eval(g, a, b);
        for (int l = 1; l <= refine_levels; ++l) {
            const std::size_t parts = std::size_t{1} << l;
            Eigen::VectorXd cur = Eigen::VectorXd::Zero(g.dim);
            for (std::size_t k = 0; k < parts; ++k) {
                const double u0 = a + (b - a) * static_cast<double>(k) / static_cast<double>(parts);
                const double u1 =
                    a + (b - a) * static_cast<double>(k + 1) / static_cast<double>(parts);
                cur += checked_eval(g, u0, u1);
            }
            const double gap = (cur - prev).norm();
            if (gap > level_gaps[l - 1]) level_gaps[l - 1] = gap;
            prev = cur;
        }
        fine_sum.row(i) = prev.transpose();
        (void)sub;
    }

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, g.dim);
    for (std::size_t i = 0; i + 1 < n; ++i) values.row(i + 1) = values.row(i) + fine_sum.row(i);
    Path integral(grid, values);

    // Remainder I(g) - g on coarse pairs at dyadic spans.
    const int levels =
        std::max(3, std::min(8, static_cast<int>(std::floor(std::log2(static_cast<double>(n - 1))))));
    TwoParamIncrement remainder(grid, g.dim, 1);
    DefectReport rep;
    rep.scales = dyadic_scales(grid.horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);
    for (std::size_t k = 0; k < rep.scales.size(); ++k) {
        const std::size_t span = std::max<std::size_t>(1, (n - 1) >> k);
        for (std::size_t i = 0; i + span < n; i += span) {
            const std::size_t j = i + span;
            const Eigen::VectorXd rem =
                integral.increment(i, j) - checked_eval(g, grid[i], grid[j]);
            remainder.set(i, j, rem);
            const double v = rem.norm();
            if (v > rep.max_defect[k]) rep.max_defect[k] = v;
            rep.counts[k]++;
        }
    }

    SewResult out{std::move(integral), std::move(remainder), rep, rep.fitted_slope(),
                  std::move(level_gaps)};
    return out;
}

double scaling_exponent(const DefectReport& defects) {
    if (defects.scales.size() < 3) throw std::invalid_argument("need at least 3 scales");
    return defects.fitted_slope();
}

}  // namespace rmkv
