#include "roughmckv/rough_path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmkv {

RoughPath::RoughPath(Path z, std::vector<Eigen::MatrixXd> zz_anchor, double alpha)
    : z_(std::move(z)), anchor_(std::move(zz_anchor)), alpha_(alpha) {
    if (anchor_.size() != z_.size())
        throw std::invalid_argument("second-level anchor count must match grid");
    const int m = z_.dim();
    for (const auto& a : anchor_)
        if (a.rows() != m || a.cols() != m)
            throw std::invalid_argument("second-level tensor shape mismatch");
    if (!(alpha_ > 1.0 / 3.0 && alpha_ <= 0.5))
        throw std::invalid_argument("alpha must be in (1/3, 1/2]");
}

Eigen::MatrixXd RoughPath::zz(std::size_t i, std::size_t j) const {
    if (i == j) return Eigen::MatrixXd::Zero(dim(), dim());
    if (i > j) throw std::invalid_argument("zz requires i <= j");
    if (!overrides_.empty()) {
        if (auto it = overrides_.find({i, j}); it != overrides_.end()) return it->second;
    }
    return anchor_[j] - anchor_[i] - z_.increment(0, i) * z_.increment(i, j).transpose();
}

TwoParamIncrement RoughPath::z_view() const { return TwoParamIncrement::path_increments(z_); }

TwoParamIncrement RoughPath::zz_view() const {
    const RoughPath* self = this;
    return TwoParamIncrement(grid(), dim(), dim(),
                             [self](std::size_t i, std::size_t j) { return self->zz(i, j); });
}

void RoughPath::tamper_second_level(std::size_t i, std::size_t j, const Eigen::MatrixXd& delta) {
    overrides_[{i, j}] = zz(i, j) + delta;
}

RoughPath restrict_rough_path(const RoughPath& rp, std::size_t lo, std::size_t hi) {
    Path z = restrict_path(rp.z(), lo, hi);
    const std::size_t n = hi - lo + 1;
    std::vector<Eigen::MatrixXd> anchors(n);
    for (std::size_t k = 0; k < n; ++k) anchors[k] = rp.zz(lo, lo + k);
    RoughPath out(std::move(z), std::move(anchors), rp.alpha());
    for (const auto& [pair, value] : rp.overrides()) {
        if (pair.first < lo || pair.second > hi) continue;
        const std::size_t i = pair.first - lo, j = pair.second - lo;
        out.tamper_second_level(i, j, value - out.zz(i, j));
    }
    return out;
}

RoughPath lift_smooth_path(const Path& z, double alpha) {
    // A_{i+1} = A_i + Z_{0i} (x) dZ_i + 1/2 dZ_i (x) dZ_i is the exact
    // iterated integral of the piecewise-linear interpolant.
    const std::size_t n = z.size();
    const int m = z.dim();
    std::vector<Eigen::MatrixXd> anchor(n);
    anchor[0] = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd z0i = z.at(i) - z.at(0);
        const Eigen::VectorXd dz = z.increment(i, i + 1);
        anchor[i + 1] = anchor[i] + z0i * dz.transpose() + 0.5 * dz * dz.transpose();
    }
    return RoughPath(z, std::move(anchor), alpha);
}

namespace {

// Representative theta choices inside (i, j): midpoint plus strided interior
// points, enough to catch a broken entry without an O(n^3) sweep.
void scan_triple(const RoughPath& rp, std::size_t i, std::size_t j,
                 const std::vector<double>& scales, DefectReport& rep) {
    const double span = rp.grid()[j] - rp.grid()[i];
    const std::size_t bucket = scale_bucket(scales, span);
    if (bucket == static_cast<std::size_t>(-1)) return;
    const std::size_t stride = std::max<std::size_t>(1, (j - i) / 8);
    for (std::size_t u = i + 1; u < j; u += stride) {
        const Eigen::MatrixXd defect =
            rp.zz(i, j) - rp.zz(i, u) - rp.zz(u, j) -
            rp.z_inc(i, u) * rp.z_inc(u, j).transpose();
        const double v = defect.norm();
        if (v > rep.max_defect[bucket]) rep.max_defect[bucket] = v;
        rep.counts[bucket]++;
    }
}

}  // namespace

DefectReport chen_defect(const RoughPath& rp) {
    const TimeGrid& grid = rp.grid();
    const std::size_t n = grid.size();
    if (n < 3) throw std::invalid_argument("need at least three grid points");

    const int levels = std::max(3, std::min(8, static_cast<int>(std::floor(std::log2(n - 1)))));
    DefectReport rep;
    rep.scales = dyadic_scales(grid.horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);

    if (n <= 160) {
        // Full triple scan.
        for (std::size_t i = 0; i + 2 < n; ++i) {
            for (std::size_t j = i + 2; j < n; ++j) {
                const double span = grid[j] - grid[i];
                const std::size_t bucket = scale_bucket(rep.scales, span);
                if (bucket == static_cast<std::size_t>(-1)) continue;
                const Eigen::MatrixXd zij = rp.zz(i, j);
                for (std::size_t u = i + 1; u < j; ++u) {
                    const Eigen::MatrixXd defect =
                        zij - rp.zz(i, u) - rp.zz(u, j) -
                        rp.z_inc(i, u) * rp.z_inc(u, j).transpose();
                    const double v = defect.norm();
                    if (v > rep.max_defect[bucket]) rep.max_defect[bucket] = v;
                    rep.counts[bucket]++;
                }
            }
        }
        return rep;
    }

    // Dyadic-stratified sampling: per scale, spans of that size across the
    // grid with several interior split points each.
    for (std::size_t k = 0; k < rep.scales.size(); ++k) {
        const std::size_t span_idx = std::max<std::size_t>(2, (n - 1) >> k);
        const std::size_t step = std::max<std::size_t>(1, span_idx / 4);
        for (std::size_t i = 0; i + span_idx < n; i += step)
            scan_triple(rp, i, i + span_idx, rep.scales, rep);
    }
    return rep;
}

DefectReport geometricity_defect(const RoughPath& rp) {
    const TimeGrid& grid = rp.grid();
    const std::size_t n = grid.size();
    const int levels = std::max(3, std::min(8, static_cast<int>(std::floor(std::log2(n - 1)))));
    DefectReport rep;
    rep.scales = dyadic_scales(grid.horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);

    auto visit = [&](std::size_t i, std::size_t j) {
        const double span = grid[j] - grid[i];
        const std::size_t bucket = scale_bucket(rep.scales, span);
        if (bucket == static_cast<std::size_t>(-1)) return;
        const Eigen::MatrixXd zz = rp.zz(i, j);
        const Eigen::VectorXd dz = rp.z_inc(i, j);
        const double v = (0.5 * (zz + zz.transpose()) - 0.5 * dz * dz.transpose()).norm();
        if (v > rep.max_defect[bucket]) rep.max_defect[bucket] = v;
        rep.counts[bucket]++;
    };

    if (n <= 1200) {
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
    } else {
        for (std::size_t k = 0; k < rep.scales.size(); ++k) {
            const std::size_t span_idx = std::max<std::size_t>(1, (n - 1) >> k);
            const std::size_t step = std::max<std::size_t>(1, span_idx / 4);
            for (std::size_t i = 0; i + span_idx < n; i += step) visit(i, i + span_idx);
        }
    }
    return rep;
}

}  // namespace rmkv
