#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "roughmckv/defect.hpp"
#include "roughmckv/path.hpp"
#include "roughmckv/two_param.hpp"

namespace rmkv {

// Level-2 rough path: first level Z plus second level ZZ_{st} (m x m),
// alpha in (1/3, 1/2]. The second level is held in anchored form
// A_i = ZZ_{t_0 t_i} and reconstructed through
//     ZZ_{st} = A_t - A_s - Z_{0s} (x) Z_{st},
// which is exact for every lift built here (piecewise-linear, left-point,
// midpoint sums all telescope to this). Explicit per-pair overrides exist so
// that broken second levels can be represented and detected.
class RoughPath {
public:
    RoughPath(Path z, std::vector<Eigen::MatrixXd> zz_anchor, double alpha);

    const TimeGrid& grid() const { return z_.grid(); }
    const Path& z() const { return z_; }
    int dim() const { return z_.dim(); }
    double alpha() const { return alpha_; }

    Eigen::VectorXd z_at(std::size_t i) const { return z_.at(i); }
    Eigen::VectorXd z_inc(std::size_t i, std::size_t j) const { return z_.increment(i, j); }
    Eigen::MatrixXd zz(std::size_t i, std::size_t j) const;

    // Evaluator-backed views for the seminorm machinery.
    TwoParamIncrement z_view() const;
    TwoParamIncrement zz_view() const;

    // Replace ZZ at one pair by its current value plus delta. Breaks Chen
    // coherence at triples touching (i,j); used by negative controls.
    void tamper_second_level(std::size_t i, std::size_t j, const Eigen::MatrixXd& delta);
    const std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXd>& overrides() const {
        return overrides_;
    }

private:
    Path z_;
    std::vector<Eigen::MatrixXd> anchor_;  // A_i = ZZ_{t_0 t_i}
    double alpha_;
    std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXd> overrides_;
};

// Exact level-2 lift of a piecewise-linear path:
// ZZ_{st} = int_s^t Z_{sr} (x) dZ_r in closed form per segment.
RoughPath lift_smooth_path(const Path& z, double alpha = 0.45);

// Max over grid triples s < u < t of ||ZZ_{st} - ZZ_{su} - ZZ_{ut} - Z_{su} (x) Z_{ut}||_F,
// bucketed by |t-s|. Full triple scan for small grids, dyadic-stratified
// sampling above.
DefectReport chen_defect(const RoughPath& rp);

// Max over grid pairs of ||Sym(ZZ_{st}) - 1/2 Z_{st} (x) Z_{st}||_F.
DefectReport geometricity_defect(const RoughPath& rp);

// Time window [t_lo, t_hi] as a rough path in its own right: anchors are
// rebased to the window start, so every in-window increment ZZ_{st} is
// unchanged. Per-pair overrides inside the window are carried over.
RoughPath restrict_rough_path(const RoughPath& rp, std::size_t lo, std::size_t hi);

}  // namespace rmkv
