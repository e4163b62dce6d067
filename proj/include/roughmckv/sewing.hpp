#pragma once

#include <Eigen/Dense>
#include <functional>

#include "roughmckv/defect.hpp"
#include "roughmckv/path.hpp"
#include "roughmckv/two_param.hpp"

namespace rmkv {

// Local description of an integral: g_{st} approximates the increment of the
// integral over [s,t], with coherence |delta g_{sut}| = O(|t-s|^zeta),
// zeta > 1.
struct Germ {
    std::function<Eigen::VectorXd(double, double)> eval;
    int dim = 1;
    double claimed_zeta = 1.5;
};

struct SewResult {
    Path integral;                     // I(g) on the coarse grid, I_0 = 0
    TwoParamIncrement natural_remainder;  // I(g)_{st} - g_{st} on coarse pairs
    DefectReport remainder_report;     // per-dyadic-scale maxima of the remainder
    double fitted_zeta = 0.0;
    std::vector<double> level_gaps;    // sup |S_{l+1} - S_l| per refinement level
};

// Compensated Riemann sums over the 2^refine_levels-fold dyadic refinement of
// each grid interval, accumulated per coarse interval.
SewResult sew(const Germ& g, const TimeGrid& grid, int refine_levels = 6);

// Least-squares log-log slope of a defect ladder; +infinity when all levels
// are exactly zero.
double scaling_exponent(const DefectReport& defects);

}  // namespace rmkv
