#pragma once

#include "roughmckv/path.hpp"
#include "roughmckv/two_param.hpp"

namespace rmkv {

// sup over grid pairs with |t-s| <= h of ||g_st||_F / |t-s|^alpha.
double holder_seminorm(const TwoParamIncrement& g, double alpha, double h);
// Path overload: first forms increments delta f.
double holder_seminorm(const Path& f, double alpha, double h);

// Exact p-variation over grid-subordinate partitions of [points[lo], points[hi]],
// by dynamic programming over grid indices. Returns [[g]]_{p,[lo,hi]}.
double p_variation(const TwoParamIncrement& g, double p, std::size_t lo, std::size_t hi);
double p_variation(const TwoParamIncrement& g, double p);

}  // namespace rmkv
