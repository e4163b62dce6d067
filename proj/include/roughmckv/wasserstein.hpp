#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughmckv/path.hpp"

namespace rmkv {

// Optimal-transport cost between two uniform empirical measures, with the
// bookkeeping needed to trust an approximate run: the reported value is the
// rho-th root of the primal cost of an explicit feasible coupling, and
// entropic_gap bounds its distance to the true optimum (zero for the exact
// methods).
struct TransportReport {
    double value = 0.0;
    double entropic_gap = 0.0;  // primal minus dual bound, in rho-th power units
    std::string method;         // "sorted", "hungarian", or "sinkhorn"
};

// W_rho between point clouds (one sample per row). One-dimensional clouds
// use exact quantile matching for any sample counts; equal counts up to
// exact_limit use an exact optimal assignment; anything larger or unequal
// goes through log-domain entropic regularization plus rounding to a
// feasible coupling. Inputs are ordered canonically first, so the result is
// bitwise symmetric in its arguments.
TransportReport wasserstein_report(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                   std::size_t exact_limit = 256);
double wasserstein_rho(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho);

// Path-space variant: the ground distance between two paths on a shared grid
// is the alpha-Holder seminorm of their difference.
TransportReport wasserstein_paths_report(const std::vector<Path>& a, const std::vector<Path>& b,
                                         double rho, double alpha, std::size_t exact_limit = 256);
double wasserstein_paths(const std::vector<Path>& a, const std::vector<Path>& b, double rho,
                         double alpha);

}  // namespace rmkv
