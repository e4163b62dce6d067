#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "roughmckv/defect.hpp"
#include "roughmckv/rough_path.hpp"

namespace rmkv {

// Grid path whose local increments follow the first level of a reference
// rough path: each value column moves by its stored derivative contracted
// with the reference increment, up to a remainder of twice the reference
// regularity. Values at time t_i are e-by-c matrices; the derivative of
// value column a in reference direction k is stored in derivative column
// a*m + k, where m is the reference dimension.
class ControlledPath {
public:
    ControlledPath(std::shared_ptr<const RoughPath> base,
                   std::vector<Eigen::MatrixXd> values,
                   std::vector<Eigen::MatrixXd> derivatives);

    const RoughPath& base() const { return *base_; }
    const std::shared_ptr<const RoughPath>& base_ptr() const { return base_; }
    const TimeGrid& grid() const { return base_->grid(); }
    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }

    const Eigen::MatrixXd& value(std::size_t i) const { return values_[i]; }
    const Eigen::MatrixXd& derivative(std::size_t i) const { return derivs_[i]; }

    // delta(value) over [t_i, t_j] minus the derivative at t_i contracted
    // with the reference increment.
    Eigen::MatrixXd remainder(std::size_t i, std::size_t j) const;

    // Sizes of that remainder bucketed by dyadic span; for a genuinely
    // controlled path the fitted slope is about twice the reference
    // regularity.
    DefectReport remainder_report() const;

private:
    std::shared_ptr<const RoughPath> base_;
    std::vector<Eigen::MatrixXd> values_;
    std::vector<Eigen::MatrixXd> derivs_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
};

struct RoughIntegralResult {
    // Integral path starting at zero, one row per grid point.
    Path integral;
    // The same integral as a controlled path; its derivative is the
    // integrand value, so the construction can be iterated.
    ControlledPath as_controlled;
    // Integral increment minus the one-step germ on dyadic coarse pairs.
    DefectReport remainder_report;
    double fitted_zeta = 0.0;
};

// Compensated left-point integral of a matrix-valued controlled integrand
// against its own reference path. The integrand must have as many columns
// as the reference has dimensions.
RoughIntegralResult rough_integral(const ControlledPath& integrand);

// Full level-2 lift of X_t = x0 + int Y dZ. The second level is the square
// of the one-step increment plus the transported deviation of the reference
// second level from its own squared increment, so a geometric reference
// yields a geometric lift and a left-point reference keeps its bracket.
RoughPath integral_lift(const ControlledPath& integrand, const Eigen::VectorXd& x0);

}  // namespace rmkv
