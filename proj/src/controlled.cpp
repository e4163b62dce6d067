#include "roughmckv/controlled.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace rmkv {

namespace {

// Pairing of a stored derivative block with a second-level increment:
// sum over value column a and direction k of D(i, a*m+k) * ZZ(k, a).
Eigen::VectorXd contract_second(const Eigen::MatrixXd& deriv, const Eigen::MatrixXd& zz,
                                Eigen::Index cols) {
    const Eigen::Index m = zz.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(deriv.rows());
    for (Eigen::Index a = 0; a < cols; ++a)
        out += deriv.middleCols(a * m, m) * zz.col(a);
    return out;
}

// One-step germ increment Y_i dZ_i + D_i : ZZ_i of the rough integral.
Eigen::VectorXd germ_step(const ControlledPath& y, std::size_t i, std::size_t j) {
    return y.value(i) * y.base().z().increment(i, j) +
           contract_second(y.derivative(i), y.base().zz(i, j), y.cols());
}

}  // namespace

ControlledPath::ControlledPath(std::shared_ptr<const RoughPath> base,
                               std::vector<Eigen::MatrixXd> values,
                               std::vector<Eigen::MatrixXd> derivatives)
    : base_(std::move(base)), values_(std::move(values)), derivs_(std::move(derivatives)) {
    if (!base_) throw std::invalid_argument("controlled path needs a reference rough path");
    const std::size_t n = base_->grid().size();
    if (values_.size() != n || derivs_.size() != n)
        throw std::invalid_argument("controlled path needs one value and derivative per grid point");
    rows_ = values_[0].rows();
    cols_ = values_[0].cols();
    const Eigen::Index m = base_->dim();
    for (std::size_t i = 0; i < n; ++i) {
        if (values_[i].rows() != rows_ || values_[i].cols() != cols_)
            throw std::invalid_argument("controlled path values change shape");
        if (derivs_[i].rows() != rows_ || derivs_[i].cols() != cols_ * m)
            throw std::invalid_argument("controlled path derivative shape must be rows by cols*dim");
    }
}

Eigen::MatrixXd ControlledPath::remainder(std::size_t i, std::size_t j) const {
    const Eigen::Index m = base_->dim();
    const Eigen::VectorXd dz = base_->z().increment(i, j);
    Eigen::MatrixXd r = values_[j] - values_[i];
    for (Eigen::Index a = 0; a < cols_; ++a)
        r.col(a) -= derivs_[i].middleCols(a * m, m) * dz;
    return r;
}

DefectReport ControlledPath::remainder_report() const {
    const std::size_t n = grid().size();
    const int levels = std::max(
        3, std::min(8, static_cast<int>(std::floor(std::log2(static_cast<double>(n - 1))))));
    DefectReport rep;
    rep.scales = dyadic_scales(grid().horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);
    for (std::size_t k = 0; k < rep.scales.size(); ++k) {
        const std::size_t span = std::max<std::size_t>(1, (n - 1) >> k);
        for (std::size_t i = 0; i + span < n; i += span) {
            const double v = remainder(i, i + span).norm();
            if (v > rep.max_defect[k]) rep.max_defect[k] = v;
            rep.counts[k]++;
        }
    }
    return rep;
}

RoughIntegralResult rough_integral(const ControlledPath& integrand) {
    const RoughPath& base = integrand.base();
    if (integrand.cols() != base.dim())
        throw std::invalid_argument("integrand columns must match the reference dimension");
    const std::size_t n = base.grid().size();
    const Eigen::Index e = integrand.rows();

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, e);
    for (std::size_t i = 0; i + 1 < n; ++i)
        values.row(i + 1) = values.row(i) + germ_step(integrand, i, i + 1).transpose();
    Path integral(base.grid(), values);

    // The integral is itself controlled, with the integrand as derivative.
    std::vector<Eigen::MatrixXd> ivals(n), iderivs(n);
    for (std::size_t i = 0; i < n; ++i) {
        ivals[i] = values.row(i).transpose();
        iderivs[i] = integrand.value(i);
    }
    ControlledPath as_controlled(integrand.base_ptr(), std::move(ivals), std::move(iderivs));

    // Remainder of the integral against its own germ on dyadic coarse pairs.
    const int levels = std::max(
        3, std::min(8, static_cast<int>(std::floor(std::log2(static_cast<double>(n - 1))))));
    DefectReport rep;
    rep.scales = dyadic_scales(base.grid().horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);
    for (std::size_t k = 0; k < rep.scales.size(); ++k) {
        const std::size_t span = std::max<std::size_t>(1, (n - 1) >> k);
        for (std::size_t i = 0; i + span < n; i += span) {
            const std::size_t j = i + span;
            const double v = (integral.increment(i, j) - germ_step(integrand, i, j)).norm();
            if (v > rep.max_defect[k]) rep.max_defect[k] = v;
            rep.counts[k]++;
        }
    }

    RoughIntegralResult out{std::move(integral), std::move(as_controlled), rep, rep.fitted_slope()};
    return out;
}

RoughPath integral_lift(const ControlledPath& integrand, const Eigen::VectorXd& x0) {
    const RoughPath& base = integrand.base();
    if (integrand.cols() != base.dim())
        throw std::invalid_argument("integrand columns must match the reference dimension");
    if (x0.size() != integrand.rows())
        throw std::invalid_argument("start point dimension must match the integrand rows");
    const std::size_t n = base.grid().size();
    const Eigen::Index e = integrand.rows();

    Eigen::MatrixXd values(n, e);
    values.row(0) = x0.transpose();
    std::vector<Eigen::MatrixXd> anchors(n);
    anchors[0] = Eigen::MatrixXd::Zero(e, e);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd dz = base.z().increment(i, i + 1);
        const Eigen::MatrixXd zz = base.zz(i, i + 1);
        const Eigen::VectorXd dx = germ_step(integrand, i, i + 1);
        values.row(i + 1) = values.row(i) + dx.transpose();
        // Square of the step plus the reference's deviation from its own
        // squared increment, pushed through the integrand value. The
        // deviation vanishes for geometric references and carries the
        // bracket for left-point ones.
        const Eigen::MatrixXd dev = zz - 0.5 * dz * dz.transpose();
        const Eigen::MatrixXd step =
            0.5 * dx * dx.transpose() +
            integrand.value(i) * dev * integrand.value(i).transpose();
        const Eigen::VectorXd from_start =
            values.row(i).transpose() - values.row(0).transpose();
        anchors[i + 1] = anchors[i] + from_start * dx.transpose() + step;
    }
    return RoughPath(Path(base.grid(), values), std::move(anchors), base.alpha());
}

}  // namespace rmkv
