#pragma once

#include <memory>

#include <Eigen/Dense>

#include "roughmckv/control.hpp"
#include "roughmckv/defect.hpp"
#include "roughmckv/field_basis.hpp"
#include "roughmckv/rough_path.hpp"

namespace rmkv {

// Time-indexed pair of vector fields (F, FF) for dx = F_{dt}(x), carried as a
// rough path over basis coefficients: F_{st} = sum_k c_k(s,t) phi_k and
// FF_{st}(x,y) = sum_{k,l} ZZ^{kl}_{st} s_k(x) (v_k . grad s_l(y)) v_l.
// With this representation the nonlinear Chen identity
//     delta FF_{sut}(x,y) = (F_{su}(x) . grad) F_{ut}(y)
// is exactly the coefficient path's own Chen relation pushed through fields.
class RoughDriver {
public:
    RoughDriver(std::shared_ptr<const FieldBasis> basis, RoughPath coeff, double alpha);

    const FieldBasis& basis() const { return *basis_; }
    const std::shared_ptr<const FieldBasis>& basis_ptr() const { return basis_; }
    const RoughPath& coeff() const { return coeff_; }
    const TimeGrid& grid() const { return coeff_.grid(); }
    double alpha() const { return alpha_; }
    double p() const { return 1.0 / alpha_; }

    SmoothField first_level(std::size_t i, std::size_t j) const;
    TwoPointField second_level(std::size_t i, std::size_t j) const;

    Eigen::VectorXd f_apply(std::size_t i, std::size_t j, const Eigen::VectorXd& x) const;
    Eigen::VectorXd ff_apply(std::size_t i, std::size_t j, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y) const;
    Eigen::VectorXd ff_diag(std::size_t i, std::size_t j, const Eigen::VectorXd& x) const {
        return ff_apply(i, j, x, x);
    }

    // Admission weight of the step (i, j): the step's own control raised to
    // 1/p, through coefficient-bound field norms (C_b^3 for the first level,
    // C_b^2 for the second).
    double step_weight(std::size_t i, std::size_t j) const;

    // Conservative control, linear in (t - s), built from the full-window
    // Holder constants of both levels; superadditive by construction. The
    // per-step admission above is sharper on smooth drivers.
    ControlFn control() const;
    double holder_first() const { return k_first_; }
    double holder_second() const { return k_second_; }

private:
    std::shared_ptr<const FieldBasis> basis_;
    RoughPath coeff_;
    double alpha_;
    double k_first_ = 0.0;   // sup ||F_st||_{C3} / (t-s)^alpha over dyadic pairs
    double k_second_ = 0.0;  // sup ||FF_st||_{C2} / (t-s)^{2 alpha}
};

// Wrap a coefficient rough path as a driver. Chen holds by construction; the
// defect diagnostic below re-evaluates it through the fields.
RoughDriver driver_from_rough_path(std::shared_ptr<const FieldBasis> basis, RoughPath coeff,
                                   double alpha = 0.45);

// Driver of an integrated field family: the family is piecewise linear in
// time with coefficient samples family(i, k), so both levels have closed-form
// per-segment integrals (the coefficient path is piecewise quadratic).
RoughDriver driver_from_quadrature(std::shared_ptr<const FieldBasis> basis, const Path& family,
                                   double alpha = 0.45);

// Max over sampled (s, u, t, x, y) of the nonlinear Chen defect
//     || FF_{st}(x,y) - FF_{su}(x,y) - FF_{ut}(x,y) - (F_{su}(x) . grad) F_{ut}(y) ||,
// bucketed by |t - s|. Spatial points drawn from the basis probe box.
DefectReport driver_chen_defect(const RoughDriver& d, int samples_per_scale = 8,
                                unsigned seed = 1);

struct DriverDistanceReport {
    double total = 0.0;
    double first_term = 0.0;   // alpha-Holder seminorm of F - G in C_b^3
    double second_term = 0.0;  // 2 alpha-seminorm of FF - GG in C_b^2, before sqrt
};

// Driver metric: first-level Holder seminorm plus the square root of the
// second-level one, probe norms on the shared basis, pairs with span <= h.
DriverDistanceReport driver_distance(const RoughDriver& a, const RoughDriver& b, double alpha,
                                     double h);

}  // namespace rmkv
