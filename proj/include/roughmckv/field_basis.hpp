#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace rmkv {

// One basis element: a Gaussian bump scaled by an affine factor, pointing in
// a fixed direction. The scalar part is
//     s(x) = (offset + linear.(x - center)) * exp(-|x - center|^2 / (2 width^2))
// and the vector field is direction * s(x). Pure bumps use offset 1 and zero
// linear part; the affine factor lets a wide atom imitate the identity field
// on a bounded box. All derivatives to order 3 are closed-form.
struct Atom {
    Eigen::VectorXd center;
    double width = 1.0;
    Eigen::VectorXd direction;
    Eigen::VectorXd linear;
    double offset = 1.0;

    static Atom bump(Eigen::VectorXd center, double width, Eigen::VectorXd direction);
    static Atom affine(Eigen::VectorXd center, double width, Eigen::VectorXd direction,
                       Eigen::VectorXd linear, double offset = 0.0);
};

double atom_scalar(const Atom& a, const Eigen::VectorXd& x);
Eigen::VectorXd atom_scalar_grad(const Atom& a, const Eigen::VectorXd& x);
Eigen::MatrixXd atom_scalar_hess(const Atom& a, const Eigen::VectorXd& x);
// Third derivative: slice k holds d^3 s / dx_i dx_j dx_k.
std::vector<Eigen::MatrixXd> atom_scalar_third(const Atom& a, const Eigen::VectorXd& x);

// Shared dictionary of atoms for one spatial dimension d. Vector fields over
// the basis are coefficient vectors; all sup norms are estimated on a fixed
// probe set ([-5,5]^d lattice for d <= 2, Monte Carlo draws above) and cached
// per atom at construction.
class FieldBasis {
public:
    FieldBasis(int dim, std::vector<Atom> atoms);

    int dim() const { return dim_; }
    std::size_t size() const { return atoms_.size(); }
    const Atom& atom(std::size_t k) const { return atoms_[k]; }
    const Eigen::MatrixXd& probes() const { return probes_; }

    // Probe-estimated sup of the Frobenius norm of the order-r derivative of
    // atom k's vector field, r = 0..3.
    double atom_sup(std::size_t k, int order) const { return atom_sup_(k, order); }
    // max over orders 0..order of atom_sup.
    double atom_cb(std::size_t k, int order) const;

    Eigen::VectorXd field_value(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) const;
    // J(i, j) = d field_i / d x_j.
    Eigen::MatrixXd field_jacobian(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) const;

    // Probe-estimated C_b^order norm (max over derivative orders of the probe
    // sup of the Frobenius norm) of the field with these coefficients.
    double field_cb(const Eigen::VectorXd& coeffs, int order) const;
    // Triangle-inequality bound through cached atom norms; an upper estimate
    // of field_cb, O(K) per call.
    double field_cb_bound(const Eigen::VectorXd& coeffs, int order) const;
    // Weighted coefficient norm standing in for a Sobolev norm of order s.
    double sobolev_proxy(const Eigen::VectorXd& coeffs, double s) const;

    // Probe-estimated C_b^order norm of the diagonal two-point field
    //     x -> sum_{k,l} M(k,l) s_k(x) (v_k . grad s_l(x)) v_l,
    // order <= 2 (its derivatives consume atom derivatives up to order 3).
    double pair_field_cb(const Eigen::MatrixXd& m, int order) const;
    // Triangle bound through cached per-pair norms.
    double pair_field_cb_bound(const Eigen::MatrixXd& m, int order) const;

private:
    void check_x(const Eigen::VectorXd& x) const;
    void pair_eval(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, int order,
                   Eigen::VectorXd& g0, Eigen::MatrixXd& g1,
                   std::vector<Eigen::MatrixXd>& g2) const;
    double pair_field_cb_scan(const Eigen::MatrixXd& m, int order) const;

    int dim_;
    std::vector<Atom> atoms_;
    Eigen::MatrixXd probes_;     // P x d
    Eigen::MatrixXd atom_sup_;   // K x 4
    // Cached probe sups for atom-pair diagonal products, orders 0..2.
    std::vector<Eigen::MatrixXd> pair_sup_;
};

// Coefficient vector over a shared basis.
struct SmoothField {
    std::shared_ptr<const FieldBasis> basis;
    Eigen::VectorXd coeffs;

    Eigen::VectorXd value(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
    double cb(int order) const { return basis->field_cb(coeffs, order); }
};

// Coefficient matrix M over a shared basis representing the two-point field
//     (x, y) -> sum_{k,l} M(k,l) s_k(x) (v_k . grad s_l(y)) v_l.
struct TwoPointField {
    std::shared_ptr<const FieldBasis> basis;
    Eigen::MatrixXd m;

    Eigen::VectorXd value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    Eigen::VectorXd diag(const Eigen::VectorXd& x) const { return value(x, x); }
    double cb_diag(int order) const { return basis->pair_field_cb(m, order); }
};

// Scalar test function built from atom scalar parts: value, gradient, and
// Hessian evaluable anywhere; used to probe measure-valued equations.
struct TestFunction {
    std::vector<Atom> atoms;
    Eigen::VectorXd coeffs;

    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hess(const Eigen::VectorXd& x) const;
};

}  // namespace rmkv
