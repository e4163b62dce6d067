#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "roughmckv/driver.hpp"
#include "roughmckv/field_basis.hpp"
#include "util.hpp"

using namespace rmkv;
using testutil::random_smooth_path;

namespace {

Eigen::VectorXd vec1(double a) { return Eigen::VectorXd::Constant(1, a); }

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

// Central finite differences of the atom scalar part, the independent check
// for every closed-form derivative below.
Eigen::VectorXd fd_grad(const Atom& a, const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (atom_scalar(a, xp) - atom_scalar(a, xm)) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hess(const Atom& a, const Eigen::VectorXd& x, double h) {
    Eigen::MatrixXd m(x.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        m.col(j) = (atom_scalar_grad(a, xp) - atom_scalar_grad(a, xm)) / (2.0 * h);
    }
    return m;
}

std::vector<Eigen::MatrixXd> fd_third(const Atom& a, const Eigen::VectorXd& x, double h) {
    std::vector<Eigen::MatrixXd> t(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        t[k] = (atom_scalar_hess(a, xp) - atom_scalar_hess(a, xm)) / (2.0 * h);
    }
    return t;
}

std::shared_ptr<const FieldBasis> small_basis_1d() {
    std::vector<Atom> atoms;
    atoms.push_back(Atom::bump(vec1(-0.8), 1.3, vec1(1.0)));
    atoms.push_back(Atom::bump(vec1(0.9), 0.9, vec1(-0.7)));
    atoms.push_back(Atom::affine(vec1(0.0), 2.5, vec1(0.5), vec1(0.4), 0.3));
    return std::make_shared<FieldBasis>(1, std::move(atoms));
}

std::shared_ptr<const FieldBasis> small_basis_2d() {
    std::vector<Atom> atoms;
    atoms.push_back(Atom::bump(vec2(-0.5, 0.4), 1.1, vec2(1.0, 0.2)));
    atoms.push_back(Atom::bump(vec2(0.7, -0.3), 1.4, vec2(-0.3, 0.9)));
    return std::make_shared<FieldBasis>(2, std::move(atoms));
}

// Coefficient rough path c(t) = t * g: piecewise-linear lift of a linear
// path, so ZZ_st = (t-s)^2/2 g (x) g exactly.
RoughPath linear_coeff_path(const Eigen::VectorXd& g, int level, double alpha) {
    TimeGrid grid = TimeGrid::dyadic(1.0, level);
    Eigen::MatrixXd v(grid.size(), g.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v.row(i) = grid[i] * g.transpose();
    return lift_smooth_path(Path(grid, v), alpha);
}

}  // namespace

TEST_CASE("atom derivatives match finite differences") {
    const double h = 1e-5;
    Atom bump2 = Atom::bump(vec2(0.3, -0.2), 0.8, vec2(1.0, 0.0));
    Atom affine2 = Atom::affine(vec2(-0.1, 0.5), 1.2, vec2(0.0, 1.0), vec2(0.3, -0.2), 0.7);
    std::vector<Eigen::VectorXd> points = {vec2(0.0, 0.0), vec2(0.9, -0.7), vec2(-1.4, 0.6)};
    for (const Atom& a : {bump2, affine2}) {
        for (const auto& x : points) {
            CHECK((atom_scalar_grad(a, x) - fd_grad(a, x, h)).norm() <= 1e-7);
            CHECK((atom_scalar_hess(a, x) - fd_hess(a, x, h)).norm() <= 1e-6);
            auto t = atom_scalar_third(a, x);
            auto tf = fd_third(a, x, h);
            double err = 0.0;
            for (std::size_t k = 0; k < t.size(); ++k) err += (t[k] - tf[k]).squaredNorm();
            CHECK(std::sqrt(err) <= 1e-5);
            // Full symmetry of the third derivative in all three slots.
            for (int k = 0; k < 2; ++k)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        CHECK(t[k](i, j) == doctest::Approx(t[i](j, k)).epsilon(1e-12));
                        CHECK(t[k](i, j) == doctest::Approx(t[j](i, k)).epsilon(1e-12));
                    }
        }
    }
}

TEST_CASE("field norms: probe scan vs triangle bound") {
    auto basis = small_basis_1d();
    Eigen::VectorXd c(3);
    c << 0.8, -1.1, 0.4;
    for (int order = 0; order <= 3; ++order) {
        double scan = basis->field_cb(c, order);
        double bound = basis->field_cb_bound(c, order);
        CHECK(scan > 0.0);
        CHECK(bound >= scan * (1.0 - 1e-12));
    }
    // A single atom's bound and scan coincide.
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
    e1(1) = 2.0;
    for (int order = 0; order <= 3; ++order) {
        CHECK(basis->field_cb(e1, order) == doctest::Approx(basis->field_cb_bound(e1, order))
                                                .epsilon(1e-12));
    }
    CHECK_THROWS_AS(basis->field_cb(Eigen::VectorXd::Zero(2), 0), std::invalid_argument);
    CHECK_THROWS_AS(basis->field_cb(c, 4), std::invalid_argument);
}

TEST_CASE("pair field norms and two-point evaluation") {
    auto basis = small_basis_1d();
    const std::size_t K = basis->size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(K, K);
    m(0, 1) = 1.0;
    // Unit coefficient: F(x, y) = s_0(x) (v_0 . grad s_1(y)) v_1 by hand.
    TwoPointField f{basis, m};
    Eigen::VectorXd x = vec1(0.35), y = vec1(-0.6);
    Eigen::VectorXd direct = atom_scalar(basis->atom(0), x) *
                             (basis->atom(0).direction.dot(atom_scalar_grad(basis->atom(1), y))) *
                             basis->atom(1).direction;
    CHECK((f.value(x, y) - direct).norm() <= 1e-14);
    CHECK((f.diag(x) - f.value(x, x)).norm() == 0.0);

    Eigen::MatrixXd full = Eigen::MatrixXd::Constant(K, K, 0.3);
    for (int order = 0; order <= 2; ++order) {
        double scan = basis->pair_field_cb(full, order);
        double bound = basis->pair_field_cb_bound(full, order);
        CHECK(scan > 0.0);
        CHECK(bound >= scan * (1.0 - 1e-12));
        // Unit matrices are exactly the cached entries.
        CHECK(basis->pair_field_cb(m, order) == doctest::Approx(
                  basis->pair_field_cb_bound(m, order)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(basis->pair_field_cb(Eigen::MatrixXd::Zero(K, K + 1), 0),
                    std::invalid_argument);
}

TEST_CASE("pair field derivative scan matches finite differences") {
    auto basis = small_basis_2d();
    Eigen::MatrixXd m(2, 2);
    m << 0.7, -0.4, 0.2, 1.1;
    TwoPointField f{basis, m};
    const double h = 1e-5;
    // Probe-norm scans are built on analytic first and second derivatives of
    // the diagonal map G(x) = F(x, x); differentiate G numerically instead.
    auto diag = [&](const Eigen::VectorXd& x) { return f.diag(x); };
    Eigen::VectorXd x0 = vec2(0.25, -0.45);
    Eigen::MatrixXd jac_fd(2, 2);
    for (int a = 0; a < 2; ++a) {
        Eigen::VectorXd xp = x0, xm = x0;
        xp(a) += h;
        xm(a) -= h;
        jac_fd.col(a) = (diag(xp) - diag(xm)) / (2.0 * h);
    }
    // Norm of the analytic first derivative at x0 can only be read through
    // the scan sup, so pin it with a one-point basis instead: restrict probes
    // by checking the sup dominates this point's numeric value.
    CHECK(basis->pair_field_cb(m, 1) >= jac_fd.norm() * (1.0 - 1e-6));
    CHECK(basis->pair_field_cb(m, 0) >= diag(x0).norm() * (1.0 - 1e-6));
}

TEST_CASE("probe lattice is dense enough for the norms it reports") {
    auto basis = small_basis_1d();
    Eigen::VectorXd c(3);
    c << 1.0, 0.6, -0.9;
    // Rescan on a 10x finer lattice with direct atom evaluations.
    double fine0 = 0.0, fine1 = 0.0;
    for (int i = 0; i <= 400; ++i) {
        Eigen::VectorXd x = vec1(-5.0 + 10.0 * i / 400.0);
        fine0 = std::max(fine0, basis->field_value(c, x).norm());
        fine1 = std::max(fine1, basis->field_jacobian(c, x).norm());
    }
    CHECK(basis->field_cb(c, 0) >= fine0 * 0.95);
    CHECK(basis->field_cb(c, 1) >= fine1 * 0.95);
}

TEST_CASE("autonomous driver closed form") {
    auto basis = small_basis_1d();
    Eigen::VectorXd g(3);
    g << 0.9, -0.5, 0.7;
    RoughDriver d = driver_from_rough_path(basis, linear_coeff_path(g, 6, 0.45), 0.45);

    const TimeGrid& grid = d.grid();
    std::size_t i = 7, j = 29;
    double span = grid[j] - grid[i];
    Eigen::VectorXd x = vec1(0.4);
    // First level: (t - s) b(x) with b the g-weighted field.
    Eigen::VectorXd bx = basis->field_value(g, x);
    CHECK((d.f_apply(i, j, x) - span * bx).norm() <= 1e-12);
    // Second level on the diagonal: (t - s)^2 / 2 (b . grad) b(x).
    Eigen::VectorXd bdb = basis->field_jacobian(g, x) * bx;
    CHECK((d.ff_diag(i, j, x) - 0.5 * span * span * bdb).norm() <= 1e-12);
}

TEST_CASE("quadrature driver: constant and time-linear families") {
    auto basis = small_basis_1d();
    Eigen::VectorXd g(3);
    g << 0.9, -0.5, 0.7;
    TimeGrid grid = TimeGrid::dyadic(1.0, 6);

    // Constant family g(t) = g reproduces the autonomous driver exactly.
    Eigen::MatrixXd const_vals(grid.size(), 3);
    for (std::size_t i = 0; i < grid.size(); ++i) const_vals.row(i) = g.transpose();
    RoughDriver dq = driver_from_quadrature(basis, Path(grid, const_vals), 0.45);
    RoughDriver dl = driver_from_rough_path(basis, linear_coeff_path(g, 6, 0.45), 0.45);
    DriverDistanceReport dist = driver_distance(dq, dl, 0.45, 1.0);
    CHECK(dist.first_term <= 1e-12);
    // The metric's square root turns second-level rounding dust into ~1e-8.
    CHECK(dist.total <= 1e-6);

    // Family g(t) = t * g integrates to c(t) = t^2/2 g: check the first level
    // against (t^2 - s^2)/2 and the second against the double integral
    // int_s^t (r^2 - s^2)/2 r dr g (x) g = (t^4/8 - s^2 t^2 / 4 + s^4 / 8) g (x) g.
    Eigen::MatrixXd lin_vals(grid.size(), 3);
    for (std::size_t i = 0; i < grid.size(); ++i) lin_vals.row(i) = grid[i] * g.transpose();
    RoughDriver dt = driver_from_quadrature(basis, Path(grid, lin_vals), 0.45);
    std::size_t i = 5, j = 41;
    double s = grid[i], t = grid[j];
    Eigen::VectorXd x = vec1(-0.3);
    Eigen::VectorXd bx = basis->field_value(g, x);
    CHECK((dt.f_apply(i, j, x) - 0.5 * (t * t - s * s) * bx).norm() <= 1e-12);
    double w2 = t * t * t * t / 8.0 - s * s * t * t / 4.0 + s * s * s * s / 8.0;
    Eigen::MatrixXd zz = dt.coeff().zz(i, j);
    CHECK((zz - w2 * g * g.transpose()).norm() <= 1e-12);
}

TEST_CASE("quadrature second level matches per-segment Simpson sums") {
    auto basis = small_basis_1d();
    Path family = random_smooth_path(64, 3, 91);
    RoughDriver d = driver_from_quadrature(basis, family, 0.45);
    const TimeGrid& grid = family.grid();
    std::size_t n = grid.size();

    // Independent oracle: cumulative trapezoid for c (exact, the family is
    // piecewise linear) and per-segment Simpson for int delta c (x) dc
    // (exact, the integrand is a cubic polynomial of the segment parameter).
    int k = family.dim();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, k);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double h = grid[i + 1] - grid[i];
        c.row(i + 1) = c.row(i) + 0.5 * h * (family.at(i) + family.at(i + 1)).transpose();
    }
    std::vector<Eigen::MatrixXd> anchor(n, Eigen::MatrixXd::Zero(k, k));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double h = grid[i + 1] - grid[i];
        Eigen::VectorXd g0 = family.at(i), g1 = family.at(i + 1);
        Eigen::VectorXd gm = 0.5 * (g0 + g1);
        Eigen::VectorXd cm =
            c.row(i).transpose() + 0.25 * h * (g0 + gm);  // trapezoid to the midpoint
        Eigen::VectorXd dc0 = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd dcm = cm - c.row(i).transpose();
        Eigen::VectorXd dc1 = (c.row(i + 1) - c.row(i)).transpose();
        Eigen::MatrixXd seg = (h / 6.0) * (dc0 * g0.transpose() + 4.0 * dcm * gm.transpose() +
                                           dc1 * g1.transpose());
        anchor[i + 1] = anchor[i] + c.row(i).transpose() * dc1.transpose() + seg;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; i += 7)
        for (std::size_t j = i + 1; j < n; j += 5) {
            Eigen::MatrixXd oracle = anchor[j] - anchor[i] -
                                     c.row(i).transpose() * (c.row(j) - c.row(i));
            worst = std::max(worst, (d.coeff().zz(i, j) - oracle).norm());
        }
    CHECK(worst <= 1e-12);
}

TEST_CASE("lift and quadrature agree on a smooth family") {
    auto basis = small_basis_1d();
    // c_k(t) = a_k sin(pi t + phi_k): sample c for the lift and its exact
    // derivative for the quadrature; both discretizations err at O(h^2).
    TimeGrid grid = TimeGrid::dyadic(1.0, 12);
    std::size_t n = grid.size();
    Eigen::VectorXd a(3), phi(3);
    a << 0.05, -0.04, 0.03;
    phi << 0.3, 1.1, 2.0;
    Eigen::MatrixXd cv(n, 3), gv(n, 3);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i)
        for (int kk = 0; kk < 3; ++kk) {
            cv(i, kk) = a(kk) * (std::sin(pi * grid[i] + phi(kk)) - std::sin(phi(kk)));
            gv(i, kk) = a(kk) * pi * std::cos(pi * grid[i] + phi(kk));
        }
    RoughDriver da = driver_from_rough_path(basis, lift_smooth_path(Path(grid, cv), 0.45), 0.45);
    RoughDriver db = driver_from_quadrature(basis, Path(grid, gv), 0.45);
    double worst1 = 0.0, worst2 = 0.0;
    for (std::size_t gap = 1; gap < n; gap *= 4)
        for (std::size_t i = 0; i + gap < n; i += 13) {
            worst1 = std::max(worst1,
                              (da.coeff().z_inc(i, i + gap) - db.coeff().z_inc(i, i + gap)).norm());
            worst2 = std::max(worst2, (da.coeff().zz(i, i + gap) - db.coeff().zz(i, i + gap)).norm());
        }
    CHECK(worst1 <= 1e-8);
    CHECK(worst2 <= 1e-8);

    // The driver metric sees the same closeness, rough-path scaled.
    DriverDistanceReport dist = driver_distance(da, db, 0.45, 0.25);
    CHECK(dist.total <= 1e-2);
    CHECK(dist.first_term <= 1e-4);
}

TEST_CASE("driver nonlinear Chen identity") {
    auto basis = small_basis_1d();
    Path coeff = random_smooth_path(256, 3, 17, 0.6);
    RoughDriver d = driver_from_rough_path(basis, lift_smooth_path(coeff, 0.45), 0.45);
    DefectReport rep = driver_chen_defect(d, 12, 5);
    CHECK(rep.max() <= 1e-10);

    Path family = random_smooth_path(256, 3, 23, 0.6);
    RoughDriver dq = driver_from_quadrature(basis, family, 0.45);
    CHECK(driver_chen_defect(dq, 12, 6).max() <= 1e-10);
}

TEST_CASE("tampered second level breaks driver Chen") {
    auto basis = small_basis_1d();
    Path coeff = random_smooth_path(64, 3, 31, 0.6);
    RoughPath rp = lift_smooth_path(coeff, 0.45);
    double baseline = driver_chen_defect(driver_from_rough_path(basis, rp, 0.45), 12, 7).max();
    // Corrupt every gap-4 pair so stratified triples cannot miss them all.
    Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(3, 3, 0.1);
    for (std::size_t i = 0; i + 4 < rp.grid().size(); ++i)
        rp.tamper_second_level(i, i + 4, delta);
    double broken = driver_chen_defect(driver_from_rough_path(basis, rp, 0.45), 12, 7).max();
    CHECK(baseline <= 1e-10);
    CHECK(broken >= 1e-4);
}

TEST_CASE("step weights are dominated by the exported control") {
    auto basis = small_basis_1d();
    Path coeff = random_smooth_path(128, 3, 47, 0.8);
    RoughDriver d = driver_from_rough_path(basis, lift_smooth_path(coeff, 0.45), 0.45);
    ControlFn w = d.control();
    CHECK(w.superadditivity_violation(d.grid().horizon()) <= 1e-12);
    const TimeGrid& g = d.grid();
    double p = d.p();
    for (std::size_t gap = 1; gap < g.size(); gap *= 2)
        for (std::size_t i = 0; i + gap < g.size(); i += 9) {
            double sw = d.step_weight(i, i + gap);
            CHECK(std::pow(sw, p) <= w(g[i], g[i + gap]) * (1.0 + 1e-9));
        }
    CHECK(d.step_weight(3, 4) > 0.0);
}

TEST_CASE("driver distance scales linearly in a coefficient perturbation") {
    auto basis = small_basis_1d();
    Path coeff = random_smooth_path(64, 3, 53, 0.5);
    RoughPath base = lift_smooth_path(coeff, 0.45);
    auto scaled = [&](double eps) {
        Path c2 = coeff;
        c2.values() *= (1.0 + eps);
        return driver_from_rough_path(basis, lift_smooth_path(c2, 0.45), 0.45);
    };
    RoughDriver d0 = driver_from_rough_path(basis, base, 0.45);
    double e1 = driver_distance(d0, scaled(1e-3), 0.45, 1.0).first_term;
    double e2 = driver_distance(d0, scaled(2e-3), 0.45, 1.0).first_term;
    CHECK(e1 > 0.0);
    CHECK(e2 / e1 == doctest::Approx(2.0).epsilon(0.05));
    CHECK(driver_distance(d0, d0, 0.45, 1.0).total == 0.0);
}

TEST_CASE("driver validation") {
    auto basis = small_basis_1d();
    Path coeff = random_smooth_path(16, 3, 3);
    RoughPath rp = lift_smooth_path(coeff, 0.45);
    CHECK_THROWS_AS(RoughDriver(nullptr, rp, 0.45), std::invalid_argument);
    CHECK_THROWS_AS(RoughDriver(basis, rp, 0.2), std::invalid_argument);
    Path bad = random_smooth_path(16, 2, 3);
    CHECK_THROWS_AS(RoughDriver(basis, lift_smooth_path(bad, 0.45), 0.45),
                    std::invalid_argument);
    CHECK_THROWS_AS(driver_from_quadrature(basis, bad, 0.45), std::invalid_argument);

    auto other = small_basis_1d();
    RoughDriver d1 = driver_from_rough_path(basis, rp, 0.45);
    RoughDriver d2 = driver_from_rough_path(other, rp, 0.45);
    CHECK_THROWS_AS(driver_distance(d1, d2, 0.45, 1.0), std::invalid_argument);
}
