#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "roughmckv/brownian.hpp"
#include "roughmckv/measures.hpp"
#include "roughmckv/wasserstein.hpp"
#include "util.hpp"

using namespace rmkv;

namespace {

Eigen::VectorXd vec1(double a) { return Eigen::VectorXd::Constant(1, a); }

// Near-constant scalar field: a bump so wide that it reads as 1 on any box
// the particles can reach.
std::shared_ptr<const FieldBasis> wide_basis() {
    std::vector<Atom> atoms;
    atoms.push_back(Atom::bump(vec1(0.0), 500.0, vec1(1.0)));
    return std::make_shared<FieldBasis>(1, std::move(atoms));
}

// Near-identity scalar field on the same scale.
std::shared_ptr<const FieldBasis> identity_basis() {
    std::vector<Atom> atoms;
    atoms.push_back(Atom::affine(vec1(0.0), 500.0, vec1(1.0), vec1(1.0), 0.0));
    return std::make_shared<FieldBasis>(1, std::move(atoms));
}

TestFunction coordinate_probe() {
    TestFunction f;
    f.atoms.push_back(Atom::affine(vec1(0.0), 500.0, vec1(1.0), vec1(1.0), 0.0));
    f.coeffs = vec1(1.0);
    return f;
}

TestFunction unit_probe() {
    TestFunction f;
    f.atoms.push_back(Atom::affine(vec1(0.0), 500.0, vec1(1.0), vec1(0.0), 1.0));
    f.coeffs = vec1(1.0);
    return f;
}

// Small smooth common noise; the linear mean-field corpus contracts fast
// along it.
std::shared_ptr<const RoughPath> small_smooth_z(int level, double amp = 0.1,
                                                double drift = 0.02) {
    TimeGrid grid = TimeGrid::dyadic(1.0, level);
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        vals[i] = amp * std::sin(6.283185307179586 * grid[i]) + drift * grid[i];
    return std::make_shared<RoughPath>(lift_smooth_path(Path::scalar(grid, vals), 0.45));
}

// Drift reads the mean of the law, diffusion is off: the scalar equation
// dx = mean(mu_t) dZ whose flow of means is m_0 e^{Z_t}.
KernelFamily mean_field_kernels(std::shared_ptr<const FieldBasis> basis, double sigma = 0.0,
                                double drift = 1.0) {
    KernelFamily k;
    k.basis = std::move(basis);
    k.probes = {coordinate_probe()};
    k.sigma_maps = {Eigen::MatrixXd::Constant(1, 1, sigma)};
    k.beta_maps = {Eigen::MatrixXd::Constant(1, 1, drift)};
    return k;
}

}  // namespace

TEST_CASE("empirical measure marginals, means, and validation") {
    TimeGrid grid = TimeGrid::dyadic(1.0, 2);
    Eigen::MatrixXd va(grid.size(), 2), vb(grid.size(), 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        va.row(i) << grid[i], 1.0;
        vb.row(i) << -grid[i], 3.0;
    }
    EmpiricalPathMeasure em{{Path(grid, va), Path(grid, vb)}};
    em.validate();
    CHECK(em.particles() == 2);
    CHECK(em.marginal(2)(0, 0) == doctest::Approx(0.5));
    CHECK(em.marginal(2)(1, 0) == doctest::Approx(-0.5));
    CHECK(em.mean_at(2)(0) == doctest::Approx(0.0));
    CHECK(em.mean_at(2)(1) == doctest::Approx(2.0));
    // Peak rho-moment at the terminal time: sqrt(mean(2, 10)).
    CHECK(em.moment_peak(2.0) ==
          doctest::Approx(std::sqrt((2.0 + 10.0) / 2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(EmpiricalPathMeasure{}.validate(), std::invalid_argument);
    EmpiricalPathMeasure bad{{Path(grid, va), Path(TimeGrid::dyadic(1.0, 3),
                                                   Eigen::MatrixXd::Zero(9, 2))}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(em.moment_peak(0.5), std::invalid_argument);
}

TEST_CASE("rough path windows keep every in-window increment") {
    RoughPath rp = testutil::rough_vector_path(5, 2, 77);
    const std::size_t lo = 8, hi = 24;
    RoughPath win = restrict_rough_path(rp, lo, hi);
    CHECK(win.grid()[0] == 0.0);
    CHECK(win.grid().size() == hi - lo + 1);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < win.grid().size(); ++i)
        for (std::size_t j = i + 1; j < win.grid().size(); ++j) {
            worst = std::max(worst,
                             (win.z_inc(i, j) - rp.z_inc(lo + i, lo + j)).cwiseAbs().maxCoeff());
            worst = std::max(worst,
                             (win.zz(i, j) - rp.zz(lo + i, lo + j)).cwiseAbs().maxCoeff());
        }
    CHECK(worst <= 1e-13);

    // Tampered pairs inside the window survive the move.
    RoughPath broken = rp;
    broken.tamper_second_level(10, 20, Eigen::MatrixXd::Constant(2, 2, 0.3));
    RoughPath broken_win = restrict_rough_path(broken, lo, hi);
    CHECK((broken_win.zz(2, 12) - broken.zz(10, 20)).cwiseAbs().maxCoeff() <= 1e-13);

    CHECK_THROWS_AS(restrict_path(rp.z(), 5, 5), std::invalid_argument);
    CHECK_THROWS_AS(restrict_path(rp.z(), 8, 200), std::invalid_argument);
}

TEST_CASE("controlled moments carry values and transported derivatives") {
    // Two particles, three times, everything small enough to check by hand.
    auto z = small_smooth_z(1);
    auto basis = identity_basis();
    const TimeGrid& grid = z->grid();
    Eigen::MatrixXd va(3, 1), vb(3, 1);
    va << 0.2, 0.4, 0.1;
    vb << -0.3, 0.0, 0.5;
    ControlledMeasure cm;
    cm.measure.paths = {Path(grid, va), Path(grid, vb)};
    cm.basis = basis;
    cm.base = z;
    Eigen::MatrixXd gcoef(3, 1);
    gcoef << 1.0, 0.5, -0.25;
    cm.gamma = {Path(grid, gcoef)};

    const auto probes = std::vector<TestFunction>{coordinate_probe(), unit_probe()};
    const ControlledPath moments = controlled_moments(cm, probes);
    for (std::size_t i = 0; i < 3; ++i) {
        double want_v0 = 0.0, want_d0 = 0.0;
        for (const auto& p : cm.measure.paths) {
            const Eigen::VectorXd x = p.at(i);
            want_v0 += probes[0].value(x) / 2.0;
            want_d0 += probes[0].grad(x).dot(basis->field_value(gcoef.row(i).transpose(), x)) / 2.0;
        }
        CHECK(moments.value(i)(0, 0) == doctest::Approx(want_v0).epsilon(1e-14));
        CHECK(moments.derivative(i)(0, 0) == doctest::Approx(want_d0).epsilon(1e-14));
        // The unit probe has zero gradient up to the envelope tail.
        CHECK(std::abs(moments.derivative(i)(1, 0)) <= 1e-6);
    }
}

TEST_CASE("still measures have zero remainder and infinite decay") {
    auto z = small_smooth_z(5);
    Eigen::MatrixXd pos(3, 1);
    pos << 0.1, -0.4, 0.8;
    const ControlledMeasure cm = initial_measure(pos, identity_basis(), z);
    const auto norm = controlled_measure_norm(cm, {coordinate_probe()});
    CHECK(norm.probe_norms.size() == 1);
    CHECK(norm.value > 0.0);  // the moment itself is not zero
    CHECK(std::isinf(norm.remainder_exponents[0]));

    const MeasureGap self = controlled_measure_gap(cm, cm, {coordinate_probe()});
    CHECK(self.controlled == 0.0);
    CHECK(self.gubinelli == 0.0);
    CHECK(self.wasserstein == 0.0);
    CHECK_THROWS_AS(controlled_measure_norm(cm, {}), std::invalid_argument);
}

TEST_CASE("mean-field image of the exact law keeps the exponential mean") {
    auto z = small_smooth_z(8);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis);
    const TimeGrid& grid = z->grid();
    const std::size_t n = grid.size();

    // Input law: every particle already sits on m_0 e^{Z_t}.
    const double m0 = 1.0;
    Eigen::MatrixXd exact(n, 1);
    for (std::size_t i = 0; i < n; ++i) exact(i, 0) = m0 * std::exp(z->z_at(i)(0));
    ControlledMeasure cm;
    cm.measure.paths = {Path(grid, exact), Path(grid, exact)};
    cm.basis = basis;
    cm.base = z;
    cm.gamma = {Path(grid, exact)};  // beta(mu_t) has coefficient mean(mu_t)

    MeanFieldConfig cfg;
    cfg.alpha = 0.45;
    const ControlledMeasure image = mean_field_step(cm, k, z, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(image.measure.mean_at(i)(0) - exact(i, 0)));
    CHECK(worst <= 1e-4);

    // The image is controlled by the base with the advertised 2 alpha decay.
    const auto norm = controlled_measure_norm(image, k.probes);
    CHECK(norm.remainder_exponents[0] >= 2.0 * 0.45 - 0.1);
}

TEST_CASE("frozen-law step is particle-by-particle the plain solver") {
    auto z = small_smooth_z(8);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis, 0.2, 1.0);
    Eigen::MatrixXd pos(3, 1);
    pos << 0.9, 1.0, 1.2;
    const ControlledMeasure cm = initial_measure(pos, basis, z);

    MeanFieldConfig cfg;
    cfg.seed = 21;
    cfg.alpha = 0.40;
    const ControlledMeasure image = mean_field_step(cm, k, z, cfg);

    const ControlledPath moments = controlled_moments(cm, k.probes);
    for (std::size_t p = 0; p < 3; ++p) {
        const BrownianPath w = sample_brownian(1, z->grid(), cfg.seed, p);
        auto driver = std::make_shared<RoughDriver>(build_mixed_driver(k, moments, w, cfg.alpha));
        const RdeSolution sol = solve_davie(driver, pos.row(p).transpose(), z->grid());
        CHECK((sol.x.values() - image.measure.paths[p].values()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("relabeling particles relabels the image law") {
    auto z = small_smooth_z(8);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis, 0.2, 0.4);
    Eigen::MatrixXd pos(4, 1);
    pos << -0.2, 0.3, 0.8, 1.4;
    std::vector<BrownianPath> noise;
    for (std::size_t p = 0; p < 4; ++p)
        noise.push_back(sample_brownian(1, z->grid(), 5, 100 + p));

    MeanFieldConfig cfg;
    cfg.alpha = 0.40;
    cfg.noise = &noise;
    const ControlledMeasure a = mean_field_step(initial_measure(pos, basis, z), k, z, cfg);

    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Eigen::MatrixXd pos_p(4, 1);
    std::vector<BrownianPath> noise_p;
    for (std::size_t p = 0; p < 4; ++p) {
        pos_p(Eigen::Index(p), 0) = pos(Eigen::Index(perm[p]), 0);
        noise_p.push_back(noise[perm[p]]);
    }
    MeanFieldConfig cfg_p = cfg;
    cfg_p.noise = &noise_p;
    const ControlledMeasure b = mean_field_step(initial_measure(pos_p, basis, z), k, z, cfg_p);

    // Pairing initials with their streams makes relabeling a pure reshuffle,
    // up to the summation order inside the frozen law moments.
    const std::size_t last = z->grid().size() - 1;
    Eigen::VectorXd ma = a.measure.marginal(last).col(0);
    Eigen::VectorXd mb = b.measure.marginal(last).col(0);
    std::sort(ma.data(), ma.data() + ma.size());
    std::sort(mb.data(), mb.data() + mb.size());
    CHECK((ma - mb).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(a.measure.mean_at(last)(0) - b.measure.mean_at(last)(0)) <= 1e-12);

    // The same labeled input replayed is bitwise the same law.
    const ControlledMeasure again = mean_field_step(initial_measure(pos, basis, z), k, z, cfg);
    for (std::size_t p = 0; p < 4; ++p)
        CHECK((again.measure.paths[p].values() - a.measure.paths[p].values())
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("constant diffusion grows the variance like sigma squared t") {
    auto z = small_smooth_z(10);
    auto basis = wide_basis();
    KernelFamily k = mean_field_kernels(basis, 0.25, 0.0);
    k.probes = {unit_probe()};
    const std::size_t n_particles = 400;
    const ControlledMeasure cm =
        initial_measure(Eigen::MatrixXd::Zero(n_particles, 1), basis, z);

    MeanFieldConfig cfg;
    cfg.seed = 3;
    cfg.alpha = 0.40;
    const ControlledMeasure image = mean_field_step(cm, k, z, cfg);

    const std::size_t last = z->grid().size() - 1;
    const Eigen::VectorXd xs = image.measure.marginal(last).col(0);
    const double mean = xs.mean();
    const double var = (xs.array() - mean).square().sum() / double(n_particles - 1);
    const double want = 0.25 * 0.25;  // sigma^2 T with T = 1
    CHECK(std::abs(var - want) <= 4.0 * want * std::sqrt(2.0 / double(n_particles)));
    CHECK(std::abs(mean) <= 4.0 * 0.25 / std::sqrt(double(n_particles)));
}

TEST_CASE("fixed point of the linear mean-field corpus") {
    auto z = small_smooth_z(8, 0.03, 0.03);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis);
    const double m0 = 1.0;
    const ControlledMeasure start =
        initial_measure(Eigen::MatrixXd::Constant(8, 1, m0), basis, z);

    McKvConfig cfg;
    cfg.alpha = 0.45;
    cfg.tol = 1e-6;
    const McKvResult result = mckv_fixed_point(start, k, z, cfg);
    CHECK(result.converged);
    CHECK(result.iterations <= 5);
    CHECK(result.trace.back().controlled_gap <= cfg.tol);

    const TimeGrid& grid = z->grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        worst = std::max(worst, std::abs(result.fixed_point.measure.mean_at(i)(0) -
                                         m0 * std::exp(z->z_at(i)(0))));
    CHECK(worst <= 1e-3);
    CHECK(result.moment_budget > 0.0);
    CHECK(result.moment_peak > 0.0);
}

TEST_CASE("zero kernels leave the measure alone in one sweep") {
    auto z = small_smooth_z(5);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis, 0.0, 0.0);
    Eigen::MatrixXd pos(3, 1);
    pos << 0.4, -0.2, 1.1;
    const ControlledMeasure start = initial_measure(pos, basis, z);
    const McKvResult result = mckv_fixed_point(start, k, z, {});
    CHECK(result.converged);
    CHECK(result.iterations == 1);
    const std::size_t last = z->grid().size() - 1;
    CHECK((result.fixed_point.measure.marginal(last) - pos).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("time-windowed fixed point agrees with the global one") {
    auto z = small_smooth_z(8);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis);
    const ControlledMeasure start =
        initial_measure(Eigen::MatrixXd::Constant(4, 1, 1.0), basis, z);

    McKvConfig cfg;
    cfg.alpha = 0.45;
    cfg.tol = 1e-8;
    const McKvResult global = mckv_fixed_point(start, k, z, cfg);
    McKvConfig split = cfg;
    split.windows = 2;
    const McKvResult halves = mckv_fixed_point(start, k, z, split);
    CHECK(halves.converged);

    double worst = 0.0;
    for (std::size_t i = 0; i < z->grid().size(); ++i)
        worst = std::max(worst, std::abs(global.fixed_point.measure.mean_at(i)(0) -
                                         halves.fixed_point.measure.mean_at(i)(0)));
    CHECK(worst <= 1e-5);
}

TEST_CASE("exhausting the sweep budget reports failure honestly") {
    // A narrow probe makes the interaction strongly nonlinear; twelve sweeps
    // leave the gap far above tolerance and that must come back as a plain
    // non-converged result, not an endless loop or a silent success.
    TimeGrid grid = TimeGrid::dyadic(1.0, 11);
    std::vector<double> ramp(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) ramp[i] = grid[i];
    auto z = std::make_shared<RoughPath>(lift_smooth_path(Path::scalar(grid, ramp), 0.45));
    auto basis = wide_basis();
    KernelFamily k;
    k.basis = basis;
    TestFunction narrow;
    narrow.atoms.push_back(Atom::bump(vec1(0.0), 0.15, vec1(1.0)));
    narrow.coeffs = vec1(1.0);
    k.probes = {narrow};
    k.sigma_maps = {Eigen::MatrixXd::Zero(1, 1)};
    k.beta_maps = {Eigen::MatrixXd::Constant(1, 1, -5.0)};

    const ControlledMeasure start =
        initial_measure(Eigen::MatrixXd::Zero(2, 1), basis, z);
    McKvConfig cfg;
    cfg.alpha = 0.45;
    cfg.tol = 1e-9;
    cfg.max_iters = 12;
    const McKvResult result = mckv_fixed_point(start, k, z, cfg);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations == 12);
    CHECK(result.trace.size() == 12);
    CHECK(result.trace.back().controlled_gap > cfg.tol);
    CHECK(result.trace.back().controlled_gap < result.trace.front().controlled_gap);
}

TEST_CASE("gap separates a shifted copy of the law") {
    auto z = small_smooth_z(5);
    auto basis = identity_basis();
    Eigen::MatrixXd pos(2, 1);
    pos << 0.0, 1.0;
    const ControlledMeasure a = initial_measure(pos, basis, z);
    const ControlledMeasure b = initial_measure(Eigen::MatrixXd(pos.array() + 0.5), basis, z);
    const MeasureGap gap = controlled_measure_gap(a, b, {coordinate_probe()});
    CHECK(gap.controlled > 0.0);
    CHECK(gap.wasserstein == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("controlled norm flags a wrong derivative field") {
    // Law carried by e^{Z} for a genuinely rough Z: with the identity field
    // as derivative the remainder decays at twice the reference regularity,
    // with a zeroed one it only sees the first-order decay.
    auto z = std::make_shared<RoughPath>(testutil::rough_scalar_path(10, 99));
    const TimeGrid& grid = z->grid();
    const std::size_t n = grid.size();
    Eigen::MatrixXd vals(n, 1), coef(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        vals(i, 0) = std::exp(z->z_at(i)(0));
        coef(i, 0) = 1.0;
    }
    ControlledMeasure cm;
    cm.measure.paths = {Path(grid, vals)};
    cm.basis = identity_basis();
    cm.base = z;
    cm.gamma = {Path(grid, coef)};

    const auto good = controlled_measure_norm(cm, {coordinate_probe()});
    CHECK(good.remainder_exponents[0] >= 0.7);

    cm.gamma = {Path(grid, Eigen::MatrixXd::Zero(Eigen::Index(n), 1))};
    const auto bad = controlled_measure_norm(cm, {coordinate_probe()});
    CHECK(bad.remainder_exponents[0] <= 0.6);
}

TEST_CASE("probe dictionaries are normalized and reproducible") {
    const auto probes = default_probe_dictionary(2, 8, 13);
    const auto again = default_probe_dictionary(2, 8, 13);
    CHECK(probes.size() == 8);
    for (std::size_t j = 0; j < probes.size(); ++j) {
        CHECK(probes[j].coeffs(0) == again[j].coeffs(0));
        CHECK(probes[j].atoms[0].center == again[j].atoms[0].center);
        // Scanned size one, up to lattice coarseness.
        double best = 0.0;
        for (double x = -4.0; x <= 4.0; x += 0.05)
            for (double y = -4.0; y <= 4.0; y += 0.4) {
                Eigen::VectorXd p(2);
                p << x, y;
                best = std::max({best, std::abs(probes[j].value(p)), probes[j].grad(p).norm(),
                                 probes[j].hess(p).norm()});
            }
        CHECK(best <= 1.05);
        CHECK(best >= 0.5);
    }
    CHECK_THROWS_AS(default_probe_dictionary(0, 8), std::invalid_argument);
    CHECK_THROWS_AS(default_probe_dictionary(1, 0), std::invalid_argument);
}

TEST_CASE("mean-field input validation") {
    auto z = small_smooth_z(4);
    auto basis = wide_basis();
    const KernelFamily k = mean_field_kernels(basis, 0.2, 0.5);
    const ControlledMeasure cm = initial_measure(Eigen::MatrixXd::Zero(2, 1), basis, z);

    CHECK_THROWS_AS(mean_field_step(cm, k, nullptr, {}), std::invalid_argument);
    CHECK_THROWS_AS(mean_field_step(cm, k, small_smooth_z(5), {}), std::invalid_argument);

    KernelFamily other = k;
    other.basis = wide_basis();  // equal content, different object
    CHECK_THROWS_AS(mean_field_step(cm, other, z, {}), std::invalid_argument);

    std::vector<BrownianPath> skimpy = {sample_brownian(1, z->grid(), 1, 0)};
    MeanFieldConfig cfg;
    cfg.noise = &skimpy;
    CHECK_THROWS_AS(mean_field_step(cm, k, z, cfg), std::invalid_argument);

    McKvConfig bad;
    bad.windows = 0;
    CHECK_THROWS_AS(mckv_fixed_point(cm, k, z, bad), std::invalid_argument);
    CHECK(k.drift_lipschitz() > 0.0);
}
