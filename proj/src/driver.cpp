#include "roughmckv/driver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rmkv {

namespace {

// Index pairs (i, i + 2^k) for every k, the usual scan set for Holder-type
// constants on a grid. Optionally capped per level by striding.
std::vector<std::pair<std::size_t, std::size_t>> dyadic_pairs(std::size_t n,
                                                              std::size_t max_per_level) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t gap = 1; gap < n; gap *= 2) {
        std::size_t count = n - gap;
        std::size_t stride = 1;
        if (max_per_level > 0 && count > max_per_level) {
            stride = (count + max_per_level - 1) / max_per_level;
        }
        for (std::size_t i = 0; i + gap < n; i += stride) {
            out.emplace_back(i, i + gap);
        }
    }
    return out;
}

}  // namespace

RoughDriver::RoughDriver(std::shared_ptr<const FieldBasis> basis, RoughPath coeff, double alpha)
    : basis_(std::move(basis)), coeff_(std::move(coeff)), alpha_(alpha) {
    if (!basis_) {
        throw std::invalid_argument("RoughDriver: basis is null");
    }
    if (coeff_.dim() != static_cast<int>(basis_->size())) {
        throw std::invalid_argument("RoughDriver: coefficient dimension must equal basis size");
    }
    if (!(alpha_ > 1.0 / 3.0) || !(alpha_ <= 0.5)) {
        throw std::invalid_argument("RoughDriver: alpha must lie in (1/3, 1/2]");
    }
    const TimeGrid& g = coeff_.grid();
    for (const auto& [i, j] : dyadic_pairs(g.size(), 0)) {
        double span = g[j] - g[i];
        double f = basis_->field_cb_bound(coeff_.z_inc(i, j), 3);
        double ff = basis_->pair_field_cb_bound(coeff_.zz(i, j), 2);
        k_first_ = std::max(k_first_, f / std::pow(span, alpha_));
        k_second_ = std::max(k_second_, ff / std::pow(span, 2.0 * alpha_));
    }
}

SmoothField RoughDriver::first_level(std::size_t i, std::size_t j) const {
    return SmoothField{basis_, coeff_.z_inc(i, j)};
}

TwoPointField RoughDriver::second_level(std::size_t i, std::size_t j) const {
    return TwoPointField{basis_, coeff_.zz(i, j)};
}

Eigen::VectorXd RoughDriver::f_apply(std::size_t i, std::size_t j,
                                     const Eigen::VectorXd& x) const {
    return basis_->field_value(coeff_.z_inc(i, j), x);
}

Eigen::VectorXd RoughDriver::ff_apply(std::size_t i, std::size_t j, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y) const {
    return TwoPointField{basis_, coeff_.zz(i, j)}.value(x, y);
}

double RoughDriver::step_weight(std::size_t i, std::size_t j) const {
    double pp = p();
    double f = basis_->field_cb_bound(coeff_.z_inc(i, j), 3);
    double ff = basis_->pair_field_cb_bound(coeff_.zz(i, j), 2);
    return std::pow(std::pow(f, pp) + std::pow(ff, pp / 2.0), 1.0 / pp);
}

ControlFn RoughDriver::control() const {
    double pp = p();
    double rate = std::pow(k_first_, pp) + std::pow(k_second_, pp / 2.0);
    return ControlFn::explicit_fn([rate](double s, double t) { return rate * (t - s); });
}

RoughDriver driver_from_rough_path(std::shared_ptr<const FieldBasis> basis, RoughPath coeff,
                                   double alpha) {
    return RoughDriver(std::move(basis), std::move(coeff), alpha);
}

RoughDriver driver_from_quadrature(std::shared_ptr<const FieldBasis> basis, const Path& family,
                                   double alpha) {
    if (!basis) {
        throw std::invalid_argument("driver_from_quadrature: basis is null");
    }
    if (family.dim() != static_cast<int>(basis->size())) {
        throw std::invalid_argument("driver_from_quadrature: family dimension must equal basis size");
    }
    const TimeGrid& g = family.grid();
    std::size_t n = g.size();
    int k = family.dim();

    // Coefficient path c(t) = int_0^t g(r) dr with g piecewise linear: on a
    // segment of length h, c(t_i + u) - c(t_i) = a u + b u^2 with a = g_i and
    // b = (g_{i+1} - g_i) / (2h), so both levels integrate in closed form:
    //     int_0^h (a u + b u^2) (x) (a + 2 b u) du
    //       = h^2/2 a(x)a + 2h^3/3 a(x)b + h^3/3 b(x)a + h^4/2 b(x)b.
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, k);
    std::vector<Eigen::MatrixXd> anchors(n, Eigen::MatrixXd::Zero(k, k));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double h = g[i + 1] - g[i];
        Eigen::VectorXd a = family.at(i);
        Eigen::VectorXd b = family.increment(i, i + 1) / (2.0 * h);
        Eigen::VectorXd dc = a * h + b * h * h;
        Eigen::MatrixXd seg = (h * h / 2.0) * a * a.transpose() +
                              (2.0 * h * h * h / 3.0) * a * b.transpose() +
                              (h * h * h / 3.0) * b * a.transpose() +
                              (h * h * h * h / 2.0) * b * b.transpose();
        values.row(i + 1) = values.row(i) + dc.transpose();
        anchors[i + 1] = anchors[i] + values.row(i).transpose() * dc.transpose() + seg;
    }
    return RoughDriver(std::move(basis), RoughPath(Path(g, values), std::move(anchors), alpha),
                       alpha);
}

DefectReport driver_chen_defect(const RoughDriver& d, int samples_per_scale, unsigned seed) {
    const TimeGrid& g = d.grid();
    const FieldBasis& basis = d.basis();
    std::size_t n = g.size();
    if (n < 3) {
        throw std::invalid_argument("driver_chen_defect: grid too short for triples");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> probe_pick(0,
        static_cast<std::size_t>(basis.probes().rows()) - 1);

    std::vector<double> scales;
    std::vector<double> max_defect;
    std::vector<std::size_t> counts;
    for (std::size_t gap = 2; gap < n; gap *= 2) {
        double worst = 0.0;
        std::size_t count = 0;
        double span_rep = 0.0;
        std::uniform_int_distribution<std::size_t> base_pick(0, n - 1 - gap);
        std::uniform_int_distribution<std::size_t> mid_pick(1, gap - 1);
        for (int s = 0; s < samples_per_scale; ++s) {
            std::size_t i = base_pick(rng);
            std::size_t u = i + mid_pick(rng);
            std::size_t j = i + gap;
            Eigen::VectorXd x = basis.probes().row(probe_pick(rng)).transpose();
            Eigen::VectorXd y = basis.probes().row(probe_pick(rng)).transpose();
            Eigen::VectorXd lhs = d.ff_apply(i, j, x, y) - d.ff_apply(i, u, x, y) -
                                  d.ff_apply(u, j, x, y);
            Eigen::VectorXd fsu = d.f_apply(i, u, x);
            Eigen::VectorXd fut_grad =
                basis.field_jacobian(d.coeff().z_inc(u, j), y) * fsu;
            worst = std::max(worst, (lhs - fut_grad).norm());
            span_rep = std::max(span_rep, g[j] - g[i]);
            ++count;
        }
        scales.push_back(span_rep);
        max_defect.push_back(worst);
        counts.push_back(count);
    }
    // dyadic gaps grow, so flip into the decreasing-scale convention.
    std::reverse(scales.begin(), scales.end());
    std::reverse(max_defect.begin(), max_defect.end());
    std::reverse(counts.begin(), counts.end());
    DefectReport report;
    report.scales = std::move(scales);
    report.max_defect = std::move(max_defect);
    report.counts = std::move(counts);
    return report;
}

DriverDistanceReport driver_distance(const RoughDriver& a, const RoughDriver& b, double alpha,
                                     double h) {
    if (a.basis_ptr() != b.basis_ptr()) {
        throw std::invalid_argument("driver_distance: drivers must share one basis object");
    }
    if (!(a.grid() == b.grid())) {
        throw std::invalid_argument("driver_distance: drivers must share one grid");
    }
    const FieldBasis& basis = a.basis();
    const TimeGrid& g = a.grid();
    DriverDistanceReport r;
    for (const auto& [i, j] : dyadic_pairs(g.size(), 48)) {
        double span = g[j] - g[i];
        if (span > h) {
            continue;
        }
        Eigen::VectorXd dc = a.coeff().z_inc(i, j) - b.coeff().z_inc(i, j);
        Eigen::MatrixXd dzz = a.coeff().zz(i, j) - b.coeff().zz(i, j);
        r.first_term = std::max(r.first_term,
                                basis.field_cb(dc, 3) / std::pow(span, alpha));
        r.second_term = std::max(r.second_term,
                                 basis.pair_field_cb(dzz, 2) / std::pow(span, 2.0 * alpha));
    }
    r.total = r.first_term + std::sqrt(r.second_term);
    return r;
}

}  // namespace rmkv
