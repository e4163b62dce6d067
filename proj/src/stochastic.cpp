#include "roughmckv/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rmkv {

namespace {

// Coefficient step of the frozen diffusion: profile * sum_b sigma_b(moments)
// times the Brownian increment of direction b.
Eigen::VectorXd sigma_step(const KernelFamily& k, const Eigen::VectorXd& m,
                           double profile, const Eigen::VectorXd& dw) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index(k.basis->size()));
    for (int b = 0; b < k.brownian_dim(); ++b)
        out += (k.sigma_maps[std::size_t(b)] * m) * dw(b);
    return profile * out;
}

// Shared body of the kernel Lipschitz bounds: probe gradients cap how much a
// moment can move per unit of transport cost, the maps and atom sups cap how
// that moves the field.
double kernel_lipschitz(const KernelFamily& k, const std::vector<Eigen::MatrixXd>& maps) {
    k.validate();
    std::vector<double> lip(k.probes.size(), 0.0);
    const Eigen::MatrixXd& pts = k.basis->probes();
    for (std::size_t j = 0; j < k.probes.size(); ++j)
        for (Eigen::Index r = 0; r < pts.rows(); ++r)
            lip[j] = std::max(lip[j], k.probes[j].grad(pts.row(r).transpose()).norm());

    const double profile_sup = k.profile ? k.profile->values().cwiseAbs().maxCoeff() : 1.0;
    double best = 0.0;
    for (const Eigen::MatrixXd& map : maps) {
        double bound = 0.0;
        for (Eigen::Index kk = 0; kk < map.rows(); ++kk)
            for (Eigen::Index j = 0; j < map.cols(); ++j)
                bound += std::abs(map(kk, j)) * lip[std::size_t(j)] *
                         k.basis->atom_cb(std::size_t(kk), 0);
        best = std::max(best, bound);
    }
    return profile_sup * best;
}

// Least-squares line through (x, y); slope 0 and r^2 = 1 when y is constant.
void fit_line(const std::vector<double>& x, const std::vector<double>& y,
              double& slope, double& r_squared) {
    slope = 0.0;
    r_squared = 1.0;
    const std::size_t n = x.size();
    if (n < 2) return;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return;
    slope = sxy / sxx;
    r_squared = (sxy * sxy) / (sxx * syy);
}

// Greedy step count of one driver under its p-variation control, evaluated
// on a subsampled grid.  Mirrors the continuous greedy sequence: a step is
// counted for every threshold crossing strictly before the final time.
int greedy_step_count(const RoughDriver& d, double beta, std::size_t max_grid) {
    const std::size_t n = d.grid().size();
    std::size_t stride = 1;
    while ((n - 1 + stride - 1) / stride + 1 > max_grid) stride *= 2;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i + 1 < n; i += stride) idx.push_back(i);
    idx.push_back(n - 1);
    const std::size_t m = idx.size();

    const double p = d.p();
    Eigen::MatrixXd fpow = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
    Eigen::MatrixXd ffpow = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t v = u + 1; v < m; ++v) {
            const double f = d.basis().field_cb_bound(d.coeff().z_inc(idx[u], idx[v]), 3);
            const double ff = d.basis().pair_field_cb_bound(d.coeff().zz(idx[u], idx[v]), 2);
            fpow(Eigen::Index(u), Eigen::Index(v)) = std::pow(f, p);
            ffpow(Eigen::Index(u), Eigen::Index(v)) = std::pow(ff, p / 2.0);
        }
    }

    // Both p-variation values are maximised over partitions by an anchored
    // incremental pass, so extending the window costs one extra sweep.
    std::vector<double> vf(m, 0.0), vff(m, 0.0);
    int count = 0;
    std::size_t u = 0;
    while (u + 1 < m) {
        vf[u] = 0.0;
        vff[u] = 0.0;
        std::size_t crossing = m;
        for (std::size_t v = u + 1; v < m; ++v) {
            double bf = 0.0, bff = 0.0;
            for (std::size_t k = u; k < v; ++k) {
                bf = std::max(bf, vf[k] + fpow(Eigen::Index(k), Eigen::Index(v)));
                bff = std::max(bff, vff[k] + ffpow(Eigen::Index(k), Eigen::Index(v)));
            }
            vf[v] = bf;
            vff[v] = bff;
            if (bf + bff >= beta) {
                crossing = v;
                break;
            }
        }
        if (crossing >= m - 1) break;
        ++count;
        u = crossing;
    }
    return count;
}

}  // namespace

Eigen::VectorXd KernelFamily::moments(const Eigen::MatrixXd& positions) const {
    if (positions.rows() == 0)
        throw std::invalid_argument("kernel moments need at least one particle");
    if (positions.cols() != basis->dim())
        throw std::invalid_argument("particle dimension must match the field basis");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index(probes.size()));
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        const Eigen::VectorXd x = positions.row(i).transpose();
        for (std::size_t j = 0; j < probes.size(); ++j)
            out(Eigen::Index(j)) += probes[j].value(x);
    }
    return out / double(positions.rows());
}

double KernelFamily::profile_at(std::size_t grid_index) const {
    if (!profile) return 1.0;
    return profile->values()(Eigen::Index(grid_index), 0);
}

double KernelFamily::sigma_lipschitz() const { return kernel_lipschitz(*this, sigma_maps); }

double KernelFamily::drift_lipschitz() const { return kernel_lipschitz(*this, beta_maps); }

void KernelFamily::validate() const {
    if (!basis) throw std::invalid_argument("kernel family needs a field basis");
    if (probes.empty()) throw std::invalid_argument("kernel family needs measure probes");
    const Eigen::Index k = Eigen::Index(basis->size());
    const Eigen::Index j = Eigen::Index(probes.size());
    for (const Eigen::MatrixXd& map : sigma_maps)
        if (map.rows() != k || map.cols() != j)
            throw std::invalid_argument("diffusion kernel maps must be atoms by probes");
    for (const Eigen::MatrixXd& map : beta_maps)
        if (map.rows() != k || map.cols() != j)
            throw std::invalid_argument("drift kernel maps must be atoms by probes");
    if (profile && profile->dim() != 1)
        throw std::invalid_argument("kernel time profile must be scalar");
}

RoughPath build_w_sigma(const KernelFamily& kernels, const Path& moments,
                        const BrownianPath& w, double alpha) {
    kernels.validate();
    if (!(moments.grid() == w.grid()))
        throw std::invalid_argument("stochastic driver inputs must share one grid");
    if (kernels.profile && !(kernels.profile->grid() == w.grid()))
        throw std::invalid_argument("kernel time profile must live on the driver grid");
    if (moments.dim() != int(kernels.probes.size()))
        throw std::invalid_argument("moment path dimension must match the probe count");
    if (w.dim() != kernels.brownian_dim())
        throw std::invalid_argument("diffusion kernel count must match the Brownian dimension");

    const std::size_t n = w.grid().size();
    const Eigen::Index k = Eigen::Index(kernels.basis->size());
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(Eigen::Index(n), k);
    std::vector<Eigen::MatrixXd> anchors(n, Eigen::MatrixXd::Zero(k, k));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd dc =
            sigma_step(kernels, moments.at(i), kernels.profile_at(i),
                       w.values.increment(i, i + 1));
        values.row(Eigen::Index(i) + 1) = values.row(Eigen::Index(i)) + dc.transpose();
        anchors[i + 1] = anchors[i] +
                         values.row(Eigen::Index(i)).transpose() * dc.transpose();
    }
    return RoughPath(Path(w.grid(), std::move(values)), std::move(anchors), alpha);
}

ControlledPath beta_coefficient_path(const KernelFamily& kernels,
                                     const ControlledPath& moments) {
    kernels.validate();
    if (moments.cols() != 1 || moments.rows() != Eigen::Index(kernels.probes.size()))
        throw std::invalid_argument("controlled moments must hold one column per probe set");
    const Eigen::Index m = moments.base().dim();
    if (int(m) != kernels.rough_dim())
        throw std::invalid_argument("drift kernel count must match the rough dimension");
    if (kernels.profile && !(kernels.profile->grid() == moments.grid()))
        throw std::invalid_argument("kernel time profile must live on the driver grid");

    const std::size_t n = moments.grid().size();
    const Eigen::Index k = Eigen::Index(kernels.basis->size());
    std::vector<Eigen::MatrixXd> values(n), derivs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double profile = kernels.profile_at(i);
        const Eigen::VectorXd mval = moments.value(i).col(0);
        const Eigen::MatrixXd& mder = moments.derivative(i);
        values[i].resize(k, m);
        derivs[i].resize(k, m * m);
        for (Eigen::Index a = 0; a < m; ++a) {
            const Eigen::MatrixXd& map = kernels.beta_maps[std::size_t(a)];
            values[i].col(a) = profile * (map * mval);
            for (Eigen::Index c = 0; c < m; ++c)
                derivs[i].col(a * m + c) = profile * (map * mder.col(c));
        }
    }
    return ControlledPath(moments.base_ptr(), std::move(values), std::move(derivs));
}

RoughPath build_z_beta(const ControlledPath& beta_coeffs) {
    return integral_lift(beta_coeffs, Eigen::VectorXd::Zero(beta_coeffs.rows()));
}

RoughDriver build_mixed_driver(const KernelFamily& kernels,
                               const ControlledPath& moments,
                               const BrownianPath& w, double alpha) {
    const ControlledPath beta = beta_coefficient_path(kernels, moments);
    if (!(moments.grid() == w.grid()))
        throw std::invalid_argument("stochastic driver inputs must share one grid");
    if (w.dim() != kernels.brownian_dim())
        throw std::invalid_argument("diffusion kernel count must match the Brownian dimension");

    const RoughPath& z = moments.base();
    const Eigen::Index m = z.dim();
    const std::size_t n = z.grid().size();
    const Eigen::Index k = Eigen::Index(kernels.basis->size());

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(Eigen::Index(n), k);
    std::vector<Eigen::MatrixXd> anchors(n, Eigen::MatrixXd::Zero(k, k));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd dz = z.z_inc(i, i + 1);
        const Eigen::MatrixXd zz = z.zz(i, i + 1);
        const Eigen::MatrixXd& bval = beta.value(i);
        const Eigen::MatrixXd& bder = beta.derivative(i);

        Eigen::VectorXd contracted = Eigen::VectorXd::Zero(k);
        for (Eigen::Index a = 0; a < m; ++a)
            contracted += bder.middleCols(a * m, m) * zz.col(a);
        const Eigen::VectorXd dcz = bval * dz + contracted;
        const Eigen::VectorXd dcw =
            sigma_step(kernels, moments.value(i).col(0), kernels.profile_at(i),
                       w.values.increment(i, i + 1));
        const Eigen::VectorXd dc = dcw + dcz;

        // Rough block of the step exactly as in the pure lift, then the
        // Brownian-rough cross block; the remaining iterated blocks are
        // left-point sums over a single step and vanish.
        const Eigen::MatrixXd dev = zz - 0.5 * dz * dz.transpose();
        const Eigen::MatrixXd step =
            0.5 * dcz * dcz.transpose() + bval * dev * bval.transpose() +
            dcw * dcz.transpose();

        values.row(Eigen::Index(i) + 1) = values.row(Eigen::Index(i)) + dc.transpose();
        anchors[i + 1] = anchors[i] +
                         values.row(Eigen::Index(i)).transpose() * dc.transpose() + step;
    }

    return RoughDriver(kernels.basis,
                       RoughPath(Path(z.grid(), std::move(values)), std::move(anchors), alpha),
                       alpha);
}

AccumulationStats accumulation_statistics(const std::vector<RoughDriver>& samples,
                                          double beta, std::size_t max_grid) {
    if (samples.size() < 100)
        throw std::invalid_argument("accumulation statistics need at least 100 driver samples");
    if (beta <= 0.0)
        throw std::invalid_argument("accumulation threshold must be positive");
    max_grid = std::max<std::size_t>(max_grid, 3);

    AccumulationStats out;
    out.step_counts.reserve(samples.size());
    for (const RoughDriver& d : samples)
        out.step_counts.push_back(greedy_step_count(d, beta, max_grid));

    const int top = *std::max_element(out.step_counts.begin(), out.step_counts.end());
    out.histogram.assign(std::size_t(top) + 1, 0);
    for (int c : out.step_counts) out.histogram[std::size_t(c)]++;

    // Tail fit of log P(N > r) against r^2; one point per level with mass.
    const double total = double(out.step_counts.size());
    std::vector<double> xs, ys;
    double running = total;
    for (int r = 0; r <= top; ++r) {
        running -= double(out.histogram[std::size_t(r)]);
        if (running <= 0.0) break;
        xs.push_back(double(r) * double(r));
        ys.push_back(std::log(running / total));
    }
    fit_line(xs, ys, out.tail_slope, out.tail_r_squared);

    double sum_exp = 0.0;
    for (int c : out.step_counts) sum_exp += std::exp(double(c));
    out.mean_exp = sum_exp / total;
    return out;
}

}  // namespace rmkv
