#include "roughmckv/rde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "roughmckv/norms.hpp"

namespace rmkv {

namespace {

// Requested grid points located in the driver grid; every point must land on
// a driver point exactly (up to float slop).
std::vector<std::size_t> map_to_driver(const TimeGrid& solve, const TimeGrid& drv) {
    std::vector<std::size_t> idx(solve.size());
    const double slop = 1e-9 * std::max(1.0, drv.horizon());
    for (std::size_t k = 0; k < solve.size(); ++k) {
        std::size_t i = drv.index_at(solve[k]);
        if (std::abs(drv[i] - solve[k]) > slop) {
            if (i + 1 < drv.size() && std::abs(drv[i + 1] - solve[k]) <= slop) {
                ++i;
            } else {
                throw std::invalid_argument(
                    "solve grid must be subordinate to the driver grid");
            }
        }
        idx[k] = i;
    }
    for (std::size_t k = 0; k + 1 < idx.size(); ++k)
        if (idx[k] >= idx[k + 1])
            throw std::invalid_argument("solve grid must be subordinate to the driver grid");
    return idx;
}

void admit_range(const RoughDriver& d, std::size_t i, std::size_t j, double c,
                 std::vector<std::size_t>& out) {
    if (c * d.step_weight(i, j) <= 0.5) {
        out.push_back(j);
        return;
    }
    if (j - i == 1) {
        throw std::runtime_error("driver too rough for grid budget");
    }
    std::size_t m = i + (j - i) / 2;
    admit_range(d, i, m, c, out);
    admit_range(d, m, j, c, out);
}

// Admitted driver-index sequence covering consecutive requested points.
std::vector<std::size_t> admit_steps(const RoughDriver& d, const std::vector<std::size_t>& req,
                                     double c) {
    std::vector<std::size_t> out;
    out.push_back(req.front());
    for (std::size_t k = 0; k + 1 < req.size(); ++k) admit_range(d, req[k], req[k + 1], c, out);
    return out;
}

// Davie recursion along admitted steps; rows of the result are the states at
// the requested indices (a subset of the admitted ones).
Eigen::MatrixXd run_steps(const RoughDriver& d, const Eigen::VectorXd& xi,
                          const std::vector<std::size_t>& admitted,
                          const std::vector<std::size_t>& req) {
    Eigen::MatrixXd out(req.size(), xi.size());
    Eigen::VectorXd x = xi;
    std::size_t r = 0;
    if (req[r] == admitted.front()) out.row(r++) = x.transpose();
    for (std::size_t k = 0; k + 1 < admitted.size(); ++k) {
        std::size_t i = admitted[k], j = admitted[k + 1];
        x += d.f_apply(i, j, x) + d.ff_diag(i, j, x);
        if (r < req.size() && req[r] == j) out.row(r++) = x.transpose();
    }
    if (r != req.size()) throw std::logic_error("admitted steps missed a requested point");
    return out;
}

// Max over dyadic-gap grid pairs per scale bucket.
DefectReport scan_two_param(const TwoParamIncrement& g) {
    const TimeGrid& grid = g.grid();
    std::size_t n = grid.size();
    int levels = std::max(
        3, std::min(9, static_cast<int>(std::floor(std::log2(static_cast<double>(n - 1))))));
    DefectReport rep;
    rep.scales = dyadic_scales(grid.horizon(), levels);
    rep.max_defect.assign(rep.scales.size(), 0.0);
    rep.counts.assign(rep.scales.size(), 0);
    for (std::size_t gap = 1; gap < n; gap *= 2) {
        for (std::size_t i = 0; i + gap < n; ++i) {
            double span = grid[i + gap] - grid[i];
            std::size_t b = scale_bucket(rep.scales, span);
            if (b == static_cast<std::size_t>(-1)) continue;
            rep.max_defect[b] = std::max(rep.max_defect[b], g.at(i, i + gap).norm());
            ++rep.counts[b];
        }
    }
    return rep;
}

RdeSolution assemble(std::shared_ptr<const RoughDriver> d, Path x,
                     std::vector<std::size_t> req_idx, GreedyPartition cert,
                     std::size_t internal_steps, double richardson_gap) {
    auto dp = d;
    auto idx = req_idx;
    Path xp = x;
    TwoParamIncrement::Evaluator sharp_eval = [dp, idx, xp](std::size_t i, std::size_t j) {
        Eigen::VectorXd v = xp.increment(i, j) - dp->f_apply(idx[i], idx[j], xp.at(i));
        return Eigen::MatrixXd(v);
    };
    TwoParamIncrement::Evaluator nat_eval = [dp, idx, xp](std::size_t i, std::size_t j) {
        Eigen::VectorXd v = xp.increment(i, j) - dp->f_apply(idx[i], idx[j], xp.at(i)) -
                            dp->ff_diag(idx[i], idx[j], xp.at(i));
        return Eigen::MatrixXd(v);
    };
    RdeSolution sol{
        std::move(x),
        TwoParamIncrement(xp.grid(), xp.dim(), 1, std::move(sharp_eval)),
        TwoParamIncrement(xp.grid(), xp.dim(), 1, std::move(nat_eval)),
        std::move(d),
        std::move(req_idx),
        std::move(cert),
        internal_steps,
        richardson_gap};
    return sol;
}

// The admission certificate: greedy step count of the driver's control at
// the beta for which admission_c * beta^{1/p} = 1/2.
GreedyPartition certificate(const RoughDriver& d, double horizon, double c) {
    double beta = std::pow(0.5 / c, d.p());
    return greedy_partition(d.control(), beta, 0.0, horizon);
}

double doubled_step_gap(const RoughDriver& d, const Eigen::VectorXd& xi,
                        const std::vector<std::size_t>& req, const Eigen::MatrixXd& fine,
                        double c) {
    if (req.size() < 3) return 0.0;
    std::vector<std::size_t> coarse;
    for (std::size_t k = 0; k < req.size(); k += 2) coarse.push_back(req[k]);
    if (coarse.back() != req.back()) coarse.push_back(req.back());
    std::vector<std::size_t> admitted = admit_steps(d, coarse, c);
    Eigen::MatrixXd xc = run_steps(d, xi, admitted, coarse);
    double gap = 0.0;
    std::size_t r = 0;
    for (std::size_t k = 0; k < req.size(); ++k) {
        if (req[k] != coarse[r]) continue;
        gap = std::max(gap, (fine.row(k) - xc.row(r)).norm());
        ++r;
    }
    return gap;
}

}  // namespace

DefectReport RdeSolution::sharp_report() const { return scan_two_param(sharp); }

DefectReport RdeSolution::natural_report() const { return scan_two_param(natural); }

RdeSolution solve_davie(std::shared_ptr<const RoughDriver> d, const Eigen::VectorXd& xi,
                        const TimeGrid& grid, const DavieConfig& cfg) {
    if (!d) throw std::invalid_argument("solve_davie: driver is null");
    if (xi.size() != d->basis().dim())
        throw std::invalid_argument("solve_davie: initial state dimension must match the basis");
    std::vector<std::size_t> req = map_to_driver(grid, d->grid());
    std::vector<std::size_t> admitted = admit_steps(*d, req, cfg.admission_c);
    Eigen::MatrixXd values = run_steps(*d, xi, admitted, req);
    double rich = cfg.richardson ? doubled_step_gap(*d, xi, req, values, cfg.admission_c) : 0.0;
    GreedyPartition cert = certificate(*d, grid.horizon(), cfg.admission_c);
    return assemble(std::move(d), Path(grid, std::move(values)), std::move(req),
                    std::move(cert), admitted.size() - 1, rich);
}

PicardResult solve_picard(std::shared_ptr<const RoughDriver> d, const Eigen::VectorXd& xi,
                          const TimeGrid& grid, int max_iters, double tol,
                          const DavieConfig& cfg) {
    if (!d) throw std::invalid_argument("solve_picard: driver is null");
    if (xi.size() != d->basis().dim())
        throw std::invalid_argument("solve_picard: initial state dimension must match the basis");
    if (max_iters < 1) throw std::invalid_argument("solve_picard: max_iters must be positive");
    std::vector<std::size_t> req = map_to_driver(grid, d->grid());
    std::vector<std::size_t> admitted = admit_steps(*d, req, cfg.admission_c);
    std::size_t m = admitted.size();
    int dim = static_cast<int>(xi.size());

    // x^0 = xi everywhere; x^1 is the one-germ expansion xi + F_{0t}(xi).
    Eigen::MatrixXd prev = xi.transpose().replicate(m, 1);
    Eigen::MatrixXd curr(m, dim);
    curr.row(0) = xi.transpose();
    for (std::size_t k = 1; k < m; ++k)
        curr.row(k) = (xi + d->f_apply(admitted[0], admitted[k], xi)).transpose();

    std::vector<double> gaps;
    gaps.push_back((curr - prev).rowwise().norm().maxCoeff());
    std::size_t iterations = 1;
    while (gaps.back() > tol) {
        if (static_cast<int>(iterations) >= max_iters) {
            std::ostringstream os;
            os << "picard iteration did not reach tol " << tol << " in " << max_iters
               << " iterations; gaps:";
            for (double g : gaps) os << " " << g;
            throw std::runtime_error(os.str());
        }
        Eigen::MatrixXd next(m, dim);
        next.row(0) = xi.transpose();
        for (std::size_t k = 0; k + 1 < m; ++k) {
            std::size_t i = admitted[k], j = admitted[k + 1];
            Eigen::VectorXd xc = curr.row(k).transpose();
            Eigen::VectorXd xp = prev.row(k).transpose();
            next.row(k + 1) = next.row(k) + d->f_apply(i, j, xc).transpose() +
                              d->ff_apply(i, j, xc, xp).transpose();
        }
        gaps.push_back((next - curr).rowwise().norm().maxCoeff());
        prev = std::move(curr);
        curr = std::move(next);
        ++iterations;
    }

    // Extract the requested points from the admitted sequence.
    Eigen::MatrixXd values(req.size(), dim);
    std::size_t r = 0;
    for (std::size_t k = 0; k < m; ++k)
        if (r < req.size() && admitted[k] == req[r]) values.row(r++) = curr.row(k);
    if (r != req.size()) throw std::logic_error("admitted steps missed a requested point");

    double rich = cfg.richardson ? doubled_step_gap(*d, xi, req, values, cfg.admission_c) : 0.0;
    GreedyPartition cert = certificate(*d, grid.horizon(), cfg.admission_c);
    PicardResult out{assemble(std::move(d), Path(grid, std::move(values)), std::move(req),
                              std::move(cert), m - 1, rich),
                     std::move(gaps), iterations};
    return out;
}

StabilityReport stability_gap(std::shared_ptr<const RoughDriver> da,
                              std::shared_ptr<const RoughDriver> db, const Eigen::VectorXd& xi_a,
                              const Eigen::VectorXd& xi_b, const TimeGrid& grid,
                              const DavieConfig& cfg) {
    if (!da || !db) throw std::invalid_argument("stability_gap: driver is null");
    DavieConfig lean = cfg;
    lean.richardson = false;
    RdeSolution xa = solve_davie(da, xi_a, grid, lean);
    RdeSolution xb = solve_davie(db, xi_b, grid, lean);
    StabilityReport rep;
    rep.sup_gap = (xa.x.values() - xb.x.values()).rowwise().norm().maxCoeff();
    rep.initial_gap = (xi_a - xi_b).norm();
    rep.driver_gap = driver_distance(*da, *db, da->alpha(), grid.horizon()).total;
    double denom = rep.initial_gap + rep.driver_gap;
    rep.ratio = denom > 0.0 ? rep.sup_gap / denom : 0.0;
    rep.n_one = static_cast<double>(greedy_partition(da->control(), 1.0, 0.0,
                                                     grid.horizon()).n_beta);
    return rep;
}

double classical_consistency(const ControlledPath& beta,
                             std::shared_ptr<const FieldBasis> basis, const Eigen::VectorXd& xi,
                             const DavieConfig& cfg) {
    if (!basis) throw std::invalid_argument("classical_consistency: basis is null");
    if (beta.rows() != static_cast<int>(basis->size()))
        throw std::invalid_argument("classical_consistency: beta rows must equal basis size");
    const RoughPath& z = beta.base();
    const TimeGrid& grid = z.grid();
    int m = z.dim();

    // Nonlinear side: Davie solve against the integrated driver of beta.
    RoughPath coeff = integral_lift(beta, Eigen::VectorXd::Zero(beta.rows()));
    auto drv = std::make_shared<RoughDriver>(
        driver_from_rough_path(basis, std::move(coeff), z.alpha()));
    DavieConfig lean = cfg;
    lean.richardson = false;
    RdeSolution sol = solve_davie(drv, xi, grid, lean);

    // Classical side: controlled Euler-Milstein on the base rough path.
    Eigen::VectorXd x = xi;
    double gap = (x - sol.x.at(0)).norm();
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        Eigen::VectorXd dz = z.z_inc(k, k + 1);
        Eigen::MatrixXd zz = z.zz(k, k + 1);
        const Eigen::MatrixXd& b = beta.value(k);
        const Eigen::MatrixXd& bd = beta.derivative(k);
        // first level plus the Gubinelli-derivative correction, both in
        // coefficient space before mapping through the basis
        Eigen::VectorXd cf = b * dz;
        for (int a = 0; a < m; ++a) cf += bd.middleCols(a * m, m) * zz.col(a);
        Eigen::VectorXd step = basis->field_value(cf, x);
        // grad beta . beta : ZZ in state space
        std::vector<Eigen::VectorXd> fa(m);
        for (int a = 0; a < m; ++a) fa[a] = basis->field_value(b.col(a), x);
        for (int bcol = 0; bcol < m; ++bcol) {
            Eigen::MatrixXd jb = basis->field_jacobian(b.col(bcol), x);
            for (int a = 0; a < m; ++a) step += zz(a, bcol) * (jb * fa[a]);
        }
        x += step;
        gap = std::max(gap, (x - sol.x.at(k + 1)).norm());
    }
    return gap;
}

double local_holder_ratio(const RdeSolution& sol, double h) {
    double num = holder_seminorm(sol.x, sol.driver->alpha(), h);
    const TimeGrid& g = sol.x.grid();
    const RoughDriver& d = *sol.driver;
    double den = 0.0;
    for (std::size_t gap = 1; gap < g.size(); gap *= 2)
        for (std::size_t i = 0; i + gap < g.size(); ++i) {
            double span = g[i + gap] - g[i];
            if (span > h) continue;
            double f = d.basis().field_cb_bound(
                d.coeff().z_inc(sol.driver_index[i], sol.driver_index[i + gap]), 0);
            den = std::max(den, f / std::pow(span, d.alpha()));
        }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

}  // namespace rmkv
