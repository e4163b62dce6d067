#include "roughmckv/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "roughmckv/norms.hpp"

namespace rmkv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_order(double rho) {
    if (!(rho >= 1.0)) throw std::invalid_argument("wasserstein order must be at least 1");
}

// Row-major lexicographic order on (rows, cols, entries); ties are equality.
bool cloud_less(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) return a.rows() < b.rows();
    if (a.cols() != b.cols()) return a.cols() < b.cols();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (a(i, j) < b(i, j)) return true;
            if (a(i, j) > b(i, j)) return false;
        }
    return false;
}

// Exact one-dimensional transport: match quantile functions across the
// merged breakpoints of the two uniform weight ladders.
TransportReport sorted_matching(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho) {
    std::vector<double> xs(a.col(0).data(), a.col(0).data() + a.rows());
    std::vector<double> ys(b.col(0).data(), b.col(0).data() + b.rows());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double wa = 1.0 / static_cast<double>(xs.size());
    const double wb = 1.0 / static_cast<double>(ys.size());
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    double ra = wa, rb = wb;
    while (i < xs.size() && j < ys.size()) {
        const double take = std::min(ra, rb);
        cost += take * std::pow(std::abs(xs[i] - ys[j]), rho);
        ra -= take;
        rb -= take;
        if (ra <= 0.0) { ++i; ra = wa; }
        if (rb <= 0.0) { ++j; rb = wb; }
    }
    return {std::pow(cost, 1.0 / rho), 0.0, "sorted"};
}

// Exact minimum-cost assignment by shortest augmenting paths with potentials,
// O(n^3). Returns the matched column of each row.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) match[p[j] - 1] = j - 1;
    return match;
}

TransportReport hungarian(const Eigen::MatrixXd& cost, double rho) {
    const auto match = min_cost_assignment(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < match.size(); ++i) total += cost(i, match[i]);
    total /= static_cast<double>(match.size());
    return {std::pow(total, 1.0 / rho), 0.0, "hungarian"};
}

// Log-domain Sinkhorn with a geometric temperature schedule, rounded to an
// exactly feasible coupling; the dual bound comes from a double c-transform
// of the final potential, so the reported gap is valid for the
// unregularized problem.
TransportReport sinkhorn(const Eigen::MatrixXd& cost, double rho) {
    const Eigen::Index n = cost.rows(), m = cost.cols();
    const double rn = 1.0 / static_cast<double>(n), cm = 1.0 / static_cast<double>(m);
    const double cmax = std::max(cost.maxCoeff(), 1e-30);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);

    auto lse_rows = [&](double eps) {
        // f_i <- eps log r_i - eps LSE_j((g_j - c_ij)/eps)
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::ArrayXd arg = (g.transpose().array() - cost.row(i).array()) / eps;
            const double mx = arg.maxCoeff();
            f(i) = eps * std::log(rn) - eps * (mx + std::log((arg - mx).exp().sum()));
        }
    };
    auto lse_cols = [&](double eps) {
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::ArrayXd arg = (f.array() - cost.col(j).array()) / eps;
            const double mx = arg.maxCoeff();
            g(j) = eps * std::log(cm) - eps * (mx + std::log((arg - mx).exp().sum()));
        }
    };

    double eps = cmax / 8.0;
    const double eps_min = std::max(cmax * 2e-4, 1e-12);
    while (true) {
        for (int it = 0; it < 24; ++it) {
            lse_rows(eps);
            lse_cols(eps);
        }
        if (eps <= eps_min) break;
        eps = std::max(eps * 0.6, eps_min);
    }

    // Plan from the final potentials, then scale and patch the marginals.
    Eigen::MatrixXd plan(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        plan.row(i) = ((f(i) + g.transpose().array() - cost.row(i).array()) / eps).exp();
    Eigen::VectorXd row_sum = plan.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
        if (row_sum(i) > rn) plan.row(i) *= rn / row_sum(i);
    Eigen::VectorXd col_sum = plan.colwise().sum();
    for (Eigen::Index j = 0; j < m; ++j)
        if (col_sum(j) > cm) plan.col(j) *= cm / col_sum(j);
    Eigen::VectorXd row_err = Eigen::VectorXd::Constant(n, rn) - plan.rowwise().sum();
    Eigen::VectorXd col_err = Eigen::VectorXd::Constant(m, cm) - plan.colwise().sum().transpose();
    const double missing = row_err.sum();
    if (missing > 0.0) plan += row_err * col_err.transpose() / missing;
    const double primal = (plan.array() * cost.array()).sum();

    // c-transform twice for a feasible dual pair of the exact problem.
    Eigen::VectorXd g_t(m), f_t(n);
    for (Eigen::Index j = 0; j < m; ++j) g_t(j) = (cost.col(j) - f).minCoeff();
    for (Eigen::Index i = 0; i < n; ++i) f_t(i) = (cost.row(i).transpose() - g_t).minCoeff();
    const double dual = rn * f_t.sum() + cm * g_t.sum();

    return {std::pow(primal, 1.0 / rho), std::max(primal - dual, 0.0), "sinkhorn"};
}

TransportReport from_cost(const Eigen::MatrixXd& cost, double rho, std::size_t exact_limit) {
    if (cost.rows() == cost.cols() &&
        static_cast<std::size_t>(cost.rows()) <= std::max<std::size_t>(exact_limit, 1)) {
        return hungarian(cost, rho);
    }
    return sinkhorn(cost, rho);
}

}  // namespace

TransportReport wasserstein_report(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                   std::size_t exact_limit) {
    check_order(rho);
    if (a.rows() < 1 || b.rows() < 1)
        throw std::invalid_argument("point clouds need at least one sample");
    if (a.cols() != b.cols())
        throw std::invalid_argument("point clouds must share one dimension");
    // Canonical argument order makes the value bitwise symmetric.
    const bool swap = cloud_less(b, a);
    const Eigen::MatrixXd& x = swap ? b : a;
    const Eigen::MatrixXd& y = swap ? a : b;
    if (x.cols() == 1) return sorted_matching(x, y, rho);
    Eigen::MatrixXd cost(x.rows(), y.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            cost(i, j) = std::pow((x.row(i) - y.row(j)).norm(), rho);
    if (x.rows() != y.rows()) return sinkhorn(cost, rho);
    return from_cost(cost, rho, exact_limit);
}

double wasserstein_rho(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho) {
    return wasserstein_report(a, b, rho).value;
}

TransportReport wasserstein_paths_report(const std::vector<Path>& a, const std::vector<Path>& b,
                                         double rho, double alpha, std::size_t exact_limit) {
    check_order(rho);
    if (a.empty() || b.empty()) throw std::invalid_argument("path measures need at least one path");
    const TimeGrid& grid = a.front().grid();
    for (const auto& p : a)
        if (!(p.grid() == grid)) throw std::invalid_argument("path measures must share one grid");
    for (const auto& p : b)
        if (!(p.grid() == grid)) throw std::invalid_argument("path measures must share one grid");

    auto flat_less = [](const std::vector<Path>& u, const std::vector<Path>& v) {
        if (u.size() != v.size()) return u.size() < v.size();
        for (std::size_t k = 0; k < u.size(); ++k) {
            if (cloud_less(u[k].values(), v[k].values())) return true;
            if (cloud_less(v[k].values(), u[k].values())) return false;
        }
        return false;
    };
    const bool swap = flat_less(b, a);
    const std::vector<Path>& x = swap ? b : a;
    const std::vector<Path>& y = swap ? a : b;

    const double horizon = grid.horizon();
    Eigen::MatrixXd cost(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) {
            Path diff(grid, x[i].values() - y[j].values());
            cost(i, j) = std::pow(holder_seminorm(diff, alpha, horizon), rho);
        }
    if (x.size() != y.size()) return sinkhorn(cost, rho);
    return from_cost(cost, rho, exact_limit);
}

double wasserstein_paths(const std::vector<Path>& a, const std::vector<Path>& b, double rho,
                         double alpha) {
    return wasserstein_paths_report(a, b, rho, alpha).value;
}

}  // namespace rmkv
