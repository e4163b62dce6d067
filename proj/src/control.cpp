#include "roughmckv/control.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "roughmckv/norms.hpp"

namespace rmkv {

ControlFn ControlFn::explicit_fn(std::function<double(double, double)> w) {
    ControlFn c;
    c.kind = Kind::explicit_fn;
    c.w = std::move(w);
    return c;
}

ControlFn ControlFn::from_p_variation(const TwoParamIncrement& g, double p) {
    if (p < 1.0) throw std::invalid_argument("p must be >= 1");
    ControlFn c;
    c.kind = Kind::from_p_variation;
    // Snap query times to the grid; the p-variation of grid data only changes
    // at grid points.
    c.w = [g, p](double s, double t) -> double {
        if (t <= s) return 0.0;
        const TimeGrid& grid = g.grid();
        std::size_t lo = grid.index_at(s);
        if (grid[lo] < s - 1e-15 * grid.horizon()) ++lo;
        std::size_t hi = grid.index_at(t);
        if (hi <= lo) return 0.0;
        return std::pow(p_variation(g, p, lo, hi), p);
    };
    return c;
}

ControlFn ControlFn::from_holder(double seminorm, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0,1]");
    ControlFn c;
    c.kind = Kind::from_holder;
    const double base = std::pow(seminorm, 1.0 / alpha);
    c.w = [base](double s, double t) -> double { return t <= s ? 0.0 : base * (t - s); };
    return c;
}

double ControlFn::superadditivity_violation(double T, int samples,
                                            unsigned long long seed) const {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, T);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        double a = unif(gen), b = unif(gen), c = unif(gen);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const double v = w(a, b) + w(b, c) - w(a, c);
        if (v > worst) worst = v;
    }
    return worst;
}

GreedyPartition greedy_partition(const ControlFn& w, double beta, double s, double T) {
    if (!(beta > 0.0)) throw std::invalid_argument("threshold must be positive");
    if (!(T > s)) throw std::invalid_argument("empty interval");

    GreedyPartition out;
    // Grid p-variation and Holder-induced controls are superadditive by
    // construction; only user-supplied evaluators need the spot check.
    if (w.kind == ControlFn::Kind::explicit_fn) {
        out.max_violation = w.superadditivity_violation(T, 200);
        out.superadditive_ok = out.max_violation <= 1e-12 * (1.0 + std::abs(w(s, T)));
    }

    const double tol = 1e-10 * T;
    double cur = s;
    out.tau.push_back(cur);
    while (cur < T) {
        if (w(cur, T) < beta) {
            out.tau.push_back(T);
            break;
        }
        // Leftmost t with w(cur, t) >= beta, by bisection on a nondecreasing
        // marginal.
        double lo = cur, hi = T;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (w(cur, mid) >= beta)
                hi = mid;
            else
                lo = mid;
        }
        cur = hi;
        out.tau.push_back(cur);
        if (out.tau.size() > 1000000)
            throw std::runtime_error("greedy partition did not terminate");
    }
    // N = sup{ n : tau_n < T }.
    int n = 0;
    for (std::size_t k = 0; k < out.tau.size(); ++k)
        if (out.tau[k] < T) n = static_cast<int>(k);
    out.n_beta = n;
    return out;
}

}  // namespace rmkv
