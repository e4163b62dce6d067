#pragma once

#include <functional>
#include <vector>

#include "roughmckv/two_param.hpp"

namespace rmkv {

// Superadditive two-parameter function w(s,t) >= 0 measuring accumulated
// roughness; drives step-size admission.
struct ControlFn {
    enum class Kind { from_p_variation, from_holder, explicit_fn };

    Kind kind = Kind::explicit_fn;
    std::function<double(double, double)> w;

    double operator()(double s, double t) const { return w(s, t); }

    static ControlFn explicit_fn(std::function<double(double, double)> w);
    // w(s,t) = [[g]]_{p,[s,t]}^p restricted to grid-subordinate partitions.
    static ControlFn from_p_variation(const TwoParamIncrement& g, double p);
    // w(s,t) = c^{1/alpha} * (t-s): the control induced by an alpha-Holder
    // bound with seminorm c.
    static ControlFn from_holder(double seminorm, double alpha);

    // Max of w(s,u)+w(u,t)-w(s,t) over sampled triples in [0,T] (positive
    // values are superadditivity violations).
    double superadditivity_violation(double T, int samples = 1000,
                                     unsigned long long seed = 1) const;
};

struct GreedyPartition {
    std::vector<double> tau;  // tau_0 = s, ..., last = T
    int n_beta = 0;           // sup{ n >= 0 : tau_n < T }
    bool superadditive_ok = true;
    double max_violation = 0.0;
};

// tau_{n+1} = inf{ t : w(tau_n, t) >= beta } ^ T, located by bisection with
// tolerance 1e-10 * T. Superadditivity is spot-checked; a violation is
// reported in the result but does not stop the computation.
GreedyPartition greedy_partition(const ControlFn& w, double beta, double s, double T);

}  // namespace rmkv
