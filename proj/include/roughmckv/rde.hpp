#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "roughmckv/control.hpp"
#include "roughmckv/controlled.hpp"
#include "roughmckv/defect.hpp"
#include "roughmckv/driver.hpp"
#include "roughmckv/two_param.hpp"

namespace rmkv {

// Step-size admission: a step (s, t) is accepted when
//     admission_c * step_weight(s, t) <= 1/2,
// the concrete form of the solver's smallness condition. Steps that fail are
// split inside the driver grid; a single driver step that still fails means
// the driver data cannot support a solve at this budget.
struct DavieConfig {
    double admission_c = 8.0;
    bool richardson = true;  // also solve on doubled steps, report the gap
};

// One RDE solve. The remainder decomposition
//     delta x_st = F_st(x_s) + FF_st(x_s, x_s) + natural_st,
//     sharp_st = delta x_st - F_st(x_s)
// is carried as evaluators over the solution grid, so it holds by
// construction and can be probed at any coarse pair.
struct RdeSolution {
    Path x;                      // on the requested grid
    TwoParamIncrement sharp;     // d x 1 per pair
    TwoParamIncrement natural;   // d x 1 per pair
    std::shared_ptr<const RoughDriver> driver;
    std::vector<std::size_t> driver_index;  // requested point -> driver grid index
    GreedyPartition steps_used;  // certificate at beta = (1/(2 admission_c))^p
    std::size_t internal_steps = 0;
    double richardson_gap = 0.0;  // sup |x_h - x_{2h}| at shared points

    DefectReport sharp_report() const;
    DefectReport natural_report() const;
};

// One-step scheme x_{k+1} = x_k + F(x_k) + FF(x_k, x_k) along admitted steps.
// The requested grid must be subordinate to the driver grid; steps violating
// the admission rule are refined inside the driver grid.
RdeSolution solve_davie(std::shared_ptr<const RoughDriver> d, const Eigen::VectorXd& xi,
                        const TimeGrid& grid, const DavieConfig& cfg = {});

struct PicardResult {
    RdeSolution solution;
    std::vector<double> gaps;  // sup |x^{n+1} - x^n| per iteration
    std::size_t iterations = 0;
};

// Picard iteration x^0 = xi, x^1 = xi + F_{0t}(xi), then stepped updates
// feeding the two-point second level with the two previous iterates. The
// discrete fixed point coincides with the Davie recursion on the same steps.
PicardResult solve_picard(std::shared_ptr<const RoughDriver> d, const Eigen::VectorXd& xi,
                          const TimeGrid& grid, int max_iters = 50, double tol = 1e-10,
                          const DavieConfig& cfg = {});

struct StabilityReport {
    double sup_gap = 0.0;      // sup over the grid of |x - y|
    double initial_gap = 0.0;  // |xi_a - xi_b|
    double driver_gap = 0.0;   // driver metric between the two drivers
    double ratio = 0.0;        // sup_gap / (initial_gap + driver_gap)
    double n_one = 0.0;        // greedy step count of driver a's control at beta = 1
};

// Solve both equations and compare, with the measured constants the
// continuity estimate relates: input size and accumulated roughness.
StabilityReport stability_gap(std::shared_ptr<const RoughDriver> da,
                              std::shared_ptr<const RoughDriver> db, const Eigen::VectorXd& xi_a,
                              const Eigen::VectorXd& xi_b, const TimeGrid& grid,
                              const DavieConfig& cfg = {});

// Gap between the nonlinear solve against the integrated driver of a
// controlled field family beta (rows = basis size, cols = base dimension) and
// the classical controlled-path scheme
//     x += beta(x) dZ + (beta' + grad beta . beta)(x) : ZZ
// stepped on the base grid. For time-independent beta the two updates are
// algebraically identical, so the gap sits at rounding level.
double classical_consistency(const ControlledPath& beta,
                             std::shared_ptr<const FieldBasis> basis, const Eigen::VectorXd& xi,
                             const DavieConfig& cfg = {});

// Measured local Holder ratio [x]_{alpha,h} / [F]_{alpha,h} over grid pairs
// with span <= h; the continuity estimate says it stays bounded.
double local_holder_ratio(const RdeSolution& sol, double h);

}  // namespace rmkv
