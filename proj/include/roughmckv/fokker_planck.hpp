#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughmckv/defect.hpp"
#include "roughmckv/field_basis.hpp"
#include "roughmckv/measures.hpp"
#include "roughmckv/rough_path.hpp"
#include "roughmckv/stochastic.hpp"

namespace rmkv {

// Operator pair of a rough path taking values in vector fields, acting on
// scalar test functions. b1 carries first-order transport, b2 the iterated
// transport plus the second-level contraction against the Hessian; together
// they satisfy the operator Chen relation
//     B2_{st} - B2_{sr} - B2_{rt} = B1_{rt} B1_{sr}
// exactly in the coefficient algebra, up to rounding in evaluation.
struct UnboundedRoughDriver {
    std::shared_ptr<const FieldBasis> basis;
    RoughPath source;  // atom coefficients with their second level

    const TimeGrid& grid() const { return source.grid(); }

    // (B1_{ij} phi)(x), the increment field acting on grad phi.
    double b1(std::size_t i, std::size_t j, const TestFunction& phi,
              const Eigen::VectorXd& x) const;
    // (B2_{ij} phi)(x).
    double b2(std::size_t i, std::size_t j, const TestFunction& phi,
              const Eigen::VectorXd& x) const;
    // Composition (B1_{jl} (B1_{ij} phi))(x), the exact value the Chen
    // defect of b2 must reproduce on the triple (i, j, l).
    double b1_after_b1(std::size_t i, std::size_t j, std::size_t l,
                       const TestFunction& phi, const Eigen::VectorXd& x) const;
};

// Wraps a rough path of field coefficients as the operator pair above.
UnboundedRoughDriver urd_from_rough_path(std::shared_ptr<const FieldBasis> basis, RoughPath x);

// Diffusion read at a grid index and a state; one column per Brownian
// direction. A zero-column matrix means no diffusion.
using SigmaField = std::function<Eigen::MatrixXd(std::size_t, const Eigen::VectorXd&)>;

enum class FpVerdict { pass, fail, inconclusive };

// One sampled window of one probe: the measure defect with its Monte Carlo
// confidence band from particle sub-batches.
struct FpDefectRow {
    std::size_t phi_id = 0;
    double s = 0.0;
    double t = 0.0;
    double defect = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct FpDefectReport {
    std::vector<FpDefectRow> rows;    // every sampled (probe, window)
    std::vector<double> scales;       // window lengths, decreasing
    std::vector<double> max_defect;   // per scale, across probes and windows
    std::vector<double> noise_level;  // per scale, widest CI half-width
    double fitted_exponent = 0.0;     // slope of log max defect vs log scale
    double threshold = 0.0;           // pass line for the exponent
    FpVerdict verdict = FpVerdict::inconclusive;
    std::size_t required_particles = 0;  // suggested N when inconclusive
    std::string probe_set;

    // Plain key=value summary, one entry per line plus one line per scale.
    std::string describe() const;
};

// Measure defect of the empirical law against the second-order expansion:
// the increment of each probe moment minus the time integral of the
// diffusion trace term and the two operator readings at the left endpoint.
// Windows are dyadic; the exponent is fitted on scales whose defect clears
// its own Monte Carlo band, and the verdict turns inconclusive (with a
// suggested particle count) when fewer than three scales do.
FpDefectReport fp_defect(const EmpiricalPathMeasure& mu, const SigmaField& sigma,
                         const UnboundedRoughDriver& urd,
                         const std::vector<TestFunction>& probes, int levels = 6,
                         double slack = 0.2, std::size_t batches = 16);

// Residual of the averaged second-order expansion of E[phi(x_t)]: increment
// minus the diffusion trace integral minus the compensated rough integral of
// the averaged transport term, bucketed over dyadic windows.
DefectReport average_ito_residual(const ControlledMeasure& ensemble, const KernelFamily& k,
                                  std::shared_ptr<const RoughPath> z,
                                  const std::vector<TestFunction>& probes, int levels = 6);

// Measure defect of a mean-field fixed point against its own frozen-law
// equation: the drift lifted along the common noise becomes the operator
// pair, the frozen diffusion builds the trace term, then fp_defect runs.
FpDefectReport nonlocal_fp_check(const ControlledMeasure& fixed_point, const KernelFamily& k,
                                 std::shared_ptr<const RoughPath> z,
                                 const std::vector<TestFunction>& probes, int levels = 6,
                                 double slack = 0.2, std::size_t batches = 16);

}  // namespace rmkv
