#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "roughmckv/brownian.hpp"
#include "roughmckv/controlled.hpp"
#include "roughmckv/driver.hpp"
#include "roughmckv/field_basis.hpp"
#include "roughmckv/path.hpp"

namespace rmkv {

// Interaction kernels of convolution type.  Each diffusion or drift channel
// applies a fixed size-by-J map to the probe moments of the current law and
// uses the result as atom coefficients: channel b of the diffusion reads
//   sigma_b(mu)(x) = sum_k ( sum_j sigma_maps[b](k, j) * mu(probe_j) ) atom_k(x).
// Probe functionals are 1-Lipschitz up to a computable constant, so kernels
// built this way are Lipschitz in the measure argument by construction.
struct KernelFamily {
    std::shared_ptr<const FieldBasis> basis;
    std::vector<TestFunction> probes;         // measure functionals phi_j
    std::vector<Eigen::MatrixXd> sigma_maps;  // per Brownian direction, size x J
    std::vector<Eigen::MatrixXd> beta_maps;   // per rough direction, size x J
    std::optional<Path> profile;              // scalar time modulation, default 1

    int brownian_dim() const { return int(sigma_maps.size()); }
    int rough_dim() const { return int(beta_maps.size()); }

    // Probe moments of an empirical law given as one particle per row,
    // averaged in row order so results are reproducible.
    Eigen::VectorXd moments(const Eigen::MatrixXd& positions) const;
    double profile_at(std::size_t grid_index) const;

    // Bound on the uniform norm of sigma(mu) - sigma(nu) divided by the
    // order-1 Wasserstein distance of the two laws, maximised over channels.
    double sigma_lipschitz() const;
    // Same bound for the drift kernels.
    double drift_lipschitz() const;

    void validate() const;
};

// Left-point sums of the frozen diffusion coefficients against a Brownian
// sample: the coefficient path steps by profile * sigma_maps[b] * moments
// times the Brownian increment, and the anchored second level has zero
// per-step part, which is the left-point reading of the iterated integral.
RoughPath build_w_sigma(const KernelFamily& kernels, const Path& moments,
                        const BrownianPath& w, double alpha = 0.40);

// Coefficient path of the frozen drift kernels along a controlled moment
// path (J rows, one column) over the rough reference.  Values pick up the
// kernel maps and the profile; derivatives transport the moment derivative.
ControlledPath beta_coefficient_path(const KernelFamily& kernels,
                                     const ControlledPath& moments);

// Level-2 lift of the drift coefficient integral against the rough input.
RoughPath build_z_beta(const ControlledPath& beta_coeffs);

// Hybrid driver over both noises.  Coefficient increments add the Brownian
// and rough parts; per step the second level keeps the rough lift block plus
// the Brownian coefficient increment tensored with the rough one (left-point
// readings of the remaining iterated blocks vanish step by step), and
// anchored accumulation extends this to every grid pair.  With zero sigma
// maps the output coefficients match the pure rough lift bit for bit, and
// with zero beta maps they match the pure Brownian sums.
RoughDriver build_mixed_driver(const KernelFamily& kernels,
                               const ControlledPath& moments,
                               const BrownianPath& w, double alpha = 0.40);

struct AccumulationStats {
    std::vector<int> step_counts;  // greedy step count per sample, input order
    std::vector<int> histogram;    // occurrences of each count, starting at 0
    double tail_slope = 0.0;       // fit of log P(N > r) against r^2
    double tail_r_squared = 0.0;
    double mean_exp = 0.0;         // sample mean of exp(N)
};

// Greedy step counts of driver samples under their p-variation control at
// threshold beta, with Gaussian-type tail diagnostics.  Controls are
// evaluated on a subsampled grid of at most max_grid points so the pair
// scan stays quadratic.  Needs at least 100 samples.
AccumulationStats accumulation_statistics(const std::vector<RoughDriver>& samples,
                                          double beta,
                                          std::size_t max_grid = 257);

}  // namespace rmkv
