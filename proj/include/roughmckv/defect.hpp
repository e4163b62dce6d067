#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rmkv {

// Measured two-parameter magnitudes bucketed by dyadic scale |t-s|, with a
// least-squares log-log slope. Every module reports remainders through this.
struct DefectReport {
    std::vector<double> scales;       // representative |t-s| per bucket, decreasing
    std::vector<double> max_defect;   // max magnitude observed in the bucket
    std::vector<std::size_t> counts;  // samples per bucket

    double max() const;
    // Slope of log(max_defect) against log(scale); +infinity when every
    // bucket is exactly zero (nothing decays because nothing is there).
    double fitted_slope() const;

    std::string describe(const std::string& name) const;
};

// Scale buckets T/2^k for k = 0..levels-1.
std::vector<double> dyadic_scales(double T, int levels);

// Bucket index for a span |t-s| among the given scales (nearest in log),
// or npos when the span is larger than 1.5x the coarsest scale.
std::size_t scale_bucket(const std::vector<double>& scales, double span);

}  // namespace rmkv
