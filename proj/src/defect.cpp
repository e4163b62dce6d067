#include "roughmckv/defect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rmkv {

double DefectReport::max() const {
    double m = 0.0;
    for (double v : max_defect) m = std::max(m, v);
    return m;
}

double DefectReport::fitted_slope() const {
    // Least squares of log(defect) on log(scale), skipping empty buckets.
    // Zero defects cannot enter a log fit; if every bucket is zero the decay
    // is infinitely fast by convention. The coarsest one or two scales sit
    // outside the asymptotic regime on desk horizons; when enough finer
    // scales exist they are reported but left out of the fit.
    std::size_t skip = 0;
    if (scales.size() >= 5)
        skip = 2;
    else if (scales.size() == 4)
        skip = 1;
    std::vector<double> xs, ys;
    for (std::size_t k = skip; k < scales.size(); ++k) {
        if (k < counts.size() && counts[k] == 0) continue;
        if (max_defect[k] > 0.0) {
            xs.push_back(std::log(scales[k]));
            ys.push_back(std::log(max_defect[k]));
        }
    }
    if (xs.empty()) return std::numeric_limits<double>::infinity();
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / sxx;
}

std::string DefectReport::describe(const std::string& name) const {
    std::ostringstream os;
    os << name << ": max=" << max() << " slope=" << fitted_slope() << " scales=[";
    for (std::size_t k = 0; k < scales.size(); ++k) {
        if (k) os << " ";
        os << scales[k] << ":" << max_defect[k];
    }
    os << "]";
    return os.str();
}

std::vector<double> dyadic_scales(double T, int levels) {
    if (levels < 1) throw std::invalid_argument("need at least one scale");
    std::vector<double> s(levels);
    for (int k = 0; k < levels; ++k) s[k] = T / static_cast<double>(std::size_t{1} << k);
    return s;
}

std::size_t scale_bucket(const std::vector<double>& scales, double span) {
    if (span <= 0.0 || scales.empty()) return static_cast<std::size_t>(-1);
    if (span > 1.5 * scales.front()) return static_cast<std::size_t>(-1);
    std::size_t best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scales.size(); ++k) {
        const double d = std::abs(std::log(span / scales[k]));
        if (d < bestd) {
            bestd = d;
            best = k;
        }
    }
    return best;
}

}  // namespace rmkv
