#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bsde/generator.hpp"
#include "bsde/rng.hpp"

namespace bsde::test {

// Uniform draw in [lo, hi] from a deterministic stream.
inline double uniform(CounterRng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.next_uniform();
}

// Standard normal CDF through erfc, used as the independent check of the
// quantile function.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline PathSegment flat_segment(const double& t, const double& v) {
    return PathSegment{{&t, 1}, {&v, 1}};
}

struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;
    double fourth_central = 0.0;
    std::size_t n = 0;

    double se_mean() const { return std::sqrt(variance / static_cast<double>(n)); }
    double se_variance() const {
        return std::sqrt((fourth_central - variance * variance) / static_cast<double>(n));
    }
};

inline SampleStats stats(std::span<const double> xs) {
    SampleStats s;
    s.n = xs.size();
    for (double x : xs)
        s.mean += x;
    s.mean /= static_cast<double>(s.n);
    for (double x : xs) {
        const double d = x - s.mean;
        s.variance += d * d;
        s.fourth_central += d * d * d * d;
    }
    s.variance /= static_cast<double>(s.n);
    s.fourth_central /= static_cast<double>(s.n);
    return s;
}

} // namespace bsde::test
