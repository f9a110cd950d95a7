#pragma once

#include <cstdint>

namespace bsde {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so substreams can be consumed independently and in parallel
// with identical results.
class CounterRng {
    std::uint64_t key_;
    std::uint64_t counter_ = 0;

public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    double next_uniform(); // open interval (0,1)
    double next_normal();  // inverse-CDF of a uniform
    // Poisson count by CDF inversion of a single uniform.
    std::uint32_t next_poisson(double mean);
};

// Quantile of the standard normal distribution, full double accuracy.
double inverse_normal_cdf(double p);

} // namespace bsde
