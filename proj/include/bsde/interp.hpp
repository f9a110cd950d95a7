#pragma once

#include <span>
#include <vector>

namespace bsde {

// Monotonicity-preserving cubic Hermite interpolant (Fritsch-Carlson slopes).
// Queries outside the abscissa range are clipped to the end values.
class MonotoneCubic {
    std::vector<double> x_, y_, slope_;

public:
    MonotoneCubic(std::span<const double> x, std::span<const double> y);

    double operator()(double v) const;
    bool clips(double v) const { return v < x_.front() || v > x_.back(); }
};

} // namespace bsde
